"""Reconstruction quality (windowed SSIM) and physical resolution limits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT

# Canonical SSIM parameters: 11x11 Gaussian window (sigma 1.5), stability
# constants K1/K2, unit dynamic range for normalized images.
WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DYNAMIC_RANGE = 1.0


@dataclass
class SsimResult:
    map: np.ndarray   # per-pixel similarity in [-1, 1], same shape as inputs
    mean: float


def _window() -> np.ndarray:
    k = np.arange(WINDOW_SIZE, dtype=np.float64) - (WINDOW_SIZE - 1) / 2.0
    g = np.exp(-(k ** 2) / (2.0 * WINDOW_SIGMA ** 2))
    w = np.outer(g, g)
    return w / w.sum()


_W2D = _window()


def _windowed_mean(img: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local mean with symmetric edge padding (same size)."""
    pad = WINDOW_SIZE // 2
    padded = np.pad(img, pad, mode="symmetric")
    view = np.lib.stride_tricks.sliding_window_view(padded, (WINDOW_SIZE, WINDOW_SIZE))
    return np.tensordot(view, _W2D, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray) -> SsimResult:
    """Structural similarity map and mean between two normalized images.

    Inputs are 2-D arrays of equal shape with values in [0, 1]. The map has
    the same shape as the inputs (symmetric padding at the edges) and every
    value lies in [-1, 1]; identical inputs give exactly 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"images must be equal-shape 2-D arrays, got {a.shape} vs {b.shape}")

    c1 = (K1 * DYNAMIC_RANGE) ** 2
    c2 = (K2 * DYNAMIC_RANGE) ** 2

    mu_a = _windowed_mean(a)
    mu_b = _windowed_mean(b)
    s_aa = _windowed_mean(a * a) - mu_a * mu_a
    s_bb = _windowed_mean(b * b) - mu_b * mu_b
    s_ab = _windowed_mean(a * b) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * s_ab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (s_aa + s_bb + c2)
    smap = num / den
    return SsimResult(map=smap, mean=float(smap.mean()))


def batch_ssim(pairs) -> tuple[np.ndarray, float]:
    """Per-pair mean SSIM in input order plus the overall mean."""
    if len(pairs) == 0:
        raise ValueError("need at least one image pair")
    means = np.array([ssim(p, t).mean for p, t in pairs], dtype=np.float64)
    return means, float(means.mean())


def lateral_resolution(d: float, dt: float) -> float:
    """Minimum resolvable transverse feature at distance d with timing dt.

    c*dt * sqrt(2d/(c*dt) + 1), algebraically sqrt((d + c*dt)^2 - d^2):
    grows with the square root of distance, so resolution degrades slowly
    far from the sensor.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if d < 0:
        raise ValueError("distance must be >= 0")
    c_dt = SPEED_OF_LIGHT * dt
    return c_dt * math.sqrt(2.0 * d / c_dt + 1.0)


def depth_resolution(dt: float) -> float:
    """Axial (depth) resolution c * dt, set purely by the timing resolution."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return SPEED_OF_LIGHT * dt
