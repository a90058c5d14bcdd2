"""Forward model: depth image -> single-point photon arrival-time histogram.

Every returning pixel contributes an expected photon count of
reflectivity * p0 / r^4 at arrival time 2r/c (round trip; r is the pixel's
3D distance reconstructed from the pinhole geometry). Expected, real-valued
counts flow through the noiseless path so it stays deterministic and exactly
conservative; discreteness only enters through the Poisson noise stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import NOISE_FRACTIONS, SPEED_OF_LIGHT, SimConfig
from .scene import DepthImage, pixel_offsets


class SpanError(ValueError):
    """A pixel's arrival time falls beyond the last histogram bin."""


@dataclass
class Histogram:
    """Fixed-width time bins of expected (or sampled) photon counts."""

    bin_width_s: float
    counts: np.ndarray
    t0_s: float = 0.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.ndim != 1 or self.counts.size < 2:
            raise ValueError("counts must be a 1-D array with at least 2 bins")
        if self.bin_width_s <= 0:
            raise ValueError("bin_width_s must be positive")
        if not np.isfinite(self.counts).all() or (self.counts < 0).any():
            raise ValueError("counts must be finite and >= 0")

    @property
    def bins(self) -> int:
        return self.counts.size

    def bin_starts(self) -> np.ndarray:
        return self.t0_s + np.arange(self.bins) * self.bin_width_s


@dataclass
class NoiseSpec:
    """Noise level 0..3 with its fractional perturbation expectation."""

    level: int
    fractional_expectation: float

    @classmethod
    def from_level(cls, level: int) -> "NoiseSpec":
        if not 0 <= level < len(NOISE_FRACTIONS):
            raise ValueError(f"noise level must be 0..{len(NOISE_FRACTIONS) - 1}")
        return cls(level=level, fractional_expectation=NOISE_FRACTIONS[level])

    def __post_init__(self):
        if self.level == 0 and self.fractional_expectation != 0.0:
            raise ValueError("level 0 means no noise")


def pixel_time(x: float, y: float, z: float, convention: str = "round_trip") -> float:
    """Photon arrival time in seconds for a return from (x, y, z) meters."""
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        raise ValueError("pixel position must not be the origin")
    if convention == "round_trip":
        return 2.0 * r / SPEED_OF_LIGHT
    if convention == "one_way":
        return r / SPEED_OF_LIGHT
    raise ValueError(f"unknown time convention {convention!r}")


def pixel_photons(d: float, reflectivity: float, p0: float) -> float:
    """Expected photon count from a surface point at distance d meters."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return reflectivity * p0 / d ** 4


def simulate_histogram(img: DepthImage, cfg: SimConfig) -> Histogram:
    """Accumulate every returning pixel into its arrival-time bin (noiseless).

    Bin contributions are summed in a canonical (bin, value) order, so the
    result is independent of pixel enumeration order; in particular a scene
    and its exact mirror produce bit-identical histograms.
    """
    if img.depth_m.shape != (cfg.img_h, cfg.img_w):
        raise ValueError(
            f"image is {img.depth_m.shape}, config expects {(cfg.img_h, cfg.img_w)}")

    counts = np.zeros(cfg.bins, dtype=np.float64)
    rows, cols = np.nonzero(img.depth_m > 0)
    if rows.size == 0:
        return Histogram(cfg.bin_width_s, counts)

    f = cfg.focal_px
    z = img.depth_m[rows, cols]
    x = (pixel_offsets(cfg.img_w)[cols] / f) * z
    y = -(pixel_offsets(cfg.img_h)[rows] / f) * z
    r = np.sqrt(x * x + y * y + z * z)

    factor = 2.0 if cfg.time_convention == "round_trip" else 1.0
    t = factor * r / SPEED_OF_LIGHT
    bins = np.floor(t / cfg.bin_width_s).astype(np.int64)
    if (bins >= cfg.bins).any():
        worst = int(np.argmax(bins))
        raise SpanError(
            f"return from depth {z[worst]:.4f} m (distance {r[worst]:.4f} m) arrives at "
            f"{t[worst]:.3e} s, beyond the histogram span of "
            f"{cfg.bins * cfg.bin_width_s:.3e} s")

    photons = img.reflectance[rows, cols] * cfg.p0 / r ** 4
    order = np.lexsort((photons, bins))
    np.add.at(counts, bins[order], photons[order])
    return Histogram(cfg.bin_width_s, counts)


def convolve_irf(h: Histogram, dt_s: float) -> Histogram:
    """Blur a histogram with a Gaussian impulse response exp(-t^2 / dt^2).

    dt_s is the 1/e half-width. The kernel is sampled at bin centers,
    truncated at +/- 4 dt, and renormalized to unit sum, so total counts are
    preserved to better than 1e-6 away from the histogram edges. dt_s = 0
    returns the input unchanged.
    """
    if dt_s < 0:
        raise ValueError("dt_s must be >= 0")
    if dt_s == 0.0:
        return Histogram(h.bin_width_s, h.counts.copy(), h.t0_s)
    half = max(1, math.ceil(4.0 * dt_s / h.bin_width_s))
    offsets = np.arange(-half, half + 1, dtype=np.float64) * h.bin_width_s
    kernel = np.exp(-((offsets / dt_s) ** 2))
    kernel /= kernel.sum()
    blurred = np.convolve(h.counts, kernel, mode="full")[half: half + h.bins]
    return Histogram(h.bin_width_s, np.maximum(blurred, 0.0), h.t0_s)


def _noise_scales(counts: np.ndarray, fraction: float):
    """Per-stage noise parameters hitting the calibration target.

    The target is a mean absolute perturbation of fraction * mean(nonzero
    bins), split evenly (in variance) between the Poisson stage (via count
    scaling) and the Gaussian stage (via sigma). For two roughly Gaussian
    stages of standard deviation s each, E|sum| = (2/sqrt(pi)) * s, so each
    stage uses s = target * sqrt(pi) / 2.
    """
    nz = counts > 0
    if not nz.any():
        return 0.0, 0.0
    mean_nz = float(counts[nz].mean())
    target = fraction * mean_nz
    s = target * math.sqrt(math.pi) / 2.0
    sqrt_mean = float(np.sqrt(counts[nz]).mean())
    alpha = (sqrt_mean / s) ** 2  # Poisson(alpha * b) / alpha has std sqrt(b / alpha)
    return alpha, s


def add_noise(h: Histogram, spec: NoiseSpec, seed: int) -> Histogram:
    """Poisson + Gaussian perturbation at the spec's fractional expectation.

    Level 0 returns the input unchanged. Otherwise each bin b becomes
    max(0, Poisson(alpha * b) / alpha + Normal(0, sigma)), with alpha and
    sigma calibrated so the mean absolute perturbation of nonzero bins is
    approximately fractional_expectation * mean(nonzero bins). Deterministic
    for a fixed seed.
    """
    if spec.level == 0 or spec.fractional_expectation == 0.0:
        return Histogram(h.bin_width_s, h.counts.copy(), h.t0_s)
    rng = np.random.default_rng(seed)
    alpha, sigma = _noise_scales(h.counts, spec.fractional_expectation)
    if alpha == 0.0:  # all-zero histogram: nothing to perturb against
        return Histogram(h.bin_width_s, h.counts.copy(), h.t0_s)
    noisy = rng.poisson(h.counts * alpha).astype(np.float64) / alpha
    noisy += rng.normal(0.0, sigma, size=h.bins)
    return Histogram(h.bin_width_s, np.maximum(noisy, 0.0), h.t0_s)


def normalize_histogram(h: Histogram) -> np.ndarray:
    """Counts divided by the maximum count; an all-zero histogram stays zero."""
    peak = float(h.counts.max())
    if peak == 0.0:
        return np.zeros(h.bins, dtype=np.float64)
    return h.counts / peak


def write_histogram_csv(h: Histogram, path) -> None:
    """CSV export: header `bin_start_s,count`, one row per bin."""
    starts = h.bin_starts()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_start_s,count\n")
        for t, c in zip(starts, h.counts):
            fh.write(f"{float(t)!r},{float(c)!r}\n")


def read_histogram_csv(path) -> Histogram:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "bin_start_s,count":
            raise ValueError(f"unexpected histogram CSV header: {header!r}")
        starts, counts = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t, c = line.split(",")
            starts.append(float(t))
            counts.append(float(c))
    if len(starts) < 2:
        raise ValueError("histogram CSV needs at least 2 bins")
    width = starts[1] - starts[0]
    return Histogram(width, np.asarray(counts), t0_s=starts[0])
