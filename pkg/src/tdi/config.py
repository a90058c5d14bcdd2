"""Shared configuration for the simulation and retrieval pipeline.

All lengths are meters, all times are seconds. A single SimConfig instance
describes the virtual camera, the depth range of the scene, and the
time-binning of the single-point detector; every stage of the pipeline reads
its knobs from here so that a run is reproducible from the config alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

SPEED_OF_LIGHT = 299792458.0  # m/s

# Fractional noise expectation for noise levels 0..3 (relative perturbation
# of the nonzero histogram bins).
NOISE_FRACTIONS = (0.0, 0.032, 0.10, 0.33)

# Best-case detector timing used by the resolution studies (2.3 ps).
FINE_TIMING_S = 2.3e-12

# Default sweep grids for the study drivers.
IRF_SWEEP_S = (2.3e-12, 25e-12, 250e-12, 1000e-12)
DATASET_SIZE_SWEEP = (500, 1000, 2000, 4000)
REFLECTIVITY_SWEEP = (0.5, 1.0, 1.5, 2.0)
REFLECTIVITY_TRAIN_RANGE = (0.25, 4.0)

TIME_CONVENTIONS = ("round_trip", "one_way")


@dataclass
class SimConfig:
    """Virtual camera + detector description.

    bin_width_s defaults to a value that makes the histogram span the full
    round trip to z_max plus range_margin_m, so every valid scene fits.
    """

    fov_deg: float = 52.0          # full angular field of view
    img_w: int = 64
    img_h: int = 64
    z_min: float = 1.0             # nearest allowed placement depth [m]
    z_max: float = 4.0             # wall depth / farthest return [m]
    bins: int = 8000
    bin_width_s: float | None = None
    p0: float = 100.0              # source power scale (photons at 1 m, unit reflectivity)
    time_convention: str = "round_trip"
    irf_dt_s: float = 0.0          # Gaussian IRF 1/e half-width, 0 = ideal
    noise_level: int = 0           # 0..3
    seed: int = 0
    range_margin_m: float = 1.0    # slack beyond z_max covered by the histogram

    def __post_init__(self):
        if self.fov_deg <= 0 or self.fov_deg >= 180:
            raise ValueError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        if self.img_w < 8 or self.img_h < 8:
            raise ValueError("image resolution must be at least 8x8")
        if not (0 < self.z_min < self.z_max):
            raise ValueError("need 0 < z_min < z_max")
        if self.bins < 2:
            raise ValueError("need at least 2 histogram bins")
        if self.time_convention not in TIME_CONVENTIONS:
            raise ValueError(f"unknown time convention {self.time_convention!r}")
        if self.irf_dt_s < 0:
            raise ValueError("irf_dt_s must be >= 0")
        if not 0 <= self.noise_level < len(NOISE_FRACTIONS):
            raise ValueError(f"noise_level must be 0..{len(NOISE_FRACTIONS) - 1}")
        if self.p0 <= 0:
            raise ValueError("p0 must be positive")
        if self.bin_width_s is None:
            span = 2.0 * (self.z_max + self.range_margin_m)
            self.bin_width_s = span / (SPEED_OF_LIGHT * self.bins)
        if self.bin_width_s <= 0:
            raise ValueError("bin_width_s must be positive")
        if self.time_convention == "round_trip":
            reach = self.bins * self.bin_width_s * SPEED_OF_LIGHT / 2.0
            if reach < self.z_max:
                raise ValueError(
                    f"histogram spans only {reach:.3f} m round-trip, scene needs {self.z_max} m"
                )

    @property
    def fov_rad(self) -> float:
        return math.radians(self.fov_deg)

    @property
    def focal_px(self) -> float:
        """Pinhole focal length in pixels (square pixels, fov across width)."""
        return (self.img_w / 2.0) / math.tan(self.fov_rad / 2.0)

    def with_(self, **kw) -> "SimConfig":
        if ({"bins", "z_max", "range_margin_m"} & kw.keys()) and "bin_width_s" not in kw:
            kw["bin_width_s"] = None  # re-derive span-covering width for the new geometry
        return replace(self, **kw)


def desk_sim(seed: int = 0) -> SimConfig:
    """Small configuration sized so the full pipeline runs in minutes on a laptop."""
    return SimConfig(img_w=32, img_h=32, bins=2000, seed=seed)


def paper_sim(seed: int = 0) -> SimConfig:
    """Full-size configuration (64x64 images, 8000 bins)."""
    return SimConfig(seed=seed)


# ---------------------------------------------------------------------------
# Plain-text config files: one `key = value` per line, '#' comments, SI units.
# One file carries simulation, generator, and trainer keys side by side;
# each consumer picks out the keys it understands.

_CONFIG_TYPES = {
    "fov_deg": float,
    "img_w": int,
    "img_h": int,
    "z_min": float,
    "z_max": float,
    "bins": int,
    "bin_width_s": float,
    "p0": float,
    "time_convention": str,
    "irf_dt_s": float,
    "noise_level": int,
    "seed": int,
    "range_margin_m": float,
}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into a {key: str} dict (no type coercion)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def sim_overrides(raw: dict) -> dict:
    """Typed SimConfig fields present in a parsed key-value dict.

    Foreign keys (generator / trainer settings share the same file) are
    left alone for their own consumers.
    """
    return {key: _CONFIG_TYPES[key](value) for key, value in raw.items()
            if key in _CONFIG_TYPES}


def load_sim_config(path, base: SimConfig | None = None) -> SimConfig:
    """Apply a key-value file on top of a base config (defaults if None)."""
    with open(path, "r", encoding="utf-8") as fh:
        overrides = sim_overrides(parse_config_text(fh.read()))
    if base is None:
        return SimConfig(**overrides)
    return base.with_(**overrides) if overrides else base


def sim_config_items(cfg: SimConfig) -> list[tuple[str, str]]:
    """SimConfig as (key, value-string) pairs, round-trippable through parse."""
    items = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        items.append((f.name, repr(value) if isinstance(value, float) else str(value)))
    return items
