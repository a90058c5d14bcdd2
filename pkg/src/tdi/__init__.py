"""tdi: 3D images from single-point time-of-flight histograms.

Simulates photon arrival-time histograms of synthetic scenes, trains a
fully-connected inverse model that reconstructs depth images from a single
histogram, and evaluates reconstruction quality and physical resolution
limits.
"""

__version__ = "0.1.0"

from . import config, forward, metrics, mlp, pipeline, scene, store  # noqa: E402,F401

__all__ = ["config", "scene", "forward", "mlp", "metrics", "store", "pipeline",
           "__version__"]
