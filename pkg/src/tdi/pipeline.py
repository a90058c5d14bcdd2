"""End-to-end pipeline: scenes -> histogram/image pairs -> training -> SSIM.

This module holds the machinery shared by the command-line driver, the demo
scripts, and the study sweeps. Histograms are kept in raw (expected-count)
form as long as possible so the same simulated scenes can be re-finalized
under different IRF widths, noise levels, or reflectivity ratios without
re-rendering.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import forward, metrics, mlp, scene, store
from .config import (IRF_SWEEP_S, DATASET_SIZE_SWEEP, REFLECTIVITY_SWEEP,
                     REFLECTIVITY_TRAIN_RANGE, SimConfig, desk_sim, paper_sim)

BACKGROUND_KINDS = ("structured", "uniform")


@dataclass
class DatasetRecipe:
    """Everything needed to regenerate a dataset deterministically."""

    sim: SimConfig
    n_silhouettes: int = 10
    depth_steps: int = 10
    lateral_steps: int = 20
    background: str = "structured"
    reflectivity: float = 1.0
    reflectivity_range: tuple | None = None   # loguniform per scene when set

    def __post_init__(self):
        if self.background not in BACKGROUND_KINDS:
            raise ValueError(f"background must be one of {BACKGROUND_KINDS}")
        if self.reflectivity_range is not None:
            lo, hi = self.reflectivity_range
            if not 0 < lo <= hi:
                raise ValueError("reflectivity_range must satisfy 0 < lo <= hi")

    @property
    def n_scenes(self) -> int:
        return self.n_silhouettes * self.depth_steps * self.lateral_steps * 2


def desk_recipe(seed: int = 0) -> DatasetRecipe:
    """2000 pairs at 32x32 / 2000 bins; minutes on a laptop."""
    return DatasetRecipe(sim=desk_sim(seed), n_silhouettes=5)


def paper_recipe(seed: int = 0) -> DatasetRecipe:
    """Full-size run: 10 silhouettes x 400 poses = 4000 pairs at 64x64 / 8000 bins."""
    return DatasetRecipe(sim=paper_sim(seed))


def make_background(kind: str) -> scene.Background:
    if kind == "uniform":
        return scene.uniform_background()
    return scene.default_background()


def build_scenes(recipe: DatasetRecipe) -> list:
    """Silhouettes + augmentation + per-scene reflectivity assignment."""
    sils = scene.generate_silhouettes(recipe.n_silhouettes, recipe.sim.seed)
    background = make_background(recipe.background)
    scenes = scene.augment(sils, background, recipe.sim,
                           depth_steps=recipe.depth_steps,
                           lateral_steps=recipe.lateral_steps,
                           reflectivity=recipe.reflectivity)
    if recipe.reflectivity_range is not None:
        lo, hi = recipe.reflectivity_range
        for index, sc in enumerate(scenes):
            # per-scene stream so results do not depend on generation order
            rng = np.random.default_rng(recipe.sim.seed + index)
            r = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            for p in sc.placements:
                p.reflectivity = r
    return scenes


@dataclass
class RawDataset:
    """Noiseless, IRF-free expected-count histograms plus normalized images."""

    counts: np.ndarray        # (n, bins) float64 expected photon counts
    images: np.ndarray        # (n, img_w * img_h) float64 in [0, 1]
    recipe: DatasetRecipe

    def __len__(self) -> int:
        return self.counts.shape[0]


def simulate_raw(recipe: DatasetRecipe) -> RawDataset:
    cfg = recipe.sim
    scenes = build_scenes(recipe)
    counts = np.zeros((len(scenes), cfg.bins), dtype=np.float64)
    images = np.zeros((len(scenes), cfg.img_w * cfg.img_h), dtype=np.float64)
    for index, sc in enumerate(scenes):
        try:
            img = scene.render(sc, cfg)
            counts[index] = forward.simulate_histogram(img, cfg).counts
            images[index] = scene.normalize_image(img, cfg.z_max)
        except ValueError as exc:
            raise type(exc)(f"scene {index}: {exc}") from exc
    return RawDataset(counts=counts, images=images, recipe=recipe)


def finalize(raw: RawDataset, irf_dt_s: float | None = None,
             noise_level: int | None = None) -> store.Dataset:
    """Apply IRF + noise, normalize to [0, 1], pack as a storable dataset."""
    cfg = raw.recipe.sim
    dt = cfg.irf_dt_s if irf_dt_s is None else irf_dt_s
    level = cfg.noise_level if noise_level is None else noise_level
    spec = forward.NoiseSpec.from_level(level)
    n = len(raw)
    out = np.zeros_like(raw.counts)
    for index in range(n):
        h = forward.Histogram(cfg.bin_width_s, raw.counts[index])
        if dt > 0:
            h = forward.convolve_irf(h, dt)
        if level > 0:
            h = forward.add_noise(h, spec, seed=cfg.seed + index)
        out[index] = forward.normalize_histogram(h)
    return store.Dataset(histograms=out, images=raw.images,
                         img_w=cfg.img_w, img_h=cfg.img_h)


def generate_dataset(recipe: DatasetRecipe) -> store.Dataset:
    return finalize(simulate_raw(recipe))


def split_dataset(ds: store.Dataset, n_test: int, seed: int):
    """Seeded shuffle, then (train, test) split with n_test held-out pairs."""
    n = len(ds)
    if not 0 < n_test < n:
        raise ValueError(f"need 0 < n_test < {n}")
    perm = np.random.default_rng(seed).permutation(n)
    test, train = perm[:n_test], perm[n_test:]
    x = np.asarray(ds.histograms, dtype=np.float64)
    y = np.asarray(ds.images, dtype=np.float64)
    return (x[train], y[train]), (x[test], y[test])


def train_model(pairs, train_cfg: mlp.TrainConfig) -> tuple:
    return mlp.train(pairs, train_cfg)


def evaluate_model(model: mlp.MlpModel, x: np.ndarray, y: np.ndarray,
                   img_w: int, img_h: int) -> tuple[np.ndarray, float]:
    """Mean SSIM per test pair (prediction vs truth) and the overall mean."""
    outputs = mlp.forward(model, np.asarray(x, dtype=model.dtype))
    preds = np.clip(outputs, 0.0, 1.0).astype(np.float64)
    pairs = [(preds[i].reshape(img_h, img_w), np.asarray(y[i], dtype=np.float64).reshape(img_h, img_w))
             for i in range(preds.shape[0])]
    return metrics.batch_ssim(pairs)


@dataclass
class SweepPoint:
    label: str
    mean_ssim: float | None
    error: str | None = None


def _train_and_score(train_pairs, test_pairs, train_cfg, img_w, img_h) -> float:
    model, _ = mlp.train(train_pairs, train_cfg)
    _, overall = evaluate_model(model, test_pairs[0], test_pairs[1], img_w, img_h)
    return overall


def sweep_irf(raw: RawDataset, train_cfg: mlp.TrainConfig, n_test: int,
              dts=IRF_SWEEP_S) -> list:
    """Retrain once per IRF width on re-blurred histograms; score test SSIM."""
    cfg = raw.recipe.sim
    points = []
    for dt in dts:
        label = f"{dt * 1e12:g}ps"
        try:
            ds = finalize(raw, irf_dt_s=dt)
            train_pairs, test_pairs = split_dataset(ds, n_test, cfg.seed)
            score = _train_and_score(train_pairs, test_pairs, train_cfg,
                                     cfg.img_w, cfg.img_h)
            points.append(SweepPoint(label, score))
        except Exception as exc:  # record and continue with the other points
            points.append(SweepPoint(label, None, error=str(exc)))
    return points


def sweep_noise(raw: RawDataset, train_cfg: mlp.TrainConfig, n_test: int,
                levels=(0, 1, 2, 3)) -> list:
    """Fixed training on clean data; noise is applied to the test inputs."""
    cfg = raw.recipe.sim
    ds = finalize(raw, noise_level=0)
    train_pairs, _ = split_dataset(ds, n_test, cfg.seed)
    model, _ = mlp.train(train_pairs, train_cfg)

    perm = np.random.default_rng(cfg.seed).permutation(len(ds))
    test_idx = perm[:n_test]
    points = []
    for level in levels:
        label = f"level{level}"
        try:
            spec = forward.NoiseSpec.from_level(level)
            x_test = np.zeros((n_test, cfg.bins))
            for j, index in enumerate(test_idx):
                h = forward.Histogram(cfg.bin_width_s, raw.counts[index])
                if cfg.irf_dt_s > 0:
                    h = forward.convolve_irf(h, cfg.irf_dt_s)
                h = forward.add_noise(h, spec, seed=cfg.seed + 7919 + int(index))
                x_test[j] = forward.normalize_histogram(h)
            # quantize like stored datasets so level 0 matches clean evaluation
            x_test = x_test.astype(np.float32).astype(np.float64)
            y_test = raw.images[test_idx].astype(np.float32).astype(np.float64)
            _, overall = evaluate_model(model, x_test, y_test, cfg.img_w, cfg.img_h)
            points.append(SweepPoint(label, overall))
        except Exception as exc:
            points.append(SweepPoint(label, None, error=str(exc)))
    return points


def sweep_dataset_size(raw: RawDataset, train_cfg: mlp.TrainConfig, n_test: int,
                       sizes=DATASET_SIZE_SWEEP) -> list:
    """Retrain on nested subsets of the training pool; shared test set."""
    cfg = raw.recipe.sim
    ds = finalize(raw)
    train_pairs, test_pairs = split_dataset(ds, n_test, cfg.seed)
    points = []
    for size in sizes:
        label = str(size)
        try:
            if size > train_pairs[0].shape[0]:
                raise ValueError(
                    f"requested {size} training pairs, pool has {train_pairs[0].shape[0]}")
            subset = (train_pairs[0][:size], train_pairs[1][:size])
            score = _train_and_score(subset, test_pairs, train_cfg, cfg.img_w, cfg.img_h)
            points.append(SweepPoint(label, score))
        except Exception as exc:
            points.append(SweepPoint(label, None, error=str(exc)))
    return points


def sweep_reflectivity(recipe: DatasetRecipe, train_cfg: mlp.TrainConfig, n_test: int,
                       ratios=REFLECTIVITY_SWEEP, training: str = "fixed") -> list:
    """Train at R=1 (fixed) or R in [0.25, 4] (varied); test at each ratio.

    Test scenes are identical across ratios; only the silhouette reflectivity
    changes, which rescales its histogram contribution relative to the
    background.
    """
    if training not in ("fixed", "varied"):
        raise ValueError("training must be 'fixed' or 'varied'")
    cfg = recipe.sim
    train_recipe = recipe if training == "fixed" else replace(
        recipe, reflectivity_range=REFLECTIVITY_TRAIN_RANGE)
    ds = finalize(simulate_raw(train_recipe))
    train_pairs, _ = split_dataset(ds, n_test, cfg.seed)
    model, _ = mlp.train(train_pairs, train_cfg)

    perm = np.random.default_rng(cfg.seed).permutation(recipe.n_scenes)
    test_idx = set(perm[:n_test].tolist())
    points = []
    for ratio in ratios:
        label = f"R{ratio:g}"
        try:
            test_recipe = replace(recipe, reflectivity=float(ratio),
                                  reflectivity_range=None)
            raw_r = simulate_raw(test_recipe)
            ds_r = finalize(raw_r)
            idx = sorted(test_idx)
            _, overall = evaluate_model(model, np.asarray(ds_r.histograms[idx], dtype=np.float64),
                                        np.asarray(ds_r.images[idx], dtype=np.float64),
                                        cfg.img_w, cfg.img_h)
            points.append(SweepPoint(label, overall))
        except Exception as exc:
            points.append(SweepPoint(label, None, error=str(exc)))
    return points
