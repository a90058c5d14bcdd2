"""Fully-connected inverse model: histogram vector -> depth image vector.

Plain numpy multilayer perceptron with tanh hidden activations, a linear
output layer, mean-squared-error loss, and Adam. Parameters default to
float32 (the storage precision); gradient checking uses float64 models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .forward import Histogram, normalize_histogram
from .scene import DepthImage

DEFAULT_HIDDEN = (1024, 512, 256)


class TrainingDivergedError(RuntimeError):
    """A nonfinite gradient or parameter was encountered during training."""


@dataclass
class MlpModel:
    weights: list       # one (fan_out, fan_in) matrix per layer
    biases: list        # one (fan_out,) vector per layer

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError("weight/bias shapes disagree")
        for wa, wb in zip(self.weights, self.weights[1:]):
            if wb.shape[1] != wa.shape[0]:
                raise ValueError("adjacent layer dimensions disagree")

    @property
    def layer_dims(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 200
    validation_fraction: float = 0.07
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    deterministic_mode: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")


@dataclass
class TrainHistory:
    train_loss: np.ndarray     # one entry per epoch
    val_loss: np.ndarray


@dataclass
class AdamState:
    m: list
    v: list

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "AdamState":
        return cls(m=[np.zeros_like(w) for w in model.weights + model.biases],
                   v=[np.zeros_like(w) for w in model.weights + model.biases])


def init_model(layer_dims, seed: int, dtype=np.float32) -> MlpModel:
    """Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases."""
    dims = list(layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError("layer_dims needs at least 2 entries, all >= 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        weights.append(w.astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return MlpModel(weights, biases)


def default_model(n_bins: int, n_pixels: int, seed: int = 0) -> MlpModel:
    return init_model([n_bins, *DEFAULT_HIDDEN, n_pixels], seed)


def _activations(model: MlpModel, x: np.ndarray) -> list:
    """Layer activations for a batch (rows = samples); tanh except the last."""
    acts = [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return acts


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Network output for a single vector or a batch of row vectors."""
    x = np.asarray(x)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.layer_dims[0]:
        raise ValueError(f"input length {x.shape[1]} != input layer {model.layer_dims[0]}")
    out = _activations(model, x.astype(model.dtype, copy=False))[-1]
    return out[0] if single else out


def mse_loss(y: np.ndarray, s: np.ndarray) -> float:
    """Mean over all entries of (y - s)^2; for a batch, mean over the batch."""
    y = np.asarray(y)
    s = np.asarray(s)
    if y.shape != s.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {s.shape}")
    diff = (y - s).astype(np.float64, copy=False)
    return float(np.mean(diff * diff))


def _loss_and_grads(model: MlpModel, x: np.ndarray, s: np.ndarray):
    acts = _activations(model, x)
    diff = (acts[-1] - s).astype(np.float64, copy=False)
    loss = float(np.mean(diff * diff))
    n = x.shape[0] * s.shape[1]
    delta = (2.0 / n) * (acts[-1] - s)           # d loss / d output
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (1.0 - acts[i] * acts[i])  # tanh'
    return loss, grads_w + grads_b


def gradients(model: MlpModel, batch_x: np.ndarray, batch_s: np.ndarray) -> list:
    """Exact gradients of the mean batch MSE for every weight and bias.

    Returned in the same order AdamState stores moments: all weight
    matrices, then all bias vectors.
    """
    x = np.atleast_2d(np.asarray(batch_x, dtype=model.dtype))
    s = np.atleast_2d(np.asarray(batch_s, dtype=model.dtype))
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    if x.shape[1] != model.layer_dims[0] or s.shape[1] != model.layer_dims[-1]:
        raise ValueError("batch shapes disagree with the model")
    if x.shape[0] != s.shape[0]:
        raise ValueError("inputs and targets have different batch sizes")
    return _loss_and_grads(model, x, s)[1]


def adam_step(model: MlpModel, grads: list, state: AdamState, t: int,
              config: TrainConfig) -> tuple[MlpModel, AdamState]:
    """One bias-corrected Adam update, in place; t counts from 1."""
    if t < 1:
        raise ValueError("step index t starts at 1")
    params = model.weights + model.biases
    if len(grads) != len(params):
        raise ValueError("gradient list does not match parameter list")
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not np.isfinite(g).all():
            raise TrainingDivergedError(
                f"nonfinite gradient for parameter of shape {p.shape} at step {t}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= config.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + config.eps)
    return model, state


def train(dataset, config: TrainConfig, model: MlpModel | None = None,
          hidden_dims=DEFAULT_HIDDEN) -> tuple[MlpModel, TrainHistory]:
    """Train on (X, Y) pairs of normalized vectors; returns model + history.

    The shuffled tail (validation_fraction of the data) is held out once,
    before the first epoch, and scored after every epoch; the rest is
    reshuffled each epoch with the seeded generator. Runs
    epochs * ceil(n_train / batch_size) Adam steps.
    """
    x, y = dataset
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("dataset must be two nonempty aligned 2-D arrays")
    if x.shape[0] < config.batch_size:
        raise ValueError(f"dataset of {x.shape[0]} pairs is smaller than one batch")
    for name, arr in (("inputs", x), ("targets", y)):
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"{name} must be normalized to [0, 1]")

    if model is None:
        model = init_model([x.shape[1], *hidden_dims, y.shape[1]], config.seed)
    x = x.astype(model.dtype, copy=False)
    y = y.astype(model.dtype, copy=False)

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(x.shape[0])
    n_val = int(round(config.validation_fraction * x.shape[0]))
    n_val = min(n_val, x.shape[0] - 1)
    val_idx = perm[x.shape[0] - n_val:]
    train_idx = perm[: x.shape[0] - n_val]

    state = AdamState.zeros_like(model)
    train_hist = np.zeros(config.epochs)
    val_hist = np.full(config.epochs, np.nan)
    t = 0
    for epoch in range(config.epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        seen = 0.0
        for start in range(0, order.size, config.batch_size):
            batch = order[start: start + config.batch_size]
            loss, grads = _loss_and_grads(model, x[batch], y[batch])
            t += 1
            adam_step(model, grads, state, t, config)
            seen += loss * batch.size
        train_hist[epoch] = seen / order.size
        if n_val:
            val_hist[epoch] = mse_loss(forward(model, x[val_idx]), y[val_idx])
    return model, TrainHistory(train_loss=train_hist, val_loss=val_hist)


def predict(model: MlpModel, h: Histogram, cfg: SimConfig) -> DepthImage:
    """Reconstruct a depth image from one histogram.

    normalize -> forward -> clip to [0, 1] -> reshape row-major to
    (img_h, img_w) -> rescale by z_max. Reflectance is not predicted and is
    reported as 1 everywhere.
    """
    if h.bins != model.layer_dims[0]:
        raise ValueError(f"histogram has {h.bins} bins, model expects {model.layer_dims[0]}")
    n_out = model.layer_dims[-1]
    if n_out != cfg.img_w * cfg.img_h:
        raise ValueError(
            f"model outputs {n_out} pixels, config expects {cfg.img_w * cfg.img_h}")
    out = forward(model, normalize_histogram(h).astype(model.dtype))
    grid = np.clip(out, 0.0, 1.0).reshape(cfg.img_h, cfg.img_w).astype(np.float64)
    return DepthImage(depth_m=grid * cfg.z_max,
                      reflectance=np.ones_like(grid))
