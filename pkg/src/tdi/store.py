"""Bit-exact persistence for datasets and models, plus graymap/CSV export.

Dataset file ("TDID"): 24-byte header
    magic 4s | version u32 | bins u32 | img_w u32 | img_h u32 | n_records u32
followed by n_records records, each `bins` float32 histogram values then
img_w*img_h float32 normalized image values. Everything little-endian.

Model file ("TDIM"): magic 4s | version u32 | n_dims u32 | n_dims * u32 dims,
then per layer: weights row-major float32, biases float32.

Writes go through a temp file + atomic rename, so readers never observe a
partially written file.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .mlp import MlpModel

DATASET_MAGIC = b"TDID"
MODEL_MAGIC = b"TDIM"
FORMAT_VERSION = 1

_F4 = np.dtype("<f4")


class StoreError(Exception):
    """Base class for persistence failures."""


class BadMagicError(StoreError):
    pass


class TruncatedFileError(StoreError):
    pass


class VersionError(StoreError):
    pass


class HeaderMismatchError(StoreError):
    """Declared header sizes disagree with the payload."""


@dataclass
class Dataset:
    histograms: np.ndarray   # (n, bins) float32
    images: np.ndarray       # (n, img_w * img_h) float32, values in [0, 1]
    img_w: int
    img_h: int

    def __post_init__(self):
        self.histograms = np.ascontiguousarray(self.histograms, dtype=_F4)
        self.images = np.ascontiguousarray(self.images, dtype=_F4)
        if self.histograms.ndim != 2 or self.images.ndim != 2:
            raise ValueError("histograms and images must be 2-D arrays")
        if self.histograms.shape[0] != self.images.shape[0]:
            raise ValueError("histogram and image record counts differ")
        if self.images.shape[1] != self.img_w * self.img_h:
            raise ValueError("image vector length does not match img_w * img_h")
        if not np.isfinite(self.histograms).all() or not np.isfinite(self.images).all():
            raise ValueError("stored values must be finite")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("images must be normalized to [0, 1]")

    def __len__(self) -> int:
        return self.histograms.shape[0]

    @property
    def bins(self) -> int:
        return self.histograms.shape[1]


def _atomic_write(path, payload: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise StoreError(f"cannot write {path}: {exc}") from exc
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"{path}: truncated while reading {what}")
    return data


def write_dataset(path, dataset: Dataset) -> None:
    header = struct.pack("<4sIIIII", DATASET_MAGIC, FORMAT_VERSION,
                         dataset.bins, dataset.img_w, dataset.img_h, len(dataset))
    records = np.hstack([dataset.histograms, dataset.images])
    _atomic_write(path, header + records.astype(_F4).tobytes())


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        head = _read_exact(fh, 24, path, "header")
        magic, version, bins, img_w, img_h, n = struct.unpack("<4sIIIII", head)
        if magic != DATASET_MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}, expected {DATASET_MAGIC!r}")
        if version != FORMAT_VERSION:
            raise VersionError(f"{path}: format version {version}, reader supports {FORMAT_VERSION}")
        record_len = bins + img_w * img_h
        payload = fh.read()
    expected = n * record_len * 4
    if len(payload) < expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} payload bytes for {n} records, got {len(payload)}")
    if len(payload) > expected:
        raise HeaderMismatchError(
            f"{path}: {len(payload) - expected} trailing bytes beyond the declared {n} records")
    flat = np.frombuffer(payload, dtype=_F4).reshape(n, record_len) if n else \
        np.zeros((0, record_len), dtype=_F4)
    return Dataset(histograms=flat[:, :bins].copy(), images=flat[:, bins:].copy(),
                   img_w=img_w, img_h=img_h)


def write_model(path, model) -> None:
    dims = model.layer_dims
    parts = [struct.pack("<4sII", MODEL_MAGIC, FORMAT_VERSION, len(dims)),
             struct.pack(f"<{len(dims)}I", *dims)]
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype=_F4).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=_F4).tobytes())
    _atomic_write(path, b"".join(parts))


def read_model(path):
    with open(path, "rb") as fh:
        magic, version, n_dims = struct.unpack("<4sII", _read_exact(fh, 12, path, "header"))
        if magic != MODEL_MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
        if version != FORMAT_VERSION:
            raise VersionError(f"{path}: format version {version}, reader supports {FORMAT_VERSION}")
        if n_dims < 2:
            raise HeaderMismatchError(f"{path}: model needs at least 2 layer dims, got {n_dims}")
        dims = struct.unpack(f"<{n_dims}I", _read_exact(fh, 4 * n_dims, path, "layer dims"))
        payload = fh.read()
    expected = sum(4 * (dout * din + dout) for din, dout in zip(dims[:-1], dims[1:]))
    if len(payload) < expected:
        raise TruncatedFileError(f"{path}: expected {expected} parameter bytes, got {len(payload)}")
    if len(payload) > expected:
        raise HeaderMismatchError(f"{path}: {len(payload) - expected} trailing parameter bytes")
    weights, biases = [], []
    offset = 0
    buf = np.frombuffer(payload, dtype=_F4)
    for din, dout in zip(dims[:-1], dims[1:]):
        weights.append(buf[offset: offset + dout * din].reshape(dout, din).copy())
        offset += dout * din
        biases.append(buf[offset: offset + dout].copy())
        offset += dout
    return MlpModel(weights, biases)


# ---------------------------------------------------------------------------
# Portable graymaps (binary P5) and CSV


def export_depth_pgm(img: np.ndarray, path) -> None:
    """Write a normalized [0, 1] image as a 16-bit binary graymap."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D normalized image")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image must be normalized to [0, 1]")
    values = np.round(arr * 65535.0).astype(">u2")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode("ascii")
    _atomic_write(path, header + values.tobytes())


def export_ssim_pgm(ssim_map: np.ndarray, path) -> None:
    """Write an SSIM map ([-1, 1]) as an 8-bit graymap (affine to 0..255)."""
    arr = np.asarray(ssim_map, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D SSIM map")
    values = np.round(np.clip((arr + 1.0) / 2.0, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    _atomic_write(path, header + values.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 graymap into a uint8 or uint16 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos: pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos: pos + 1] == b"#":
            while pos < len(data) and data[pos: pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos: pos + 1].isspace():
            pos += 1
        if start == pos:
            raise StoreError(f"{path}: malformed graymap header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    if tokens[0] != b"P5":
        raise BadMagicError(f"{path}: not a binary graymap (magic {tokens[0]!r})")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    n_bytes = width * height * dtype.itemsize
    raster = data[pos: pos + n_bytes]
    if len(raster) != n_bytes:
        raise TruncatedFileError(f"{path}: raster has {len(raster)} bytes, expected {n_bytes}")
    return np.frombuffer(raster, dtype=dtype).reshape(height, width).copy()


def load_silhouette_mask(path) -> np.ndarray:
    """Binarize an 8-bit graymap at 128 (>= 128 means figure)."""
    raw = read_pgm(path)
    return np.asarray(raw, dtype=np.uint16) >= 128


def write_csv(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def export_ssim_csv(ssim_map: np.ndarray, path) -> None:
    """Write an SSIM map as CSV, one image row per line."""
    arr = np.asarray(ssim_map, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D SSIM map")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
