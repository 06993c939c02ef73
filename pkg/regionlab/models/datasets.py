import gzip
import os
import struct
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from regionlab.models.errors import DatasetMissingError, EmptyClassError, IdxFormatError

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if inputs.shape[0] != labels.shape[0]:
            raise ValueError(f"{inputs.shape[0]} inputs but {labels.shape[0]} labels")
        if not np.all(np.isfinite(inputs)):
            raise ValueError("inputs must be finite")
        if inputs.size and (inputs.min() < -1.0 or inputs.max() > 1.0):
            raise ValueError("inputs must be scaled to [-1, 1]")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def class_count(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[indices], self.labels[indices])

    def split(self, fraction: float, seed: int) -> Tuple["Dataset", "Dataset"]:
        """Seeded split into (remaining, held-out) with round(fraction * N) held out"""
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"split fraction must lie in (0, 1), got {fraction}")
        order = np.random.default_rng(seed).permutation(len(self))
        held = max(1, int(round(fraction * len(self))))
        return self.subset(np.sort(order[held:])), self.subset(np.sort(order[:held]))

    def class_inputs(self, class_id: int) -> np.ndarray:
        rows = self.inputs[self.labels == class_id]
        if rows.shape[0] == 0:
            raise EmptyClassError(f"class {class_id} has no sample")
        return rows


@dataclass(frozen=True)
class SpiralSpec:
    points_per_class: int = 500
    turns: float = 1.5
    noise_std: float = 0.01
    seed: int = 0
    min_radius: float = 0.2
    max_radius: float = 0.9

    def __post_init__(self):
        if self.points_per_class <= 0:
            raise ValueError("points_per_class must be positive")
        if self.turns <= 0 or self.noise_std < 0:
            raise ValueError("turns must be positive and noise_std nonnegative")
        if not 0 <= self.min_radius < self.max_radius <= 1:
            raise ValueError("radii must satisfy 0 <= min_radius < max_radius <= 1")


def make_spiral(spec: SpiralSpec) -> Dataset:
    """Two interleaved spirals in [-1, 1]^2, class k rotated by k * pi.
    The radius grows linearly from min_radius to max_radius, so neighbouring arms
    are (max_radius - min_radius) / (2 * turns) apart."""
    rng = np.random.default_rng(spec.seed)
    n = spec.points_per_class
    max_angle = 2.0 * np.pi * spec.turns
    angles = np.linspace(0.0, max_angle, n)
    radius = spec.min_radius + (spec.max_radius - spec.min_radius) * angles / max_angle
    inputs, labels = [], []
    for k in range(2):
        theta = angles + np.pi * k
        points = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
        points = points + rng.normal(0.0, spec.noise_std, size=points.shape)
        inputs.append(np.clip(points, -1.0, 1.0))
        labels.append(np.full(n, k, dtype=np.int64))
    return Dataset(np.concatenate(inputs), np.concatenate(labels))


def _read_idx_bytes(path) -> bytes:
    if not os.path.exists(path):
        raise DatasetMissingError(f"no such IDX file: {path}")
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _read_header(raw, magic, count, path):
    needed = 4 * count
    if len(raw) < needed:
        raise IdxFormatError(f"truncated header in {path}", len(raw))
    values = struct.unpack_from(f">{count}I", raw, 0)
    if values[0] != magic:
        raise IdxFormatError(f"bad magic 0x{values[0]:08x} in {path}, expected 0x{magic:08x}", 0)
    return values[1:]


def load_mnist(images_path, labels_path) -> Dataset:
    """Read an IDX image/label pair (optionally gzipped) and rescale pixels to [-1, 1]"""
    images = _read_idx_bytes(images_path)
    count, rows, cols = _read_header(images, MNIST_IMAGE_MAGIC, 4, images_path)
    expected = 16 + count * rows * cols
    if len(images) < expected:
        raise IdxFormatError(f"truncated image data in {images_path}", len(images))
    pixels = np.frombuffer(images, dtype=np.uint8, count=count * rows * cols, offset=16)

    labels = _read_idx_bytes(labels_path)
    (label_count,) = _read_header(labels, MNIST_LABEL_MAGIC, 2, labels_path)
    if label_count != count:
        raise IdxFormatError(f"{count} images but {label_count} labels", 4)
    if len(labels) < 8 + label_count:
        raise IdxFormatError(f"truncated label data in {labels_path}", len(labels))
    targets = np.frombuffer(labels, dtype=np.uint8, count=label_count, offset=8)

    inputs = pixels.reshape(count, rows * cols).astype(np.float64) / 127.5 - 1.0
    return Dataset(inputs, targets.astype(np.int64))


def load_mnist_dir(directory, split="train") -> Dataset:
    """Load `train` or `t10k` from a directory holding the standard MNIST file names"""
    for suffix in (".gz", ""):
        images = os.path.join(directory, f"{split}-images-idx3-ubyte{suffix}")
        labels = os.path.join(directory, f"{split}-labels-idx1-ubyte{suffix}")
        if os.path.exists(images) and os.path.exists(labels):
            return load_mnist(images, labels)
    raise DatasetMissingError(f"no MNIST {split} files in {directory}")
