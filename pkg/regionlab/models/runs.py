import json
import os

import numpy as np
from omegaconf import OmegaConf

from regionlab.models.datasets import Dataset, SpiralSpec, load_mnist_dir, make_spiral
from regionlab.models.errors import PointOutOfBoundsError

THREADS_ENV = "REGIONLAB_THREADS"


def prepare_run_dir(output_dir) -> str:
    if not os.path.exists(output_dir):
        os.makedirs(output_dir)
    return output_dir


def echo_config(cfg, output_dir) -> str:
    """Write the resolved run configuration as <output_dir>/config.json"""
    prepare_run_dir(output_dir)
    path = os.path.join(output_dir, "config.json")
    with open(path, "w") as f:
        json.dump(OmegaConf.to_container(cfg, resolve=True), f, indent=2, sort_keys=True)
    return path


def resolve_threads(value=None) -> int:
    value = os.environ.get(THREADS_ENV, value)
    if value is None or str(value).lower() == "auto":
        return os.cpu_count() or 1
    threads = int(value)
    if threads <= 0:
        raise ValueError(f"thread count must be positive, got {threads}")
    return threads


SPIRAL_KEYS = ("points_per_class", "turns", "noise_std", "min_radius", "max_radius")


def _spiral(dataset_cfg, seed) -> Dataset:
    options = {key: dataset_cfg[key] for key in SPIRAL_KEYS if key in dataset_cfg}
    return make_spiral(SpiralSpec(seed=seed, **options))


def load_datasets(cfg):
    """(train, test) datasets named by cfg.dataset"""
    dataset_cfg = cfg.dataset
    if dataset_cfg.name == "spiral":
        return _spiral(dataset_cfg, dataset_cfg.seed), _spiral(dataset_cfg, dataset_cfg.test_seed)
    if dataset_cfg.name == "mnist":
        return load_mnist_dir(dataset_cfg.path, "train"), load_mnist_dir(dataset_cfg.path, "t10k")
    raise ValueError(f"unknown dataset {dataset_cfg.name}")


def sample_points(total: int, count: int, seed: int) -> np.ndarray:
    """First `count` indices of a seeded shuffle of range(total)"""
    order = np.random.default_rng(seed).permutation(total)
    return order[: min(count, total)]


def parse_point(spec, dataset: Dataset, model):
    """A dataset index ("17") or a literal comma-separated vector ("0.1,-0.3").
    Returns (vector, index or None)."""
    text = str(spec).strip()
    if "," in text or model.input_dim == 1 and "." in text:
        x = np.array([float(value) for value in text.split(",")], dtype=np.float64)
        index = None
    else:
        index = int(text)
        if not 0 <= index < len(dataset):
            raise PointOutOfBoundsError(f"point id {index} is not in [0, {len(dataset)})")
        x = dataset.inputs[index]
    if x.shape != (model.input_dim,):
        raise PointOutOfBoundsError(f"point has {x.shape[0]} components, the model expects {model.input_dim}")
    if not model.in_bounds(x):
        raise PointOutOfBoundsError("point lies outside the network input bounds")
    return x, index
