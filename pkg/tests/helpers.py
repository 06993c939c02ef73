import numpy as np

from regionlab.models.network import BatchNormRecord, DenseLayer, NetworkModel
from regionlab.models.regions import HalfspaceSystem


def random_network(widths=(8, 8), input_dim=2, class_count=2, seed=0, batchnorm=False):
    rng = np.random.default_rng(seed)
    sizes = [input_dim, *widths, class_count]
    layers = []
    for j in range(len(sizes) - 1):
        fan_in, width = sizes[j], sizes[j + 1]
        weight = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(width, fan_in))
        bias = rng.normal(0.0, 0.1, size=width)
        bn = None
        if batchnorm and j < len(sizes) - 2:
            bn = BatchNormRecord(
                rng.uniform(0.5, 1.5, width),
                rng.normal(0.0, 0.1, width),
                rng.normal(0.0, 0.1, width),
                rng.uniform(0.5, 2.0, width),
            )
        layers.append(DenseLayer(weight, bias, bn))
    return NetworkModel(layers, input_dim, class_count)


def affine_model(J, c):
    J = np.atleast_2d(np.asarray(J, dtype=np.float64))
    return NetworkModel([DenseLayer(J, c)], J.shape[1], J.shape[0])


def box_system(W, b, dim=2, lo=-1.0, hi=1.0):
    W = np.asarray(W, dtype=np.float64).reshape(-1, dim)
    provenance = np.stack([np.zeros(W.shape[0]), np.arange(W.shape[0])], axis=1)
    return HalfspaceSystem(W, b, np.full(dim, lo), np.full(dim, hi), provenance)


def random_system(count, dim=2, seed=0):
    # every constraint holds at the origin with a positive margin
    rng = np.random.default_rng(seed)
    return box_system(rng.normal(size=(count, dim)), rng.uniform(0.1, 1.0, count), dim)


def pixel_grid(n, lo=-1.0, hi=1.0):
    centers = lo + (np.arange(n) + 0.5) * (hi - lo) / n
    xs, ys = np.meshgrid(centers, centers)
    return np.stack([xs.ravel(), ys.ravel()], axis=1)
