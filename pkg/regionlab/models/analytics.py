from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from regionlab.models.datasets import Dataset
from regionlab.models.network import NetworkModel, forward, predict_classes, region_affine_map
from regionlab.models.regions import HalfspaceSystem, extract_region
from regionlab.models.utils import log_softmax, softmax


@dataclass(frozen=True)
class AngleMatrix:
    """Pairwise angles in degrees between constraint normals.
    Rows and columns of dead constraints (w = 0) are NaN and listed in dead_indices."""

    degrees: np.ndarray
    index_layout: np.ndarray
    dead_indices: Tuple[int, ...]

    @property
    def size(self) -> int:
        return self.degrees.shape[0]


def angle_matrix(system: HalfspaceSystem) -> AngleMatrix:
    norms = np.linalg.norm(system.W, axis=1)
    dead = norms == 0.0
    unit = np.zeros_like(system.W)
    unit[~dead] = system.W[~dead] / norms[~dead, None]
    cosines = np.clip(unit @ unit.T, -1.0, 1.0)
    degrees = np.degrees(np.arccos(cosines))
    degrees = 0.5 * (degrees + degrees.T)
    np.fill_diagonal(degrees, 0.0)
    degrees[dead, :] = np.nan
    degrees[:, dead] = np.nan
    return AngleMatrix(degrees, system.provenance.copy(), tuple(int(i) for i in np.flatnonzero(dead)))


def layer_angle_summary(matrix: AngleMatrix):
    """Mean and median angle of every (layer, layer) block, diagonal excluded.
    Returns a list of dicts, one per block."""
    layers = np.unique(matrix.index_layout[:, 0]) if matrix.size else np.zeros(0, dtype=np.int64)
    rows = []
    for la in layers:
        for lb in layers:
            if lb < la:
                continue
            ia = np.flatnonzero(matrix.index_layout[:, 0] == la)
            ib = np.flatnonzero(matrix.index_layout[:, 0] == lb)
            block = matrix.degrees[np.ix_(ia, ib)]
            if la == lb:
                block = block[~np.eye(len(ia), dtype=bool)]
            values = block[np.isfinite(block)].ravel()
            rows.append(
                {
                    "layer_a": int(la),
                    "layer_b": int(lb),
                    "pairs": int(values.size),
                    "mean": float(values.mean()) if values.size else float("nan"),
                    "median": float(np.median(values)) if values.size else float("nan"),
                }
            )
    return rows


@dataclass(frozen=True)
class InterpolationResult:
    alpha_star: float
    x_alpha: np.ndarray
    boundary_system: HalfspaceSystem
    crossed: bool


def interpolation_search(model: NetworkModel, x_test, x_target, resolution=10000, tol=1e-6) -> InterpolationResult:
    """Largest alpha in [0, 1] whose point alpha * x_target + (1 - alpha) * x_test
    keeps the class of x_test.

    The segment is scanned at `resolution` uniform samples, the last same-class
    sample is bracketed with its successor and the bracket is bisected down to
    tol. The kept point is always on the same-class side.
    """
    x_test = np.asarray(x_test, dtype=np.float64)
    x_target = np.asarray(x_target, dtype=np.float64)
    own = int(predict_classes(model, x_test)[0])
    if int(predict_classes(model, x_target)[0]) == own:
        return InterpolationResult(1.0, x_target.copy(), extract_region(model, x_target), False)

    alphas = np.linspace(0.0, 1.0, max(2, int(resolution)))
    points = (1.0 - alphas)[:, None] * x_test + alphas[:, None] * x_target
    same = predict_classes(model, points) == own
    last = int(np.flatnonzero(same).max())
    lo, hi = alphas[last], alphas[last + 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if int(predict_classes(model, (1.0 - mid) * x_test + mid * x_target)[0]) == own:
            lo = mid
        else:
            hi = mid
    x_alpha = (1.0 - lo) * x_test + lo * x_target
    return InterpolationResult(float(lo), x_alpha, extract_region(model, x_alpha), True)


def mean_point_target(data: Dataset, class_id: int) -> np.ndarray:
    return data.class_inputs(class_id).mean(axis=0)


def choose_decision_target(model: NetworkModel, data: Dataset, x_test, own_class) -> Optional[Tuple[int, np.ndarray]]:
    """Mean point of the nearest other class, among the classes whose mean point
    the model classifies into that same class. None when no class qualifies."""
    x_test = np.asarray(x_test, dtype=np.float64)
    best = None
    for class_id in np.unique(data.labels):
        if class_id == own_class:
            continue
        target = mean_point_target(data, int(class_id))
        if int(predict_classes(model, target)[0]) != class_id:
            continue
        distance = np.linalg.norm(target - x_test)
        if best is None or distance < best[0]:
            best = (distance, int(class_id), target)
    return None if best is None else (best[1], best[2])


@dataclass(frozen=True)
class PgdResult:
    x_adv: np.ndarray
    loss: float
    success: bool
    predicted: int


def cross_entropy_gradient(model: NetworkModel, x, label):
    """Loss -log p_label(x) and its exact gradient J^T (p - onehot) on x's region"""
    affine = region_affine_map(model, x)
    logits = affine(x)
    onehot = np.zeros_like(logits)
    onehot[label] = 1.0
    return -log_softmax(logits)[label], affine.J.T @ (softmax(logits) - onehot)


def pgd_attack(model: NetworkModel, x, label, eps=0.1, step=None, iters=40, restarts=5, seed=0) -> PgdResult:
    """L-infinity PGD ascent on the cross-entropy, best restart by final loss"""
    x = np.asarray(x, dtype=np.float64)
    label = int(label)
    if eps <= 0.0:
        logits = forward(model, x).logits
        predicted = int(np.argmax(logits))
        return PgdResult(x.copy(), float(-log_softmax(logits)[label]), predicted != label, predicted)
    step = eps / 10.0 if step is None else step
    lo = np.maximum(x - eps, model.box_lo)
    hi = np.minimum(x + eps, model.box_hi)
    rng = np.random.default_rng(seed)
    best_x, best_loss = None, -np.inf
    for _ in range(max(1, restarts)):
        x_adv = np.clip(x + rng.uniform(-eps, eps, size=x.shape), lo, hi)
        for _ in range(iters):
            _, grad = cross_entropy_gradient(model, x_adv, label)
            x_adv = np.clip(x_adv + step * np.sign(grad), lo, hi)
        loss, _ = cross_entropy_gradient(model, x_adv, label)
        if loss > best_loss:
            best_x, best_loss = x_adv, loss
    predicted = int(predict_classes(model, best_x)[0])
    return PgdResult(best_x, float(best_loss), predicted != label, predicted)
