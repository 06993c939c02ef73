from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from regionlab.models.errors import InfeasibleRegionError, NumericError
from regionlab.models.network import NetworkModel, RegionAffineMap, region_affine_map
from regionlab.models.polytope import LinearProgram, LpStatus, make_solver
from regionlab.models.regions import HalfspaceSystem, extract_region
from regionlab.models.utils import log_softmax, softmax

STEP_RULES = ("open_loop", "line_search")


@dataclass(frozen=True)
class ClassProbe:
    target_class: int
    x_t: np.ndarray
    log_prob: float
    realized: bool
    distortion: float
    gap: float
    iterations: int


@dataclass(frozen=True)
class RegionSummary:
    class_region_count: int
    distortion: float


def _objective(affine: RegionAffineMap, x, t):
    logits = affine(x)
    value = log_softmax(logits)[t]
    if not np.isfinite(value):
        raise NumericError("non-finite class probe objective")
    weights = -softmax(logits)
    weights[t] += 1.0
    return value, affine.J.T @ weights, logits


def _line_search(affine, x, direction, t, iters=50):
    # the objective is concave, so its directional derivative decreases along the segment
    def slope(gamma):
        return _objective(affine, x + gamma * direction, t)[1] @ direction

    if slope(1.0) >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def class_probe(
    system: HalfspaceSystem,
    affine: RegionAffineMap,
    x_star,
    t: int,
    tol: float = 1e-6,
    max_iters: int = 500,
    step_rule: str = "open_loop",
) -> ClassProbe:
    """Frank-Wolfe maximization of log p_t(x) over the region and its box.

    Every iteration maximizes the linearized objective with one LP; the solver
    keeps its basis between iterations. Stops once the duality gap is <= tol.
    """
    if step_rule not in STEP_RULES:
        raise ValueError(f"unknown step rule {step_rule}, expected one of {STEP_RULES}")
    x_star = np.asarray(x_star, dtype=np.float64)
    x = x_star.copy()
    value, grad, logits = _objective(affine, x, t)
    solver = make_solver(LinearProgram(grad, -system.W, system.b, system.box_lo, system.box_hi))
    gap, iterations = np.inf, 0
    for k in range(max_iters):
        solution = solver.solve() if k == 0 else solver.resolve(grad)
        if solution.status is not LpStatus.OPTIMAL:
            raise InfeasibleRegionError(f"class probe LP is {solution.status.value}")
        direction = solution.y - x
        gap = float(grad @ direction)
        if gap <= tol:
            break
        if step_rule == "line_search":
            gamma = _line_search(affine, x, direction, t)
        else:
            gamma = 2.0 / (k + 2.0)
        x = x + gamma * direction
        value, grad, logits = _objective(affine, x, t)
        iterations = k + 1
    return ClassProbe(
        target_class=int(t),
        x_t=x,
        log_prob=float(value),
        realized=int(np.argmax(logits)) == t,
        distortion=float(np.linalg.norm(x - x_star)),
        gap=max(float(gap), 0.0),
        iterations=iterations,
    )


def region_summary(probes: Sequence[ClassProbe], x_star=None) -> RegionSummary:
    count = sum(1 for probe in probes if probe.realized)
    distortion = max((probe.distortion for probe in probes), default=0.0)
    return RegionSummary(count, float(distortion))


def probe_region(model: NetworkModel, x_star, system=None, affine=None, **kwargs):
    """One class probe per class of the model, with their summary"""
    x_star = np.asarray(x_star, dtype=np.float64)
    system = extract_region(model, x_star) if system is None else system
    affine = region_affine_map(model, x_star) if affine is None else affine
    probes: List[ClassProbe] = [class_probe(system, affine, x_star, t, **kwargs) for t in range(model.class_count)]
    return probes, region_summary(probes, x_star)
