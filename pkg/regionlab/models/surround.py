from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from regionlab.models.errors import NullSpaceError, NumericError
from regionlab.models.network import NetworkModel, RegionAffineMap, forward, region_affine_map
from regionlab.models.regions import extract_region
from regionlab.models.utils import cosine, top_two


@dataclass(frozen=True)
class DecisionDirection:
    g: np.ndarray
    k1: int
    k2: int


@dataclass
class SurroundProbe:
    """Regions met along x* + beta * e for beta in [0, epsilon].

    crossings holds (beta, pattern hash) for every pattern change, segments the
    (start, end, hash) pieces of the ray, first one being x*'s own region.
    """

    direction: np.ndarray
    epsilon: float
    crossings: List[Tuple[float, int]] = field(default_factory=list)
    segments: List[Tuple[float, float, int]] = field(default_factory=list)
    relevance: List[float] = field(default_factory=list)

    @property
    def unique_region_count(self) -> int:
        return len({segment[2] for segment in self.segments})

    def probe_points(self, x_star) -> List[np.ndarray]:
        """Midpoint of every surrounding segment"""
        x_star = np.asarray(x_star, dtype=np.float64)
        return [x_star + 0.5 * (start + end) * self.direction for start, end, _ in self.segments[1:]]


def decision_direction(affine: RegionAffineMap, logits) -> DecisionDirection:
    k1, k2 = top_two(logits)
    return DecisionDirection(affine.J[k1] - affine.J[k2], k1, k2)


def _orthonormal_basis(rows, drop_tol):
    # modified Gram-Schmidt, rows whose residual falls under drop_tol are dropped
    basis = []
    for row in rows:
        v = np.array(row, dtype=np.float64)
        scale = max(1.0, np.linalg.norm(v))
        for q in basis:
            v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > drop_tol * scale:
            basis.append(v / norm)
    return basis


def null_space_directions(affine: RegionAffineMap, count: int, seed=0, drop_tol=1e-10, tries=100) -> List[np.ndarray]:
    """Unit vectors e with J e = 0, sampled uniformly from the null space.

    When the logit gradients span the whole input space (d <= M, e.g. 2D toy
    data with two classes) the directions are taken orthogonal to the gradient
    differences J[k] - J[0] instead, which still leaves every logit gap unchanged.
    """
    J = affine.J
    d = J.shape[1]
    basis = _orthonormal_basis(J, drop_tol)
    if len(basis) >= d:
        basis = _orthonormal_basis(J[1:] - J[0], drop_tol)
    if len(basis) >= d:
        raise NullSpaceError(f"logit gradient differences span the whole input space (d={d})")
    Q = np.array(basis).reshape(-1, d)
    rng = np.random.default_rng(seed)
    directions = []
    for _ in range(count):
        for _ in range(tries):
            e = rng.standard_normal(d)
            e -= Q.T @ (Q @ e)
            e -= Q.T @ (Q @ e)
            norm = np.linalg.norm(e)
            if norm > drop_tol:
                directions.append(e / norm)
                break
        else:
            raise NullSpaceError(f"null-space sample collapsed {tries} times in a row")
    return directions


def walk_ray(model: NetworkModel, x_star, e, eps, nudge=None, max_steps=100000) -> SurroundProbe:
    """Exact walk along x* + beta * e, crossing one facet at a time.

    The first facet hit is found from the current region's slacks, the walk
    steps nudge past it and re-extracts the region. Input bounds are ignored.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    nudge = 1e-7 * max(1.0, np.linalg.norm(x_star)) if nudge is None else nudge
    probe = SurroundProbe(e, float(eps))
    beta, start = 0.0, 0.0
    system = extract_region(model, x_star)
    current = system.pattern.digest()
    for _ in range(max_steps):
        x = x_star + beta * e
        rates = system.W @ e
        slacks = system.W @ x + system.b
        falling = rates < 0.0
        hits = np.maximum(-slacks[falling] / rates[falling], 0.0) if falling.any() else np.zeros(0)
        if not np.all(np.isfinite(hits)):
            raise NumericError("non-finite crossing along the ray")
        crossing = beta + hits.min() if hits.size else np.inf
        if crossing > eps:
            probe.segments.append((start, float(eps), current))
            return probe
        beta = crossing + nudge
        system = extract_region(model, x_star + beta * e)
        digest = system.pattern.digest()
        if digest != current:
            probe.segments.append((start, float(crossing), current))
            probe.crossings.append((float(crossing), digest))
            start, current = float(crossing), digest
    raise NumericError(f"ray walk did not leave the epsilon ball after {max_steps} steps")


def relevance(model: NetworkModel, x_star, probe_points) -> List[float]:
    """Cosine between the top-two decision direction at each probe point and at x*.
    NaN when one of the directions vanishes."""
    base = forward(model, x_star)
    base_direction = decision_direction(region_affine_map(model, x_star), base.logits)
    values = []
    for point in probe_points:
        result = forward(model, point)
        k1, k2 = top_two(result.logits)
        if result.pattern == base.pattern and (k1, k2) == (base_direction.k1, base_direction.k2):
            values.append(1.0 if np.any(base_direction.g) else float("nan"))
            continue
        direction = decision_direction(region_affine_map(model, point), result.logits)
        values.append(cosine(direction.g, base_direction.g))
    return values


def surround_probe(model: NetworkModel, x_star, directions=100, eps=0.2, seed=0, nudge=None) -> List[SurroundProbe]:
    """Walk `directions` null-space rays and score every surrounding region"""
    x_star = np.asarray(x_star, dtype=np.float64)
    affine = region_affine_map(model, x_star)
    probes = []
    for e in null_space_directions(affine, directions, seed):
        probe = walk_ray(model, x_star, e, eps, nudge)
        probe.relevance = relevance(model, x_star, probe.probe_points(x_star))
        probes.append(probe)
    return probes
