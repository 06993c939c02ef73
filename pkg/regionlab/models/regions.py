import json
from dataclasses import dataclass

import numpy as np

from regionlab.models.network import ActivationPattern, NetworkModel, layer_affines


@dataclass(frozen=True)
class HalfspaceSystem:
    """H-representation {x : W x + b >= 0, box_lo <= x <= box_hi} of a linear region.

    Constraints are stored unnormalized, one row per hidden node in extraction order;
    provenance[i] is the (layer, node) pair that produced row i.
    """

    W: np.ndarray
    b: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    provenance: np.ndarray
    pattern: ActivationPattern = None

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        d = np.asarray(self.box_lo).reshape(-1).shape[0]
        W = W.reshape(-1, d)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "box_lo", np.asarray(self.box_lo, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "box_hi", np.asarray(self.box_hi, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "provenance", np.asarray(self.provenance, dtype=np.int64).reshape(-1, 2))
        if self.b.shape[0] != W.shape[0] or self.provenance.shape[0] != W.shape[0]:
            raise ValueError("constraint arrays disagree on the constraint count")
        if not np.all(np.isfinite(W)):
            raise ValueError("constraint normals must be finite")

    @property
    def dim(self) -> int:
        return self.box_lo.shape[0]

    @property
    def count(self) -> int:
        return self.W.shape[0]

    @property
    def inequality_count(self) -> int:
        """Node constraints plus the two box bounds of every input dimension"""
        return self.count + 2 * self.dim

    def slacks(self, x) -> np.ndarray:
        return self.W @ np.asarray(x, dtype=np.float64) + self.b

    def subset(self, indices) -> "HalfspaceSystem":
        indices = np.asarray(indices, dtype=np.int64)
        return HalfspaceSystem(
            self.W[indices], self.b[indices], self.box_lo, self.box_hi, self.provenance[indices], self.pattern
        )

    def prefix(self, layers: int) -> "HalfspaceSystem":
        """Subsystem contributed by the first `layers` hidden layers (S_l)"""
        return self.subset(np.flatnonzero(self.provenance[:, 0] < layers))

    def to_dict(self):
        return {
            "constraints": [
                {"w": w.tolist(), "b": float(b), "layer": int(layer), "node": int(node)}
                for w, b, (layer, node) in zip(self.W, self.b, self.provenance)
            ],
            "box_lo": self.box_lo.tolist(),
            "box_hi": self.box_hi.tolist(),
            "pattern": self.pattern.to_hex() if self.pattern is not None else None,
            "widths": list(self.pattern.widths) if self.pattern is not None else None,
        }

    @classmethod
    def from_dict(cls, data):
        d = len(data["box_lo"])
        constraints = data["constraints"]
        W = np.array([c["w"] for c in constraints], dtype=np.float64).reshape(-1, d)
        b = np.array([c["b"] for c in constraints], dtype=np.float64)
        provenance = np.array([(c["layer"], c["node"]) for c in constraints], dtype=np.int64).reshape(-1, 2)
        pattern = None
        if data.get("pattern") is not None:
            pattern = ActivationPattern.from_hex(data["pattern"], data["widths"])
        return cls(W, b, data["box_lo"], data["box_hi"], provenance, pattern)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def extract_region(model: NetworkModel, x_star) -> HalfspaceSystem:
    """Halfspace system of the linear region containing x_star.

    Each hidden node contributes sgn * (grad h(x*), h(x*) - grad h(x*).x*), with
    sgn = +1 when the pre-activation is >= 0; dead nodes keep their vacuous row.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    affines, result = layer_affines(model, x_star)
    rows, offsets, provenance = [], [], []
    for layer, (A, _) in enumerate(affines):
        h = result.preacts[layer]
        sgn = np.where(h >= 0, 1.0, -1.0)
        rows.append(sgn[:, None] * A)
        offsets.append(sgn * (h - A @ x_star))
        provenance.append(np.stack([np.full(h.shape[0], layer), np.arange(h.shape[0])], axis=1))
    if rows:
        W, b, prov = np.concatenate(rows), np.concatenate(offsets), np.concatenate(provenance)
    else:
        W, b, prov = np.zeros((0, model.input_dim)), np.zeros(0), np.zeros((0, 2), dtype=np.int64)
    return HalfspaceSystem(W, b, model.box_lo, model.box_hi, prov, result.pattern)


def contains(system: HalfspaceSystem, x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < system.box_lo - tol) or np.any(x > system.box_hi + tol):
        return False
    return bool(np.all(system.slacks(x) >= -tol))


def contains_batch(system: HalfspaceSystem, points, tol: float = 1e-9) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    inside = np.all(points >= system.box_lo - tol, axis=1) & np.all(points <= system.box_hi + tol, axis=1)
    if system.count:
        inside &= np.all(points @ system.W.T + system.b >= -tol, axis=1)
    return inside
