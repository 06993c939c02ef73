import hashlib
import json
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from regionlab.models.errors import InputShapeError, NodeIndexError, NumericError


@dataclass(frozen=True)
class BatchNormRecord:
    """Inference statistics of a batch normalization placed after the pre-activations"""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        for name in ("gamma", "beta", "running_mean", "running_var"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if np.any(self.running_var + self.eps <= 0):
            raise ValueError("running_var + eps must be positive")

    def scale(self) -> np.ndarray:
        return self.gamma / np.sqrt(self.running_var + self.eps)

    def to_dict(self):
        return {
            "gamma": self.gamma.tolist(),
            "beta": self.beta.tolist(),
            "mean": self.running_mean.tolist(),
            "var": self.running_var.tolist(),
            "eps": float(self.eps),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["gamma"], data["beta"], data["mean"], data["var"], data.get("eps", 1e-5))


@dataclass(frozen=True)
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    bn: Optional[BatchNormRecord] = None
    dropout_rate: float = 0.0

    def __post_init__(self):
        weight = np.atleast_2d(np.asarray(self.weight, dtype=np.float64))
        bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if bias.shape[0] != weight.shape[0]:
            raise ValueError(f"bias has {bias.shape[0]} entries, weight has {weight.shape[0]} rows")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.bn is not None and self.bn.gamma.shape[0] != weight.shape[0]:
            raise ValueError("batch normalization width does not match the layer width")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def in_width(self) -> int:
        return self.weight.shape[1]

    @property
    def out_width(self) -> int:
        return self.weight.shape[0]

    def folded(self) -> Tuple[np.ndarray, np.ndarray]:
        """Effective (weight, bias) once the inference batch normalization is folded in"""
        if self.bn is None:
            return self.weight, self.bias
        scale = self.bn.scale()
        weight = self.weight * scale[:, None]
        bias = scale * (self.bias - self.bn.running_mean) + self.bn.beta
        return weight, bias

    def to_dict(self):
        data = {
            "weight": self.weight.tolist(),
            "bias": self.bias.tolist(),
            "dropout_rate": float(self.dropout_rate),
        }
        if self.bn is not None:
            data["bn"] = self.bn.to_dict()
        return data

    @classmethod
    def from_dict(cls, data):
        bn = BatchNormRecord.from_dict(data["bn"]) if data.get("bn") else None
        return cls(data["weight"], data["bias"], bn, data.get("dropout_rate", 0.0))


@dataclass(frozen=True, eq=False)
class ActivationPattern:
    """On/off state of every hidden node, layer-major then node index.
    Bit 1 means the pre-activation is >= 0."""

    bits: np.ndarray
    widths: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool).reshape(-1)
        widths = tuple(int(w) for w in self.widths) or (bits.shape[0],)
        if sum(widths) != bits.shape[0]:
            raise ValueError("pattern length does not match the hidden widths")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "widths", widths)

    def __len__(self):
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ActivationPattern):
            return NotImplemented
        return self.widths == other.widths and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return self.digest()

    def digest(self) -> int:
        return pattern_digest(self.bits)

    def layer_bits(self, layer: int) -> np.ndarray:
        start = sum(self.widths[:layer])
        return self.bits[start : start + self.widths[layer]]

    def activation_rate(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.bits.mean())

    def to_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, widths: Sequence[int]):
        total = int(sum(widths))
        packed = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        return cls(np.unpackbits(packed)[:total].astype(bool), tuple(widths))


def pattern_digest(bits: np.ndarray) -> int:
    """Stable 64-bit content hash of a bit sequence"""
    bits = np.asarray(bits, dtype=bool)
    payload = bits.shape[0].to_bytes(8, "little") + np.packbits(bits).tobytes()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RegionAffineMap:
    """Logits as an affine map J x + c, valid on the region of valid_pattern"""

    J: np.ndarray
    c: np.ndarray
    valid_pattern: ActivationPattern

    def __call__(self, x) -> np.ndarray:
        return self.J @ np.asarray(x, dtype=np.float64) + self.c


class ForwardResult(NamedTuple):
    logits: np.ndarray
    pattern: ActivationPattern
    preacts: List[np.ndarray]


class NetworkModel:
    """Layered affine+ReLU network, immutable once built.

    The last layer produces the logits; every other layer is a ReLU hidden layer.
    Batch normalization is folded into the effective weights at construction.
    """

    def __init__(self, layers, input_dim, class_count, input_bounds=(-1.0, 1.0)):
        self.layers = tuple(layers)
        self.input_dim = int(input_dim)
        self.class_count = int(class_count)
        if not self.layers:
            raise ValueError("a network needs at least its output layer")
        width = self.input_dim
        for index, layer in enumerate(self.layers):
            if layer.in_width != width:
                raise ValueError(f"layer {index} expects {layer.in_width} inputs, gets {width}")
            width = layer.out_width
        if width != self.class_count:
            raise ValueError(f"output width {width} differs from class_count {self.class_count}")

        lo, hi = input_bounds
        self.box_lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (self.input_dim,)).copy()
        self.box_hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (self.input_dim,)).copy()
        self.input_bounds = (lo, hi)

        self._folded = []
        for index, layer in enumerate(self.layers):
            weight, bias = (np.array(part, dtype=np.float64) for part in layer.folded())
            if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
                raise NumericError("non-finite effective parameters", layer=index)
            weight.setflags(write=False)
            bias.setflags(write=False)
            self._folded.append((weight, bias))

    @property
    def hidden_widths(self) -> Tuple[int, ...]:
        return tuple(layer.out_width for layer in self.layers[:-1])

    @property
    def hidden_count(self) -> int:
        return int(sum(self.hidden_widths))

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    def effective(self, layer: int) -> Tuple[np.ndarray, np.ndarray]:
        return self._folded[layer]

    def in_bounds(self, x, tol=0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.box_lo - tol) and np.all(x <= self.box_hi + tol))

    def to_dict(self):
        lo, hi = self.input_bounds
        return {
            "input_dim": self.input_dim,
            "class_count": self.class_count,
            "input_bounds": [np.asarray(lo).tolist(), np.asarray(hi).tolist()],
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data):
        layers = [DenseLayer.from_dict(layer) for layer in data["layers"]]
        bounds = tuple(data.get("input_bounds", (-1.0, 1.0)))
        return cls(layers, data["input_dim"], data["class_count"], bounds)

    def save(self, path) -> None:
        # json writes floats with repr, which round-trips float64 exactly
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def _check_input(model: NetworkModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise InputShapeError(f"expected an input of shape ({model.input_dim},), got {x.shape}")
    return x


def forward(model: NetworkModel, x) -> ForwardResult:
    """Inference pass returning logits, activation pattern and pre-activations"""
    h = _check_input(model, x)
    preacts = []
    for index in range(model.depth):
        weight, bias = model.effective(index)
        pre = weight @ h + bias
        if not np.all(np.isfinite(pre)):
            raise NumericError("non-finite pre-activation", layer=index)
        preacts.append(pre)
        h = np.maximum(pre, 0.0)
    weight, bias = model.effective(model.depth)
    logits = weight @ h + bias
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits", layer=model.depth)
    bits = np.concatenate([pre >= 0 for pre in preacts]) if preacts else np.zeros(0, bool)
    return ForwardResult(logits, ActivationPattern(bits, model.hidden_widths), preacts)


def forward_batch(model: NetworkModel, inputs) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised forward over rows of inputs, returns (logits, pattern bits)"""
    h = np.asarray(inputs, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != model.input_dim:
        raise InputShapeError(f"expected inputs of shape (N, {model.input_dim}), got {h.shape}")
    bits = []
    for index in range(model.depth):
        weight, bias = model.effective(index)
        pre = h @ weight.T + bias
        if not np.all(np.isfinite(pre)):
            raise NumericError("non-finite pre-activation", layer=index)
        bits.append(pre >= 0)
        h = np.maximum(pre, 0.0)
    weight, bias = model.effective(model.depth)
    logits = h @ weight.T + bias
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits", layer=model.depth)
    if bits:
        return logits, np.concatenate(bits, axis=1)
    return logits, np.zeros((h.shape[0], 0), dtype=bool)


def predict_classes(model: NetworkModel, inputs) -> np.ndarray:
    logits, _ = forward_batch(model, np.atleast_2d(inputs))
    return logits.argmax(axis=1)


def forward_explicit_bn(model: NetworkModel, x) -> np.ndarray:
    """Logits computed with explicit normalization arithmetic instead of folded weights"""
    h = _check_input(model, x)
    for index, layer in enumerate(model.layers):
        pre = layer.weight @ h + layer.bias
        if layer.bn is not None:
            bn = layer.bn
            pre = bn.gamma * (pre - bn.running_mean) / np.sqrt(bn.running_var + bn.eps) + bn.beta
        h = pre if index == model.depth else np.maximum(pre, 0.0)
    return h


def _masks(model: NetworkModel, pattern: ActivationPattern) -> List[np.ndarray]:
    return [pattern.layer_bits(index).astype(np.float64) for index in range(model.depth)]


def region_affine_map(model: NetworkModel, x_star) -> RegionAffineMap:
    """Exact logit Jacobian at x_star, chained through the active-node masks"""
    result = forward(model, x_star)
    masks = _masks(model, result.pattern)
    jac, _ = model.effective(model.depth)
    for index in reversed(range(model.depth)):
        weight, _ = model.effective(index)
        jac = (jac * masks[index]) @ weight
    x_star = np.asarray(x_star, dtype=np.float64)
    return RegionAffineMap(jac, result.logits - jac @ x_star, result.pattern)


def layer_affines(model: NetworkModel, x_star, result: ForwardResult = None):
    """Affine coefficients (A_l, a_l) of every hidden pre-activation on x_star's region,
    so that h^l(x) = A_l x + a_l for every x sharing x_star's pattern."""
    if result is None:
        result = forward(model, x_star)
    masks = _masks(model, result.pattern)
    post_A = np.eye(model.input_dim)
    post_a = np.zeros(model.input_dim)
    affines = []
    for index in range(model.depth):
        weight, bias = model.effective(index)
        A = weight @ post_A
        a = weight @ post_a + bias
        affines.append((A, a))
        post_A = A * masks[index][:, None]
        post_a = a * masks[index]
    return affines, result


def hidden_node_affine(model: NetworkModel, x_star, layer: int, node: int) -> Tuple[np.ndarray, float]:
    """Un-signed coefficients (w, b) with h^layer_node(x) = w.x + b on x_star's region"""
    if not 0 <= layer < model.depth:
        raise NodeIndexError(f"hidden layer {layer} does not exist (depth {model.depth})")
    if not 0 <= node < model.hidden_widths[layer]:
        raise NodeIndexError(f"node {node} does not exist in layer {layer}")
    result = forward(model, x_star)
    masks = _masks(model, result.pattern)
    weight, _ = model.effective(layer)
    w = weight[node].copy()
    for index in reversed(range(layer)):
        below, _ = model.effective(index)
        w = (w * masks[index]) @ below
    x_star = np.asarray(x_star, dtype=np.float64)
    return w, float(result.preacts[layer][node] - w @ x_star)
