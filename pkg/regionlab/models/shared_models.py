from dataclasses import dataclass, replace

import numpy as np
import torch
import torch.nn as nn

from regionlab.models.errors import DegenerateBatchError
from regionlab.models.network import BatchNormRecord, DenseLayer, NetworkModel

VARIANTS = ("vanilla", "batchnorm", "dropout")


def ortho_init(layer, std=np.sqrt(2), bias_const=0.0, generator=None):
    """
    Orthogonal initialization of a linear layer, biases set to bias_const
    """
    nn.init.orthogonal_(layer.weight, std, generator=generator)
    nn.init.constant_(layer.bias, bias_const)
    return layer


def xavier_uniform_init(shape, seed) -> torch.Tensor:
    """Matrix of i.i.d. samples of U[-a, a] with a = sqrt(6 / (fan_in + fan_out))"""
    fan_out, fan_in = (int(s) for s in shape)
    if fan_out <= 0 or fan_in <= 0:
        raise ValueError(f"xavier_uniform_init needs positive dimensions, got {shape}")
    generator = torch.Generator().manual_seed(int(seed))
    return nn.init.xavier_uniform_(torch.empty((fan_out, fan_in), dtype=torch.float64), generator=generator)


@dataclass(frozen=True)
class BatchNormState:
    gamma: torch.Tensor
    beta: torch.Tensor
    running_mean: torch.Tensor
    running_var: torch.Tensor
    eps: float = 1e-5
    momentum: float = 0.9


def batchnorm_forward_train(preacts: torch.Tensor, state: BatchNormState):
    """Normalize a batch with its own statistics.
    Returns the normalized batch and the state with updated running statistics,
    running = momentum * running + (1 - momentum) * batch."""
    if preacts.shape[0] < 2:
        raise DegenerateBatchError(f"batch normalization needs >= 2 samples, got {preacts.shape[0]}")
    mean = preacts.mean(dim=0)
    var = preacts.var(dim=0, unbiased=False)
    out = state.gamma * (preacts - mean) / torch.sqrt(var + state.eps) + state.beta
    with torch.no_grad():
        running_mean = state.momentum * state.running_mean + (1 - state.momentum) * mean
        running_var = state.momentum * state.running_var + (1 - state.momentum) * var
    return out, replace(state, running_mean=running_mean, running_var=running_var)


class FoldableBatchNorm(nn.Module):
    """Batch normalization after the pre-activations, exported as a BatchNormRecord"""

    def __init__(self, width, eps=1e-5, momentum=0.9):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = nn.Parameter(torch.ones(width))
        self.beta = nn.Parameter(torch.zeros(width))
        self.register_buffer("running_mean", torch.zeros(width))
        self.register_buffer("running_var", torch.ones(width))

    def state(self) -> BatchNormState:
        return BatchNormState(
            self.gamma, self.beta, self.running_mean, self.running_var, self.eps, self.momentum
        )

    def forward(self, x):
        if self.training:
            out, state = batchnorm_forward_train(x, self.state())
            self.running_mean.copy_(state.running_mean)
            self.running_var.copy_(state.running_var)
            return out
        return self.gamma * (x - self.running_mean) / torch.sqrt(self.running_var + self.eps) + self.beta

    def to_record(self) -> BatchNormRecord:
        return BatchNormRecord(
            self.gamma.detach().double().numpy(),
            self.beta.detach().double().numpy(),
            self.running_mean.detach().double().numpy(),
            self.running_var.detach().double().numpy(),
            self.eps,
        )


def build_mlp(
    sizes,
    variant="vanilla",
    dropout_rate=0.2,
    init="xavier",
    seed=0,
    bn_eps=1e-5,
    bn_momentum=0.9,
    dtype=torch.float32,
):
    """Linear -> [BN] -> ReLU -> [Dropout] for every hidden layer, then a linear logit layer"""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant}, expected one of {VARIANTS}")
    generator = torch.Generator().manual_seed(int(seed))
    layers = []
    for j in range(len(sizes) - 1):
        linear = nn.Linear(sizes[j], sizes[j + 1])
        if init == "orthogonal":
            ortho_init(linear, generator=generator)
        elif init == "xavier":
            with torch.no_grad():
                linear.weight.copy_(xavier_uniform_init((sizes[j + 1], sizes[j]), seed + j))
                linear.bias.zero_()
        else:
            raise ValueError(f"unknown initializer {init}")
        layers.append(linear)
        if j < len(sizes) - 2:
            if variant == "batchnorm":
                layers.append(FoldableBatchNorm(sizes[j + 1], bn_eps, bn_momentum))
            layers.append(nn.ReLU())
            if variant == "dropout":
                layers.append(nn.Dropout(dropout_rate))
    return nn.Sequential(*layers).to(dtype)


def export_network(mlp: nn.Sequential, input_bounds=(-1.0, 1.0)) -> NetworkModel:
    """Inference model of a trained mlp; dropout is inactive and weights are not
    rescaled since training used inverted dropout"""
    layers = []
    current = None
    for module in mlp:
        if isinstance(module, nn.Linear):
            if current is not None:
                layers.append(current)
            current = {
                "weight": module.weight.detach().double().numpy(),
                "bias": module.bias.detach().double().numpy(),
                "bn": None,
                "dropout_rate": 0.0,
            }
        elif isinstance(module, FoldableBatchNorm):
            current["bn"] = module.to_record()
        elif isinstance(module, nn.Dropout):
            current["dropout_rate"] = float(module.p)
    layers.append(current)
    dense = [DenseLayer(**layer) for layer in layers]
    return NetworkModel(dense, dense[0].in_width, dense[-1].out_width, input_bounds)
