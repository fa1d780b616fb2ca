"""MLP definition and initialization.

Networks map points (B, n_inputs) to scalar outputs.  Hidden layers apply
activation(a * z) where the slope a is trainable per hidden layer (laaf),
shared globally (gaaf), or frozen at 1 (fnn).  With every slope at 1.0 the
three net types are bitwise identical, which the tests rely on.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..space import HyperConfig

SLOPE_FLOOR = 1e-3


class Network:
    """Weights, biases, and adaptive slopes for one fully connected net."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray],
                 slopes: np.ndarray, activation: str, net_type: str):
        self.weights = weights
        self.biases = biases
        self.slopes = slopes            # () for fnn, (1,) for gaaf, (n_hidden,) for laaf
        self.activation = activation
        self.net_type = net_type
        for l in range(len(weights) - 1):
            if weights[l + 1].shape[1] != weights[l].shape[0]:
                raise ContractError(
                    f"layer {l + 1}: input dim {weights[l + 1].shape[1]} does not chain "
                    f"from previous output {weights[l].shape[0]}")

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    def slope(self, layer: int) -> float:
        if self.net_type == "fnn":
            return 1.0
        if self.net_type == "gaaf":
            return float(self.slopes[0])
        return float(self.slopes[layer])

    def slopes_trainable(self) -> bool:
        return self.net_type in ("laaf", "gaaf")

    def parameters(self) -> dict[str, np.ndarray]:
        params = {}
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            params[f"W{l}"] = W
            params[f"b{l}"] = b
        if self.slopes_trainable():
            params["slopes"] = self.slopes
        return params

    def clamp_slopes(self) -> None:
        if self.slopes_trainable():
            np.maximum(self.slopes, SLOPE_FLOOR, out=self.slopes)

    # value/bundle defined in autodiff; bound here so any "model" is an object
    # with .value and .bundle, allowing oracle stand-ins in tests.
    def value(self, points: np.ndarray) -> np.ndarray:
        from .autodiff import forward_value
        return forward_value(self, points)[0]

    def bundle(self, points: np.ndarray):
        from .autodiff import forward_bundle
        u, grad, hess, _ = forward_bundle(self, points)
        return u, grad, hess


def init_network(config: HyperConfig, n_inputs: int,
                 seed: int | np.random.SeedSequence) -> Network:
    """Draw weights per the configured initializer; biases zero, slopes one."""
    rng = np.random.default_rng(seed)
    dims = [n_inputs] + [config.width] * config.depth + [1]
    weights, biases = [], []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        shape = (fan_out, fan_in)
        kind = config.initializer
        if kind == "glorot_normal":
            W = rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), shape)
        elif kind == "glorot_uniform":
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, shape)
        elif kind == "he_normal":
            W = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
        elif kind == "he_uniform":
            limit = np.sqrt(6.0 / fan_in)
            W = rng.uniform(-limit, limit, shape)
        elif kind == "zeros":
            W = np.zeros(shape)
        else:
            raise ContractError(f"initializer: unsupported value {kind!r}")
        weights.append(W)
        biases.append(np.zeros(fan_out))
    if config.net_type == "laaf":
        slopes = np.ones(config.depth)
    elif config.net_type == "gaaf":
        slopes = np.ones(1)
    elif config.net_type == "fnn":
        slopes = np.ones(0)
    else:
        raise ContractError(f"net_type: unsupported value {config.net_type!r}")
    return Network(weights, biases, slopes, config.activation, config.net_type)
