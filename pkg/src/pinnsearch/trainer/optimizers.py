"""First-order optimizers operating in place on named parameter arrays.

Fixed hyperparameters: adam/adamw beta = (0.9, 0.999), eps = 1e-8, with bias
correction; adamw adds decoupled weight decay 1e-4; rmsprop rho = 0.9.
"""
from __future__ import annotations

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
ADAMW_DECAY = 1e-4
RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-8


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for key in sorted(params):
            params[key] -= self.lr * grads[key]


class RmsProp:
    def __init__(self, lr: float):
        self.lr = lr
        self.sq: dict[str, np.ndarray] = {}

    def step(self, params, grads):
        for key in sorted(params):
            g = grads[key]
            v = self.sq.setdefault(key, np.zeros_like(params[key]))
            v *= RMSPROP_RHO
            v += (1.0 - RMSPROP_RHO) * g * g
            params[key] -= self.lr * g / (np.sqrt(v) + RMSPROP_EPS)


class Adam:
    def __init__(self, lr: float, weight_decay: float = 0.0):
        self.lr = lr
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1 ** self.t
        bc2 = 1.0 - ADAM_BETA2 ** self.t
        for key in sorted(params):
            g = grads[key]
            m = self.m.setdefault(key, np.zeros_like(params[key]))
            v = self.v.setdefault(key, np.zeros_like(params[key]))
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
            if self.weight_decay:
                params[key] -= self.lr * self.weight_decay * params[key]
            params[key] -= self.lr * update


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return Sgd(lr)
    if kind == "rmsprop":
        return RmsProp(lr)
    if kind == "adam":
        return Adam(lr)
    if kind == "adamw":
        return Adam(lr, weight_decay=ADAMW_DECAY)
    raise ValueError(f"optimizer: unsupported value {kind!r}")
