"""Activation functions with derivatives up to third order.

Third derivatives are required because the training loss contains pure second
derivatives of the network output, and the parameter gradient differentiates
through them once more.  All functions are float64 vectorized and defined on
the whole real line (ReLU's higher derivatives are taken as 0 everywhere,
i.e. the almost-everywhere value).
"""
from __future__ import annotations

import numpy as np

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


def _elu(t):
    neg = np.minimum(t, 0.0)
    e = np.exp(neg)
    pos = t > 0
    f = np.where(pos, t, e - 1.0)
    d = np.where(pos, 1.0, e)
    dd = np.where(pos, 0.0, e)
    return f, d, dd, dd.copy()


def _selu(t):
    neg = np.minimum(t, 0.0)
    e = np.exp(neg)
    pos = t > 0
    f = SELU_LAMBDA * np.where(pos, t, SELU_ALPHA * (e - 1.0))
    d = SELU_LAMBDA * np.where(pos, 1.0, SELU_ALPHA * e)
    dd = SELU_LAMBDA * np.where(pos, 0.0, SELU_ALPHA * e)
    return f, d, dd, dd.copy()


def _sigmoid_raw(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _sigmoid(t):
    s = _sigmoid_raw(t)
    d = s * (1.0 - s)
    dd = d * (1.0 - 2.0 * s)
    ddd = d * (1.0 - 6.0 * s + 6.0 * s * s)
    return s, d, dd, ddd


def _silu(t):
    # t * sigmoid(t); d^k/dt^k = k * sigma^(k-1) + t * sigma^(k)
    s = _sigmoid_raw(t)
    s1 = s * (1.0 - s)
    s2 = s1 * (1.0 - 2.0 * s)
    s3 = s1 * (1.0 - 6.0 * s + 6.0 * s * s)
    f = t * s
    d = s + t * s1
    dd = 2.0 * s1 + t * s2
    ddd = 3.0 * s2 + t * s3
    return f, d, dd, ddd


def _relu(t):
    pos = t > 0
    f = np.where(pos, t, 0.0)
    d = pos.astype(float)
    z = np.zeros_like(t)
    return f, d, z, z.copy()


def _tanh(t):
    th = np.tanh(t)
    d = 1.0 - th * th
    dd = -2.0 * th * d
    ddd = -2.0 * d * (1.0 - 3.0 * th * th)
    return th, d, dd, ddd


def _gaussian(t):
    g = np.exp(-t * t)
    d = -2.0 * t * g
    dd = (4.0 * t * t - 2.0) * g
    ddd = (12.0 * t - 8.0 * t ** 3) * g
    return g, d, dd, ddd


# silu and swish (beta = 1) coincide; both names stay selectable.
TABLE = {
    "elu": _elu,
    "selu": _selu,
    "sigmoid": _sigmoid,
    "silu": _silu,
    "relu": _relu,
    "tanh": _tanh,
    "swish": _silu,
    "gaussian": _gaussian,
}


def evaluate(name: str, t: np.ndarray):
    """Return (f, f', f'', f''') of the named activation at t."""
    return TABLE[name](t)
