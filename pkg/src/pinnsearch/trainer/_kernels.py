"""Fused single-pass kernels for the stream propagation hot loops.

The transcendental primitive (tanh, exp, sigmoid) is evaluated by numpy's
SIMD loops; these kernels consume it and do the remaining per-element algebra
for all derivative streams in one pass.  Formulas mirror activations.py
exactly so the value path (numpy) and bundle path (kernels) agree bitwise.
All kernels are sequential and IEEE-strict (fastmath off), keeping training
bit-reproducible.

Set PINNSEARCH_NO_NUMBA=1 to fall back to the pure-numpy implementation in
autodiff.py (used by the equivalence tests).
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .activations import SELU_ALPHA, SELU_LAMBDA

ACT_CODES = {
    "tanh": 0, "sigmoid": 1, "silu": 2, "swish": 2,
    "relu": 3, "elu": 4, "selu": 5, "gaussian": 6,
}


def primitive(name: str, T: np.ndarray) -> np.ndarray:
    """The one vectorized transcendental each activation family needs."""
    if name == "tanh":
        return np.tanh(T)
    if name in ("sigmoid", "silu", "swish"):
        out = np.empty_like(T)
        pos = T >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-T[pos]))
        e = np.exp(T[~pos])
        out[~pos] = e / (1.0 + e)
        return out
    if name in ("elu", "selu"):
        return np.exp(np.minimum(T, 0.0))
    if name == "gaussian":
        return np.exp(-T * T)
    return T  # relu: unused


@njit(cache=True, fastmath=False)
def _act_derivs(code, t, e):
    """(s, s', s'', s''') for activation ``code`` at pre-activation t.

    ``e`` is the precomputed primitive at t (see ``primitive``).
    """
    if code == 0:  # tanh
        s1 = 1.0 - e * e
        return e, s1, -2.0 * e * s1, -2.0 * s1 * (1.0 - 3.0 * e * e)
    if code == 1:  # sigmoid
        g1 = e * (1.0 - e)
        return e, g1, g1 * (1.0 - 2.0 * e), g1 * (1.0 - 6.0 * e + 6.0 * e * e)
    if code == 2:  # silu / swish
        g1 = e * (1.0 - e)
        g2 = g1 * (1.0 - 2.0 * e)
        g3 = g1 * (1.0 - 6.0 * e + 6.0 * e * e)
        return t * e, e + t * g1, 2.0 * g1 + t * g2, 3.0 * g2 + t * g3
    if code == 3:  # relu
        if t > 0.0:
            return t, 1.0, 0.0, 0.0
        return 0.0, 0.0, 0.0, 0.0
    if code == 4:  # elu
        if t > 0.0:
            return t, 1.0, 0.0, 0.0
        return e - 1.0, e, e, e
    if code == 5:  # selu
        if t > 0.0:
            return SELU_LAMBDA * t, SELU_LAMBDA, 0.0, 0.0
        lae = SELU_LAMBDA * SELU_ALPHA * e
        return SELU_LAMBDA * SELU_ALPHA * (e - 1.0), lae, lae, lae
    # gaussian
    return e, -2.0 * t * e, (4.0 * t * t - 2.0) * e, (12.0 * t - 8.0 * t ** 3) * e


@njit(cache=True, fastmath=False)
def forward_streams(code, Z, E, a, d, out, s1c, s2c, s3c):
    """Apply the activation to the value stream and push derivative streams.

    Operation grouping matches the numpy fallback so both paths agree bitwise.
    """
    R, B, n = Z.shape
    for b in range(B):
        for j in range(n):
            t = a * Z[0, b, j]
            s, s1, s2, s3 = _act_derivs(code, t, E[b, j])
            out[0, b, j] = s
            s1c[b, j] = s1
            s2c[b, j] = s2
            s3c[b, j] = s3
            as1 = s1 if a == 1.0 else a * s1
            aas2 = s2 if a == 1.0 else (a * a) * s2
            for k in range(d):
                p = Z[1 + k, b, j]
                q = Z[1 + d + k, b, j]
                out[1 + k, b, j] = as1 * p
                out[1 + d + k, b, j] = aas2 * (p * p) + as1 * q


@njit(cache=True, fastmath=False)
def backward_streams(Abar, Z, s1c, s2c, s3c, a, d, Zbar):
    """Adjoint of forward_streams; returns the slope adjoint."""
    abar = 0.0
    R, B, n = Z.shape
    for b in range(B):
        for j in range(n):
            s1 = s1c[b, j]
            s2 = s2c[b, j]
            s3 = s3c[b, j]
            as1 = s1 if a == 1.0 else a * s1
            as2 = s2 if a == 1.0 else a * s2
            aas3 = s3 if a == 1.0 else (a * a) * s3
            tbar = Abar[0, b, j] * s1
            for k in range(d):
                p = Z[1 + k, b, j]
                q = Z[1 + d + k, b, j]
                aj = Abar[1 + k, b, j]
                ah = Abar[1 + d + k, b, j]
                s2p = as2 * p
                tbar += aj * s2p + ah * (aas3 * (p * p) + as2 * q)
                Zbar[1 + k, b, j] = aj * as1 + (2.0 * a) * (ah * s2p)
                Zbar[1 + d + k, b, j] = ah * as1
                abar += aj * (s1 * p) + ah * (2.0 * (s2p * p) + s1 * q)
            Zbar[0, b, j] = tbar if a == 1.0 else a * tbar
            abar += tbar * Z[0, b, j]
    return abar
