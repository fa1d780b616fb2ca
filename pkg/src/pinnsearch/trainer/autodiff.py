"""Forward propagation of input derivatives and its adjoint.

The bundle path carries R = 1 + 2d streams per point through the network: the
value, d first partials, and d pure second partials.  Streams propagate with
layered analytic rules; for a hidden layer with pre-activation y = W v + b,
slope a, and activation s = act(a y):

    value'   = s(a y)
    first'_k = a s' p_k                       p_k = W first_k
    second'_k = a^2 s'' p_k^2 + a s' q_k      q_k = W second_k

The backward pass is the exact adjoint of those rules, which is why the
activation table carries third derivatives: differentiating second'_k with
respect to y hits s'''.

Matrix products run through BLAS; the per-element stream algebra runs through
fused numba kernels (_kernels.py) with a pure-numpy fallback selected by
PINNSEARCH_NO_NUMBA=1.  Both paths use the same formulas and a fixed call
sequence, so training is bit-reproducible for a given seed on one machine.
"""
from __future__ import annotations

import os

import numpy as np

from . import activations
from .network import Network

try:
    from . import _kernels
    _HAVE_KERNELS = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    _HAVE_KERNELS = False


def _use_kernels() -> bool:
    return _HAVE_KERNELS and not os.environ.get("PINNSEARCH_NO_NUMBA")


def _stack_inputs(X: np.ndarray) -> np.ndarray:
    B, d = X.shape
    A = np.zeros((1 + 2 * d, B, d))
    A[0] = X
    for k in range(d):
        A[1 + k, :, k] = 1.0  # d(x)/dx_k seed
    return A


def _linear(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    R, B, n_in = A.shape
    return (A.reshape(R * B, n_in) @ W.T).reshape(R, B, W.shape[0])


def forward_bundle(net: Network, X: np.ndarray):
    """Network value, gradient, and diagonal Hessian at X of shape (B, d).

    Returns (u (B,), grad (B, d), diag_hess (B, d), caches for the backward
    pass).
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    A = _stack_inputs(X)
    caches = []
    fused = _use_kernels()
    code = _kernels.ACT_CODES[net.activation] if fused else -1
    for l in range(net.n_hidden):
        a = net.slope(l)
        Z = _linear(A, net.weights[l])
        Z[0] += net.biases[l]
        T = Z[0] if a == 1.0 else a * Z[0]
        if fused:
            E = _kernels.primitive(net.activation, T)
            out = np.empty_like(Z)
            B = Z.shape[1]
            n = Z.shape[2]
            s1 = np.empty((B, n))
            s2 = np.empty((B, n))
            s3 = np.empty((B, n))
            _kernels.forward_streams(code, Z, E, a, d, out, s1, s2, s3)
        else:
            s, s1, s2, s3 = activations.evaluate(net.activation, T)
            out = np.empty_like(Z)
            out[0] = s
            P = Z[1:1 + d]
            as1 = s1 if a == 1.0 else a * s1      # slope 1.0 keeps fnn bitwise exact
            aas2 = s2 if a == 1.0 else (a * a) * s2
            out[1:1 + d] = as1 * P
            out[1 + d:] = aas2 * (P * P) + as1 * Z[1 + d:]
        caches.append((A, Z, s1, s2, s3, a))
        A = out
    Z = _linear(A, net.weights[-1])
    Z[0] += net.biases[-1]
    caches.append((A, None, None, None, None, 1.0))
    u = Z[0, :, 0]
    grad = Z[1:1 + d, :, 0].T.copy()
    hess = Z[1 + d:, :, 0].T.copy()
    return u, grad, hess, caches


def backward_bundle(net: Network, caches, gu: np.ndarray,
                    ggrad: np.ndarray, ghess: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given adjoints of (u, grad, diag_hess)."""
    B, d = ggrad.shape
    R = 1 + 2 * d
    grads: dict[str, np.ndarray] = {}
    trainable_slopes = net.slopes_trainable()
    if trainable_slopes:
        grads["slopes"] = np.zeros_like(net.slopes)
    fused = _use_kernels()

    Abar = np.empty((R, B, 1))
    Abar[0, :, 0] = gu
    Abar[1:1 + d, :, 0] = ggrad.T
    Abar[1 + d:, :, 0] = ghess.T

    # output linear layer
    A_in = caches[-1][0]
    l_out = net.n_hidden
    n_in = A_in.shape[2]
    grads[f"W{l_out}"] = Abar.reshape(R * B, 1).T @ A_in.reshape(R * B, n_in)
    grads[f"b{l_out}"] = Abar[0].sum(axis=0)
    Abar = (Abar.reshape(R * B, 1) @ net.weights[-1]).reshape(R, B, n_in)

    for l in range(net.n_hidden - 1, -1, -1):
        A_in, Z, s1, s2, s3, a = caches[l]
        if fused:
            Zbar = np.empty_like(Abar)
            abar = _kernels.backward_streams(Abar, Z, s1, s2, s3, a, d, Zbar)
        else:
            P = Z[1:1 + d]
            Q = Z[1 + d:]
            Av, Aj, Ah = Abar[0], Abar[1:1 + d], Abar[1 + d:]
            one = a == 1.0
            as1 = s1 if one else a * s1
            as2 = s2 if one else a * s2
            aas3 = s3 if one else (a * a) * s3
            s2P = as2 * P           # shared by the T and first-stream adjoints
            # adjoint of t = a * (pre-activation value row)
            Tbar = Av * s1 + (Aj * s2P).sum(axis=0) \
                + (Ah * (aas3 * (P * P) + as2 * Q)).sum(axis=0)
            Zbar = np.empty_like(Abar)
            Zbar[0] = Tbar if one else a * Tbar
            Zbar[1:1 + d] = Aj * as1 + (2.0 * a) * (Ah * s2P)
            Zbar[1 + d:] = Ah * as1
            abar = float((Tbar * Z[0]).sum()
                         + (Aj * (s1 * P)).sum()
                         + (Ah * (2.0 * (s2P * P) + s1 * Q)).sum())
        if trainable_slopes:
            if net.net_type == "gaaf":
                grads["slopes"][0] += abar
            else:
                grads["slopes"][l] += abar
        n_in = A_in.shape[2]
        n_out = Zbar.shape[2]
        Z2 = Zbar.reshape(R * B, n_out)
        grads[f"W{l}"] = Z2.T @ A_in.reshape(R * B, n_in)
        grads[f"b{l}"] = Zbar[0].sum(axis=0)
        if l > 0:
            Abar = (Z2 @ net.weights[l]).reshape(R, B, n_in)
    return grads


def forward_value(net: Network, X: np.ndarray):
    """Plain forward pass: (u (B,), caches)."""
    H = np.asarray(X, dtype=float)
    caches = []
    for l in range(net.n_hidden):
        a = net.slope(l)
        Y = H @ net.weights[l].T + net.biases[l]
        s, s1, _, _ = activations.evaluate(net.activation, Y if a == 1.0 else a * Y)
        caches.append((H, Y, s1, a))
        H = s
    caches.append((H, None, None, 1.0))
    u = (H @ net.weights[-1].T + net.biases[-1])[:, 0]
    return u, caches


def backward_value(net: Network, caches, gu: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given the adjoint of u alone."""
    grads: dict[str, np.ndarray] = {}
    if net.slopes_trainable():
        grads["slopes"] = np.zeros_like(net.slopes)
    H_in = caches[-1][0]
    l_out = net.n_hidden
    Ybar = gu[:, None]
    grads[f"W{l_out}"] = Ybar.T @ H_in
    grads[f"b{l_out}"] = Ybar.sum(axis=0)
    Hbar = Ybar @ net.weights[-1]
    for l in range(net.n_hidden - 1, -1, -1):
        H_in, Y, s1, a = caches[l]
        Tbar = Hbar * s1
        if net.slopes_trainable():
            abar = float((Tbar * Y).sum())
            if net.net_type == "gaaf":
                grads["slopes"][0] += abar
            else:
                grads["slopes"][l] += abar
        Ybar = Tbar if a == 1.0 else a * Tbar
        grads[f"W{l}"] = Ybar.T @ H_in
        grads[f"b{l}"] = Ybar.sum(axis=0)
        if l > 0:
            Hbar = Ybar @ net.weights[l]
    return grads


def accumulate(into: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
    """Sum freshly computed gradient dicts; ``into`` takes ownership of arrays."""
    for key, g in grads.items():
        if key in into:
            into[key] += g
        else:
            into[key] = g
