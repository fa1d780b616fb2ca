"""Training loss assembly: residual, boundary, and initial mean-square terms.

total = w_pde * mean(residual^2) + w_bc * mean(bc mismatch^2)
      + w_ic * mean(ic mismatch^2)

Boundary mismatches pool across all conditions (one mean over every boundary
point).  ``total_loss`` works for any model exposing .value / .bundle, which
lets tests inject the exact reference solution as an oracle model;
``loss_and_grads`` additionally needs a real Network for the adjoint pass.
"""
from __future__ import annotations

import numpy as np

from ..catalog import DerivativeBundle, PdeSpec
from .autodiff import accumulate, backward_bundle, backward_value, forward_bundle, forward_value
from .network import Network
from .points import PointSets


def _periodic_partner(pde: PdeSpec, pts: np.ndarray, axis: int) -> np.ndarray:
    lo, hi = pde.domain[axis]
    partner = pts.copy()
    partner[:, axis] = np.where(np.isclose(pts[:, axis], lo), hi, lo)
    return partner


def _constant_block(pts: np.ndarray) -> bool:
    # 1D static faces repeat one point n times; evaluate it once.
    return len(pts) > 1 and bool((pts == pts[0]).all())


def _bc_mismatch_value(pde: PdeSpec, model, bc, pts, target):
    """Squared-mismatch sum for one condition block (handles repeated points)."""
    if bc.kind == "dirichlet":
        if _constant_block(pts):
            m = model.value(pts[:1]) - target[:1]
            return len(pts) * float(m[0] ** 2)
        mism = model.value(pts) - target
    elif bc.kind == "periodic":
        mism = model.value(pts) - model.value(_periodic_partner(pde, pts, bc.region.axis))
    elif bc.kind == "neumann":
        _, grad, _ = model.bundle(pts)
        mism = grad[:, bc.region.axis] - target
    else:
        raise ValueError(f"unknown boundary kind {bc.kind!r}")
    return float(np.sum(mism ** 2))


def total_loss(model, pde: PdeSpec, points: PointSets,
               loss_weights=(1.0, 1.0, 1.0)) -> tuple[float, dict[str, float]]:
    """Weighted total plus the unweighted components {pde, bc, ic}."""
    w_pde, w_bc, w_ic = loss_weights
    u, grad, hess = model.bundle(points.domain)
    residual = pde.residual(points.domain, DerivativeBundle(u, grad, hess))
    l_pde = float(np.mean(residual ** 2))

    n_b = points.n_boundary_total
    sq_sum = 0.0
    for bc, pts, target in zip(pde.boundary_conditions, points.boundary,
                               points.boundary_targets):
        if len(pts) == 0:
            continue
        sq_sum += _bc_mismatch_value(pde, model, bc, pts, target)
    l_bc = sq_sum / n_b if n_b else 0.0

    l_ic = 0.0
    if points.initial is not None and len(points.initial):
        mism = model.value(points.initial) - points.initial_targets
        l_ic = float(np.mean(mism ** 2))

    total = w_pde * l_pde + w_bc * l_bc + w_ic * l_ic
    return total, {"pde": l_pde, "bc": l_bc, "ic": l_ic}


def loss_and_grads(net: Network, pde: PdeSpec, points: PointSets,
                   loss_weights=(1.0, 1.0, 1.0)):
    """(total, components, parameter gradients) in one combined pass."""
    w_pde, w_bc, w_ic = loss_weights
    grads: dict[str, np.ndarray] = {}

    # residual term; None partials mean identically zero
    u, grad, hess, caches = forward_bundle(net, points.domain)
    bundle = DerivativeBundle(u, grad, hess)
    residual = pde.residual(points.domain, bundle)
    n_d = len(residual)
    l_pde = float(np.mean(residual ** 2))
    dF_du, dF_dgrad, dF_dhess = pde.residual_partials(points.domain, bundle)
    scale = (2.0 * w_pde / n_d) * residual
    gu = np.zeros(n_d) if dF_du is None else scale * dF_du
    ggrad = np.zeros_like(grad) if dF_dgrad is None else scale[:, None] * dF_dgrad
    ghess = np.zeros_like(hess) if dF_dhess is None else scale[:, None] * dF_dhess
    accumulate(grads, backward_bundle(net, caches, gu, ggrad, ghess))

    # boundary terms, pooled mean over every boundary point
    n_b = points.n_boundary_total
    sq_sum = 0.0
    for bc, pts, target in zip(pde.boundary_conditions, points.boundary,
                               points.boundary_targets):
        if len(pts) == 0:
            continue
        if bc.kind == "dirichlet":
            if _constant_block(pts):
                ub, caches_b = forward_value(net, pts[:1])
                m1 = ub - target[:1]
                coef = (2.0 * w_bc / n_b) * len(pts) * m1
                accumulate(grads, backward_value(net, caches_b, coef))
                sq_sum += len(pts) * float(m1[0] ** 2)
                continue
            ub, caches_b = forward_value(net, pts)
            mism = ub - target
            coef = (2.0 * w_bc / n_b) * mism
            accumulate(grads, backward_value(net, caches_b, coef))
        elif bc.kind == "neumann":
            ub, gradb, hessb, caches_b = forward_bundle(net, pts)
            mism = gradb[:, bc.region.axis] - target
            coef = (2.0 * w_bc / n_b) * mism
            g_grad = np.zeros_like(gradb)
            g_grad[:, bc.region.axis] = coef
            accumulate(grads, backward_bundle(net, caches_b, np.zeros_like(ub),
                                              g_grad, np.zeros_like(hessb)))
        elif bc.kind == "periodic":
            partner = _periodic_partner(pde, pts, bc.region.axis)
            ua, caches_a = forward_value(net, pts)
            ub, caches_b = forward_value(net, partner)
            mism = ua - ub
            coef = (2.0 * w_bc / n_b) * mism
            accumulate(grads, backward_value(net, caches_a, coef))
            accumulate(grads, backward_value(net, caches_b, -coef))
        else:
            raise ValueError(f"unknown boundary kind {bc.kind!r}")
        sq_sum += float(np.sum(mism ** 2))
    l_bc = sq_sum / n_b if n_b else 0.0

    # initial term
    l_ic = 0.0
    if points.initial is not None and len(points.initial):
        ui, caches_i = forward_value(net, points.initial)
        mism = ui - points.initial_targets
        l_ic = float(np.mean(mism ** 2))
        coef = (2.0 * w_ic / len(mism)) * mism
        accumulate(grads, backward_value(net, caches_i, coef))

    total = w_pde * l_pde + w_bc * l_bc + w_ic * l_ic
    return total, {"pde": l_pde, "bc": l_bc, "ic": l_ic}, grads
