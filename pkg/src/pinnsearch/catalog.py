"""Built-in PDE benchmark suite: residual operators, domains, conditions,
reference solutions, and the feature labels the retrieval stage consumes.

All specs are immutable and all operations here are pure functions, so the
catalog is safe to share across any number of workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import burgers
from .errors import ContractError

EQUATION_TYPES = ("elliptic", "parabolic", "hyperbolic", "mixed")
DIMS_CLASSES = ("1", "2", "3", "4+")
LINEARITIES = ("linear", "nonlinear")
BC_TYPES = ("dirichlet", "neumann", "mixed", "periodic")
COEFFICIENT_TYPES = ("constant", "variable")
TIME_SCALES = ("single", "multi")
GEOMETRY_CLASSES = ("simple", "complex")

BC_KINDS = ("dirichlet", "neumann", "periodic")


@dataclass(frozen=True)
class FeatureLabels:
    """Categorical description of a PDE used for similarity retrieval."""

    equation_type: str
    spatial_dims_class: str
    linearity: str
    time_dependence: bool
    bc_type: str
    ic_present: bool
    coefficient_type: str
    time_scale: str
    geometric_complexity: str

    def validate(self) -> None:
        checks = (
            ("equation_type", self.equation_type, EQUATION_TYPES),
            ("spatial_dims_class", self.spatial_dims_class, DIMS_CLASSES),
            ("linearity", self.linearity, LINEARITIES),
            ("bc_type", self.bc_type, BC_TYPES),
            ("coefficient_type", self.coefficient_type, COEFFICIENT_TYPES),
            ("time_scale", self.time_scale, TIME_SCALES),
            ("geometric_complexity", self.geometric_complexity, GEOMETRY_CLASSES),
        )
        for name, value, allowed in checks:
            if value not in allowed:
                raise ContractError(f"{name}: {value!r} not in {allowed}")
        for name, value in (("time_dependence", self.time_dependence),
                            ("ic_present", self.ic_present)):
            if not isinstance(value, bool):
                raise ContractError(f"{name}: expected bool, got {value!r}")

    def to_dict(self) -> dict:
        return {
            "equation_type": self.equation_type,
            "spatial_dims_class": self.spatial_dims_class,
            "linearity": self.linearity,
            "time_dependence": self.time_dependence,
            "bc_type": self.bc_type,
            "ic_present": self.ic_present,
            "coefficient_type": self.coefficient_type,
            "time_scale": self.time_scale,
            "geometric_complexity": self.geometric_complexity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureLabels":
        return cls(**d)


@dataclass(frozen=True)
class DerivativeBundle:
    """Solution value with first and pure second partials per coordinate.

    Shapes: u (B,), grad (B, n_coords), diag_hess (B, n_coords).  Mixed second
    partials are not represented.
    """

    u: np.ndarray
    grad: np.ndarray
    diag_hess: np.ndarray

    def check_dims(self, n_coords: int) -> None:
        if self.grad.ndim != 2 or self.grad.shape[1] != n_coords:
            raise ContractError(
                f"grad: expected (B, {n_coords}), got {self.grad.shape}")
        if self.diag_hess.shape != self.grad.shape:
            raise ContractError(
                f"diag_hess: expected {self.grad.shape}, got {self.diag_hess.shape}")
        if self.u.shape[0] != self.grad.shape[0]:
            raise ContractError("u and grad batch sizes differ")


@dataclass(frozen=True)
class BoundaryFace:
    """One axis-aligned face of the domain box."""

    axis: int
    side: str  # "lo" | "hi"

    def coordinate(self, domain) -> float:
        lo, hi = domain[self.axis]
        return lo if self.side == "lo" else hi


@dataclass(frozen=True)
class BoundaryCondition:
    """Condition on a box face.

    dirichlet: u = target on the face.
    neumann:   du/dx_axis = target on the face (derivative along the face axis).
    periodic:  u on this face equals u on the opposite face; target unused.
    """

    region: BoundaryFace
    kind: str
    target: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PdeSpec:
    id: str
    spatial_dims: int
    time_dependent: bool
    domain: tuple[tuple[float, float], ...]
    residual: Callable[[np.ndarray, DerivativeBundle], np.ndarray]
    residual_partials: Callable[[np.ndarray, DerivativeBundle], tuple]
    boundary_conditions: tuple[BoundaryCondition, ...]
    initial_condition: Optional[Callable[[np.ndarray], np.ndarray]]
    reference: Callable[[np.ndarray], np.ndarray]
    reference_derivatives: Callable[[np.ndarray], DerivativeBundle]
    labels: FeatureLabels
    reference_kind: str = "analytic"
    description: str = ""

    @property
    def n_coords(self) -> int:
        return self.spatial_dims + (1 if self.time_dependent else 0)


def _as_points(pde: PdeSpec, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != pde.n_coords:
        raise ContractError(
            f"{pde.id}: points must have {pde.n_coords} coordinates, got shape {pts.shape}")
    return pts


def in_closure(pde: PdeSpec, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    pts = _as_points(pde, points)
    ok = np.ones(pts.shape[0], dtype=bool)
    for k, (lo, hi) in enumerate(pde.domain):
        ok &= (pts[:, k] >= lo - tol) & (pts[:, k] <= hi + tol)
    return ok


def residual_eval(pde: PdeSpec, points: np.ndarray, bundle: DerivativeBundle) -> np.ndarray:
    """Evaluate the governing operator F(point, u, grad, diag_hess); shape (B,)."""
    pts = _as_points(pde, points)
    bundle.check_dims(pde.n_coords)
    if bundle.u.shape[0] != pts.shape[0]:
        raise ContractError(f"{pde.id}: bundle batch {bundle.u.shape[0]} != points {pts.shape[0]}")
    return pde.residual(pts, bundle)


def reference_solution(pde: PdeSpec, points: np.ndarray) -> np.ndarray:
    """Ground-truth solution values; points must lie in the domain closure."""
    pts = _as_points(pde, points)
    if not in_closure(pde, pts).all():
        bad = pts[~in_closure(pde, pts)][0]
        raise ContractError(f"{pde.id}: point {bad.tolist()} outside domain")
    return pde.reference(pts)


def reference_bundle(pde: PdeSpec, points: np.ndarray) -> DerivativeBundle:
    """Derivative bundle of the reference solution (oracle for residual checks)."""
    pts = _as_points(pde, points)
    return pde.reference_derivatives(pts)


# ---------------------------------------------------------------------------
# Built-in suite
# ---------------------------------------------------------------------------

def _zero(points: np.ndarray) -> np.ndarray:
    return np.zeros(points.shape[0])


def _dirichlet_zero_faces(n_axes: int) -> tuple[BoundaryCondition, ...]:
    faces = []
    for axis in range(n_axes):
        for side in ("lo", "hi"):
            faces.append(BoundaryCondition(BoundaryFace(axis, side), "dirichlet", _zero))
    return tuple(faces)


def _poisson1d() -> PdeSpec:
    pi2 = np.pi ** 2

    def residual(pts, b):
        return -b.diag_hess[:, 0] - pi2 * np.sin(np.pi * pts[:, 0])

    def partials(pts, b):
        return None, None, np.full((pts.shape[0], 1), -1.0)

    def ref(pts):
        return np.sin(np.pi * pts[:, 0])

    def ref_bundle(pts):
        x = pts[:, 0]
        return DerivativeBundle(
            u=np.sin(np.pi * x),
            grad=(np.pi * np.cos(np.pi * x))[:, None],
            diag_hess=(-pi2 * np.sin(np.pi * x))[:, None],
        )

    return PdeSpec(
        id="poisson1d", spatial_dims=1, time_dependent=False,
        domain=((0.0, 1.0),),
        residual=residual, residual_partials=partials,
        boundary_conditions=_dirichlet_zero_faces(1),
        initial_condition=None,
        reference=ref, reference_derivatives=ref_bundle,
        labels=FeatureLabels("elliptic", "1", "linear", False, "dirichlet",
                             False, "constant", "single", "simple"),
        description="-u_xx = pi^2 sin(pi x) on [0,1], u(0)=u(1)=0",
    )


def _poisson2d() -> PdeSpec:
    pi2 = np.pi ** 2

    def forcing(pts):
        return 2.0 * pi2 * np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])

    def residual(pts, b):
        return -(b.diag_hess[:, 0] + b.diag_hess[:, 1]) - forcing(pts)

    def partials(pts, b):
        return None, None, np.full((pts.shape[0], 2), -1.0)

    def ref(pts):
        return np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])

    def ref_bundle(pts):
        sx, sy = np.sin(np.pi * pts[:, 0]), np.sin(np.pi * pts[:, 1])
        cx, cy = np.cos(np.pi * pts[:, 0]), np.cos(np.pi * pts[:, 1])
        u = sx * sy
        grad = np.stack([np.pi * cx * sy, np.pi * sx * cy], axis=1)
        hess = np.stack([-pi2 * u, -pi2 * u], axis=1)
        return DerivativeBundle(u, grad, hess)

    return PdeSpec(
        id="poisson2d", spatial_dims=2, time_dependent=False,
        domain=((0.0, 1.0), (0.0, 1.0)),
        residual=residual, residual_partials=partials,
        boundary_conditions=_dirichlet_zero_faces(2),
        initial_condition=None,
        reference=ref, reference_derivatives=ref_bundle,
        labels=FeatureLabels("elliptic", "2", "linear", False, "dirichlet",
                             False, "constant", "single", "simple"),
        description="-lap(u) = 2 pi^2 sin(pi x) sin(pi y) on the unit square, u=0 on the boundary",
    )


def _heat1d() -> PdeSpec:
    alpha = 0.1
    pi2 = np.pi ** 2

    def residual(pts, b):
        return b.grad[:, 1] - alpha * b.diag_hess[:, 0]

    def partials(pts, b):
        n = pts.shape[0]
        dgrad = np.zeros((n, 2)); dgrad[:, 1] = 1.0
        dhess = np.zeros((n, 2)); dhess[:, 0] = -alpha
        return None, dgrad, dhess

    def ref(pts):
        x, t = pts[:, 0], pts[:, 1]
        return np.exp(-alpha * pi2 * t) * np.sin(np.pi * x)

    def ref_bundle(pts):
        x, t = pts[:, 0], pts[:, 1]
        decay = np.exp(-alpha * pi2 * t)
        u = decay * np.sin(np.pi * x)
        grad = np.stack([decay * np.pi * np.cos(np.pi * x), -alpha * pi2 * u], axis=1)
        hess = np.stack([-pi2 * u, (alpha * pi2) ** 2 * u], axis=1)
        return DerivativeBundle(u, grad, hess)

    def ic(pts):
        return np.sin(np.pi * pts[:, 0])

    return PdeSpec(
        id="heat1d", spatial_dims=1, time_dependent=True,
        domain=((0.0, 1.0), (0.0, 1.0)),
        residual=residual, residual_partials=partials,
        boundary_conditions=_dirichlet_zero_faces(1),
        initial_condition=ic,
        reference=ref, reference_derivatives=ref_bundle,
        labels=FeatureLabels("parabolic", "1", "linear", True, "dirichlet",
                             True, "constant", "single", "simple"),
        description="u_t = 0.1 u_xx on [0,1]x[0,1], u(x,0)=sin(pi x), u=0 at x=0,1",
    )


def _wave1d() -> PdeSpec:
    pi2 = np.pi ** 2

    def residual(pts, b):
        return b.diag_hess[:, 1] - b.diag_hess[:, 0]

    def partials(pts, b):
        n = pts.shape[0]
        dhess = np.zeros((n, 2)); dhess[:, 0] = -1.0; dhess[:, 1] = 1.0
        return None, None, dhess

    def ref(pts):
        return np.sin(np.pi * pts[:, 0]) * np.cos(np.pi * pts[:, 1])

    def ref_bundle(pts):
        sx, ct = np.sin(np.pi * pts[:, 0]), np.cos(np.pi * pts[:, 1])
        cx, st = np.cos(np.pi * pts[:, 0]), np.sin(np.pi * pts[:, 1])
        u = sx * ct
        grad = np.stack([np.pi * cx * ct, -np.pi * sx * st], axis=1)
        hess = np.stack([-pi2 * u, -pi2 * u], axis=1)
        return DerivativeBundle(u, grad, hess)

    def ic(pts):
        return np.sin(np.pi * pts[:, 0])

    # Second-order in time: the initial velocity u_t(x, 0) = 0 is carried as a
    # derivative condition on the t-lo face so the problem stays well posed.
    bcs = _dirichlet_zero_faces(1) + (
        BoundaryCondition(BoundaryFace(1, "lo"), "neumann", _zero),
    )
    return PdeSpec(
        id="wave1d", spatial_dims=1, time_dependent=True,
        domain=((0.0, 1.0), (0.0, 1.0)),
        residual=residual, residual_partials=partials,
        boundary_conditions=bcs,
        initial_condition=ic,
        reference=ref, reference_derivatives=ref_bundle,
        labels=FeatureLabels("hyperbolic", "1", "linear", True, "mixed",
                             True, "constant", "single", "simple"),
        description="u_tt = u_xx on [0,1]x[0,1], u(x,0)=sin(pi x), u_t(x,0)=0, u=0 at x=0,1",
    )


def _burgers1d() -> PdeSpec:
    nu = burgers.VISCOSITY

    def residual(pts, b):
        return b.grad[:, 1] + b.u * b.grad[:, 0] - nu * b.diag_hess[:, 0]

    def partials(pts, b):
        n = pts.shape[0]
        du = b.grad[:, 0].copy()
        dgrad = np.zeros((n, 2)); dgrad[:, 0] = b.u; dgrad[:, 1] = 1.0
        dhess = np.zeros((n, 2)); dhess[:, 0] = -nu
        return du, dgrad, dhess

    def ref(pts):
        return burgers.solution_values(pts)

    def ref_bundle(pts):
        u, ux, ut, uxx, utt = burgers.solution_derivatives(pts)
        grad = np.stack([ux, ut], axis=1)
        hess = np.stack([uxx, utt], axis=1)
        return DerivativeBundle(u, grad, hess)

    def ic(pts):
        return -np.sin(np.pi * pts[:, 0])

    return PdeSpec(
        id="burgers1d", spatial_dims=1, time_dependent=True,
        domain=((-1.0, 1.0), (0.0, 1.0)),
        residual=residual, residual_partials=partials,
        boundary_conditions=_dirichlet_zero_faces(1),
        initial_condition=ic,
        reference=ref, reference_derivatives=ref_bundle,
        labels=FeatureLabels("parabolic", "1", "nonlinear", True, "dirichlet",
                             True, "constant", "single", "simple"),
        reference_kind="quadrature",
        description="u_t + u u_x = (0.01/pi) u_xx on [-1,1]x[0,1], u(x,0)=-sin(pi x), u(+-1,t)=0",
    )


def _poisson5d() -> PdeSpec:
    dims = 5
    pi2 = np.pi ** 2

    def prod_sin(pts):
        return np.prod(np.sin(np.pi * pts), axis=1)

    def residual(pts, b):
        return -b.diag_hess.sum(axis=1) - dims * pi2 * prod_sin(pts)

    def partials(pts, b):
        return None, None, np.full((pts.shape[0], dims), -1.0)

    def ref(pts):
        return prod_sin(pts)

    def ref_bundle(pts):
        s = np.sin(np.pi * pts)
        c = np.cos(np.pi * pts)
        u = np.prod(s, axis=1)
        grad = np.empty_like(s)
        for k in range(dims):
            others = np.prod(np.delete(s, k, axis=1), axis=1)
            grad[:, k] = np.pi * c[:, k] * others
        hess = np.tile((-pi2 * u)[:, None], (1, dims))
        return DerivativeBundle(u, grad, hess)

    return PdeSpec(
        id="poisson5d", spatial_dims=dims, time_dependent=False,
        domain=tuple(((0.0, 1.0),) * dims),
        residual=residual, residual_partials=partials,
        boundary_conditions=_dirichlet_zero_faces(dims),
        initial_condition=None,
        reference=ref, reference_derivatives=ref_bundle,
        labels=FeatureLabels("elliptic", "4+", "linear", False, "dirichlet",
                             False, "constant", "single", "simple"),
        description="-lap(u) = 5 pi^2 prod_k sin(pi x_k) on the unit 5-cube, u=0 on the boundary",
    )


_REGISTRY: dict[str, PdeSpec] = {
    spec.id: spec
    for spec in (_burgers1d(), _heat1d(), _poisson1d(), _poisson2d(), _poisson5d(), _wave1d())
}


def list_pdes() -> list[PdeSpec]:
    """All built-in PDEs in stable id order."""
    return [_REGISTRY[k] for k in sorted(_REGISTRY)]


def get_pde(pde_id: str) -> PdeSpec:
    try:
        return _REGISTRY[pde_id]
    except KeyError:
        raise ContractError(
            f"unknown pde {pde_id!r}; available: {', '.join(sorted(_REGISTRY))}") from None
