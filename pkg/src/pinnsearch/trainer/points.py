"""Collocation point sampling.

Domain points are strictly interior; boundary points sit exactly on their
declared face (the face coordinate is assigned, not sampled); initial points
sit exactly on the lower time bound.  Boundary points are dealt round-robin
across the declared conditions, so e.g. a 1D problem with two Dirichlet faces
alternates its boundary budget between x = lo and x = hi.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..catalog import PdeSpec
from ..errors import ContractError
from ..space import HyperConfig


@dataclass(frozen=True)
class PointSets:
    """Sampled collocation points plus precomputed condition targets."""

    domain: np.ndarray                      # (n_domain, n_coords)
    boundary: tuple[np.ndarray, ...]        # one block per boundary condition
    boundary_targets: tuple[np.ndarray, ...]
    initial: Optional[np.ndarray]
    initial_targets: Optional[np.ndarray]

    @property
    def n_boundary_total(self) -> int:
        return sum(len(b) for b in self.boundary)


def _interior_uniform(rng: np.random.Generator, n: int, lo: np.ndarray,
                      hi: np.ndarray) -> np.ndarray:
    u = rng.random((n, lo.size))
    while np.any(u == 0.0):  # random() is [0, 1); keep points strictly interior
        redo = np.any(u == 0.0, axis=1)
        u[redo] = rng.random((int(redo.sum()), lo.size))
    return lo + (hi - lo) * u


def check_config_for_pde(pde: PdeSpec, config: HyperConfig) -> None:
    if pde.time_dependent and config.n_initial == 0:
        raise ContractError(f"{pde.id}: time-dependent problem requires n_initial > 0")
    if not pde.time_dependent and config.n_initial != 0:
        raise ContractError(f"{pde.id}: time-independent problem requires n_initial = 0")


def sample_points(pde: PdeSpec, config: HyperConfig,
                  seed: int | np.random.SeedSequence) -> PointSets:
    """Deterministic point sets for one training run."""
    check_config_for_pde(pde, config)
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in pde.domain])
    hi = np.array([b[1] for b in pde.domain])

    domain = _interior_uniform(rng, config.n_domain, lo, hi)

    n_conditions = len(pde.boundary_conditions)
    counts = [len(range(i, config.n_boundary, n_conditions)) for i in range(n_conditions)]
    blocks, targets = [], []
    for bc, count in zip(pde.boundary_conditions, counts):
        pts = _interior_uniform(rng, count, lo, hi)
        pts[:, bc.region.axis] = bc.region.coordinate(pde.domain)
        blocks.append(pts)
        targets.append(np.asarray(bc.target(pts), dtype=float))

    initial = initial_targets = None
    if pde.time_dependent:
        t_axis = pde.n_coords - 1
        initial = _interior_uniform(rng, config.n_initial, lo, hi)
        initial[:, t_axis] = lo[t_axis]
        initial_targets = np.asarray(pde.initial_condition(initial), dtype=float)

    return PointSets(domain, tuple(blocks), tuple(targets), initial, initial_targets)
