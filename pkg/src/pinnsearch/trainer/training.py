"""Full-batch PINN training and the fixed evaluation grids.

Evaluation grids are versioned so MSE numbers stay comparable across runs and
machines: midpoint grids per axis (256 points in 1D, 64x64 in 2D, 33 time
slices for time-dependent problems) and a 4096-point unscrambled Sobol set in
5D.  Divergence (non-finite loss, or a final loss above 1e6) is reported as
data, never raised.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from ..catalog import PdeSpec, get_pde
from ..space import HyperConfig
from .losses import loss_and_grads, total_loss
from .network import Network, init_network
from .optimizers import make_optimizer
from .points import sample_points

GRID_VERSION = 1
DIVERGENCE_LOSS = 1e6
CURVE_STRIDE = 100


def _midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


@lru_cache(maxsize=None)
def _eval_grid_cached(pde_id: str) -> tuple[np.ndarray, np.ndarray]:
    pde = get_pde(pde_id)
    if pde.spatial_dims == 1:
        axes = [_midpoints(*pde.domain[0], 256)]
    elif pde.spatial_dims == 2:
        axes = [_midpoints(*pde.domain[0], 64), _midpoints(*pde.domain[1], 64)]
    elif pde.spatial_dims == 5:
        sob = qmc.Sobol(d=5, scramble=False).random_base2(m=12)  # 4096 points
        lo = np.array([b[0] for b in pde.domain])
        hi = np.array([b[1] for b in pde.domain])
        pts = lo + (hi - lo) * sob
        return pts, pde.reference(pts)
    else:
        raise ValueError(f"no evaluation grid rule for {pde.spatial_dims} spatial dims")
    if pde.time_dependent:
        axes.append(_midpoints(*pde.domain[-1], 33))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts, pde.reference(pts)


def eval_grid(pde: PdeSpec) -> np.ndarray:
    return _eval_grid_cached(pde.id)[0]


def test_mse(model, pde: PdeSpec) -> float:
    """Mean squared error against the reference on the fixed grid."""
    pts, ref = _eval_grid_cached(pde.id)
    pred = model.value(pts)
    return float(np.mean((pred - ref) ** 2))


@dataclass
class TrainReport:
    test_mse: float
    final_loss: float
    loss_curve: list[tuple[int, float]]
    diverged: bool
    wall_time_s: float
    config: HyperConfig
    seed: int
    components: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def _num(x: float):
            return x if math.isfinite(x) else None
        return {
            "test_mse": _num(self.test_mse),
            "final_loss": _num(self.final_loss),
            "loss_curve": [(i, _num(v)) for i, v in self.loss_curve],
            "diverged": self.diverged,
            "wall_time_s": self.wall_time_s,
            "config": self.config.to_dict(),
            "seed": self.seed,
            "components": {k: _num(v) for k, v in self.components.items()},
            "grid_version": GRID_VERSION,
        }


def train(pde: PdeSpec, config: HyperConfig) -> TrainReport:
    """Train one PINN and measure its test MSE; pure given (pde, config)."""
    with np.errstate(over="ignore", invalid="ignore"):
        # overflow/NaN is the documented divergence path, not an error
        return _train_inner(pde, config, time.perf_counter())


def _train_inner(pde: PdeSpec, config: HyperConfig, start: float) -> TrainReport:
    point_seed, init_seed = np.random.SeedSequence(config.seed).spawn(2)
    points = sample_points(pde, config, point_seed)
    net = init_network(config, pde.n_coords, init_seed)
    params = net.parameters()
    opt = make_optimizer(config.optimizer, config.learning_rate)

    diverged = False
    curve: list[tuple[int, float]] = []
    stopped_at = 0
    loss, components = math.nan, {"pde": math.nan, "bc": math.nan, "ic": math.nan}
    for it in range(config.train_iters):
        loss, components, grads = loss_and_grads(net, pde, points, config.loss_weights)
        if it % CURVE_STRIDE == 0:
            curve.append((it, loss))
        if not math.isfinite(loss):
            diverged = True
            stopped_at = it
            break
        opt.step(params, grads)
        net.clamp_slopes()
    if not diverged:
        stopped_at = config.train_iters
        loss, components = total_loss(net, pde, points, config.loss_weights)
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
            diverged = True
    if not curve or curve[-1][0] != stopped_at:
        curve.append((stopped_at, loss))

    mse = test_mse(net, pde)
    if not math.isfinite(mse):
        diverged = True
    return TrainReport(
        test_mse=mse, final_loss=loss, loss_curve=curve, diverged=diverged,
        wall_time_s=time.perf_counter() - start, config=config, seed=config.seed,
        components=components,
    )
