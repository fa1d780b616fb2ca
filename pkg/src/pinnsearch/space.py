"""Hyperparameter configuration space: grids, validation, sampling, YAML round-trip.

The full grids below define what counts as a legal config anywhere in the
system.  The tree axes used by the search are a (possibly coarsened) subset of
those grids so that branching stays bounded; externally supplied configs are
validated against the full grids, not the tree subset.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import yaml

from .errors import ConfigFormatError

NET_TYPES = ("fnn", "laaf", "gaaf")
ACTIVATIONS = ("elu", "selu", "sigmoid", "silu", "relu", "tanh", "swish", "gaussian")
OPTIMIZERS = ("sgd", "rmsprop", "adam", "adamw")
INITIALIZERS = ("glorot_normal", "glorot_uniform", "he_normal", "he_uniform", "zeros")

WIDTH_GRID = tuple(range(8, 257, 4))        # 63 values
DEPTH_GRID = tuple(range(3, 11))            # 8 values
COUNT_GRID = tuple(range(100, 9601, 500))   # 20 values
# Log grid standing in for the continuous [1e-6, 1e-1] range; half-decade steps.
LR_GRID = (1e-6, 3e-6, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1)
LR_MIN, LR_MAX = 1e-6, 1e-1

AXIS_ORDER = (
    "net_type", "activation", "depth", "width", "optimizer",
    "initializer", "learning_rate", "n_domain", "n_boundary", "n_initial",
)

YAML_KEYS = (
    "net_type", "activation", "width", "depth", "optimizer", "initializer",
    "learning_rate", "n_domain", "n_boundary", "n_initial", "loss_weights",
    "train_iters", "seed",
)


@dataclass(frozen=True)
class HyperConfig:
    """One point in the search space plus the fixed training knobs."""

    net_type: str
    activation: str
    width: int
    depth: int
    optimizer: str
    initializer: str
    learning_rate: float
    n_domain: int
    n_boundary: int
    n_initial: int
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # (pde, bc, ic)
    train_iters: int = 2000
    seed: int = 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        w_pde, w_bc, w_ic = self.loss_weights
        d["loss_weights"] = {"pde": w_pde, "bc": w_bc, "ic": w_ic}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "HyperConfig":
        d = dict(d)
        lw = d.get("loss_weights", {"pde": 1.0, "bc": 1.0, "ic": 1.0})
        if isinstance(lw, Mapping):
            lw = (lw.get("pde", 1.0), lw.get("bc", 1.0), lw.get("ic", 1.0))
        d["loss_weights"] = tuple(float(v) for v in lw)
        return cls(**d)


@dataclass(frozen=True)
class ConfigDefaults:
    """Values for the fields that are not tree axes."""

    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    train_iters: int = 2000
    seed: int = 0


@dataclass(frozen=True)
class SearchSpace:
    """Finite value lists per axis.

    ``tree_values`` bound the branching of the memory tree; ``sample_values``
    are the full grids used by random draws and by uniform baselines.
    """

    axis_order: tuple[str, ...]
    tree_values: Mapping[str, tuple]
    sample_values: Mapping[str, tuple]
    defaults: ConfigDefaults = ConfigDefaults()

    def __post_init__(self):
        for axes in (self.tree_values, self.sample_values):
            if set(axes) != set(self.axis_order):
                raise ValueError("axis lists must cover exactly the axis order")
            for name, values in axes.items():
                if len(values) == 0:
                    raise ValueError(f"{name}: empty axis")


def default_space(time_dependent: bool = True,
                  defaults: ConfigDefaults | None = None) -> SearchSpace:
    """Paper-scale space: full sampling grids, coarsened width/depth/lr tree axes."""
    n_initial_values = COUNT_GRID if time_dependent else (0,)
    tree = {
        "net_type": NET_TYPES,
        "activation": ACTIVATIONS,
        "depth": (3, 4, 6, 8, 10),
        "width": (8, 16, 32, 64, 128, 256),
        "optimizer": OPTIMIZERS,
        "initializer": INITIALIZERS,
        "learning_rate": LR_GRID,
        "n_domain": COUNT_GRID,
        "n_boundary": COUNT_GRID,
        "n_initial": n_initial_values,
    }
    sample = dict(tree)
    sample["width"] = WIDTH_GRID
    sample["depth"] = DEPTH_GRID
    return SearchSpace(AXIS_ORDER, tree, sample, defaults or ConfigDefaults())


def desk_space(time_dependent: bool = True,
               defaults: ConfigDefaults | None = None) -> SearchSpace:
    """Reduced space for CPU-desk experiments; every value is paper-grid legal."""
    n_initial_values = (100, 600) if time_dependent else (0,)
    axes = {
        "net_type": NET_TYPES,
        "activation": ACTIVATIONS,
        "depth": (3, 4, 6),
        "width": (8, 16, 32),
        "optimizer": OPTIMIZERS,
        "initializer": INITIALIZERS,
        "learning_rate": (1e-4, 3e-4, 1e-3, 3e-3, 1e-2),
        "n_domain": (100, 600),
        "n_boundary": (100, 600),
        "n_initial": n_initial_values,
    }
    if defaults is None:
        defaults = ConfigDefaults(train_iters=250)
    return SearchSpace(AXIS_ORDER, axes, dict(axes), defaults)


def validate(config: HyperConfig, space: SearchSpace) -> list[str]:
    """Check every config invariant against the full grids; return violations.

    Total and pure: never raises on a structurally complete config.
    """
    v: list[str] = []
    if config.net_type not in NET_TYPES:
        v.append(f"net_type: unsupported value {config.net_type!r}")
    if config.activation not in ACTIVATIONS:
        v.append(f"activation: unsupported value {config.activation!r}")
    if config.optimizer not in OPTIMIZERS:
        v.append(f"optimizer: unsupported value {config.optimizer!r}")
    if config.initializer not in INITIALIZERS:
        v.append(f"initializer: unsupported value {config.initializer!r}")
    if config.width not in WIDTH_GRID:
        v.append(f"width: {config.width} not in {{8, 12, ..., 256}} (step 4)")
    if config.depth not in DEPTH_GRID:
        v.append(f"depth: {config.depth} not in {{3, ..., 10}}")
    if not (LR_MIN <= config.learning_rate <= LR_MAX):
        side = "below" if config.learning_rate < LR_MIN else "above"
        bound = LR_MIN if side == "below" else LR_MAX
        v.append(f"learning_rate: {config.learning_rate} {side} {bound}")
    if config.n_domain not in COUNT_GRID:
        v.append(f"n_domain: {config.n_domain} not in {{100, 600, ..., 9600}} (step 500)")
    if config.n_boundary not in COUNT_GRID:
        v.append(f"n_boundary: {config.n_boundary} not in {{100, 600, ..., 9600}} (step 500)")
    if config.n_initial != 0 and config.n_initial not in COUNT_GRID:
        v.append(f"n_initial: {config.n_initial} not in {{0, 100, 600, ..., 9600}}")
    if not all(w > 0 for w in config.loss_weights):
        v.append(f"loss_weights: {config.loss_weights} must all be positive")
    if config.train_iters < 0:
        v.append(f"train_iters: {config.train_iters} must be non-negative")
    if config.seed < 0:
        v.append(f"seed: {config.seed} must be non-negative")
    return v


_EXPECTED_TYPES = {
    "net_type": str, "activation": str, "optimizer": str, "initializer": str,
    "width": int, "depth": int, "n_domain": int, "n_boundary": int,
    "n_initial": int, "train_iters": int, "seed": int,
}


def to_yaml(config: HyperConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def from_yaml(text: str) -> HyperConfig:
    """Strict parse: exact key set, exact types, enum membership.

    Raises ConfigFormatError naming the offending key.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigFormatError(f"document: not valid YAML ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigFormatError("document: expected a mapping")
    for key in YAML_KEYS:
        if key not in raw:
            raise ConfigFormatError(f"{key}: missing")
    for key in raw:
        if key not in YAML_KEYS:
            raise ConfigFormatError(f"{key}: unknown key")
    for key, want in _EXPECTED_TYPES.items():
        val = raw[key]
        if want is int and (isinstance(val, bool) or not isinstance(val, int)):
            raise ConfigFormatError(f"{key}: expected integer, got {val!r}")
        if want is str and not isinstance(val, str):
            raise ConfigFormatError(f"{key}: expected string, got {val!r}")
    lr = raw["learning_rate"]
    if isinstance(lr, bool) or not isinstance(lr, (int, float)):
        raise ConfigFormatError(f"learning_rate: expected number, got {lr!r}")
    lw = raw["loss_weights"]
    if not isinstance(lw, dict) or set(lw) != {"pde", "bc", "ic"}:
        raise ConfigFormatError("loss_weights: expected mapping with keys pde, bc, ic")
    for part, val in lw.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigFormatError(f"loss_weights.{part}: expected number, got {val!r}")
    enums = {
        "net_type": NET_TYPES, "activation": ACTIVATIONS,
        "optimizer": OPTIMIZERS, "initializer": INITIALIZERS,
    }
    for key, allowed in enums.items():
        if raw[key] not in allowed:
            raise ConfigFormatError(f"{key}: unsupported value {raw[key]!r}")
    config = HyperConfig(
        net_type=raw["net_type"], activation=raw["activation"],
        width=raw["width"], depth=raw["depth"], optimizer=raw["optimizer"],
        initializer=raw["initializer"], learning_rate=float(raw["learning_rate"]),
        n_domain=raw["n_domain"], n_boundary=raw["n_boundary"],
        n_initial=raw["n_initial"],
        loss_weights=(float(lw["pde"]), float(lw["bc"]), float(lw["ic"])),
        train_iters=raw["train_iters"], seed=raw["seed"],
    )
    return config


def random_sample(space: SearchSpace, rng: np.random.Generator | int) -> HyperConfig:
    """Uniform independent draw per axis from the full sampling grids."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    picks = {}
    for axis in space.axis_order:
        values = space.sample_values[axis]
        picks[axis] = values[int(rng.integers(len(values)))]
    d = space.defaults
    return HyperConfig(
        net_type=picks["net_type"], activation=picks["activation"],
        width=int(picks["width"]), depth=int(picks["depth"]),
        optimizer=picks["optimizer"], initializer=picks["initializer"],
        learning_rate=float(picks["learning_rate"]),
        n_domain=int(picks["n_domain"]), n_boundary=int(picks["n_boundary"]),
        n_initial=int(picks["n_initial"]),
        loss_weights=d.loss_weights, train_iters=d.train_iters,
        seed=int(rng.integers(2**32)),
    )


def nearest_value(values: Sequence, x):
    """Closest grid value to x; ties resolve to the smaller value.

    Non-numeric axes: return x when present, else the first value.
    """
    if not isinstance(x, (int, float)) or isinstance(x, bool):
        return x if x in values else values[0]
    best = min(values, key=lambda v: (abs(float(v) - float(x)), float(v)))
    return best


def config_from_assignment(assignment: Mapping, defaults: ConfigDefaults,
                           seed: int | None = None) -> HyperConfig:
    """Build a full config from a complete axis assignment plus defaults."""
    return HyperConfig(
        net_type=assignment["net_type"], activation=assignment["activation"],
        width=int(assignment["width"]), depth=int(assignment["depth"]),
        optimizer=assignment["optimizer"], initializer=assignment["initializer"],
        learning_rate=float(assignment["learning_rate"]),
        n_domain=int(assignment["n_domain"]), n_boundary=int(assignment["n_boundary"]),
        n_initial=int(assignment["n_initial"]),
        loss_weights=defaults.loss_weights, train_iters=defaults.train_iters,
        seed=defaults.seed if seed is None else seed,
    )
