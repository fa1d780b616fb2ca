import dataclasses

import numpy as np
import pytest

from pinnsearch.space import ConfigDefaults, HyperConfig, desk_space


@pytest.fixture
def quick_config():
    """Small valid config usable on any time-independent problem."""
    return HyperConfig("fnn", "tanh", 16, 3, "adam", "glorot_normal", 1e-3,
                       100, 100, 0, train_iters=30, seed=7)


@pytest.fixture
def tiny_space():
    """Desk space with very short trainings, for orchestration tests."""
    def factory(time_dependent: bool):
        base = desk_space(time_dependent)
        return dataclasses.replace(base, defaults=ConfigDefaults(train_iters=15))
    return factory


def interior_points(pde, n, seed=0, margin=1e-3):
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in pde.domain])
    hi = np.array([b[1] for b in pde.domain])
    return lo + (hi - lo) * rng.uniform(margin, 1.0 - margin, (n, pde.n_coords))
