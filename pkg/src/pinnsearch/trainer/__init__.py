"""PINN training: networks, input-derivative propagation, losses, optimizers."""

from .autodiff import backward_bundle, backward_value, forward_bundle, forward_value
from .losses import loss_and_grads, total_loss
from .network import Network, init_network
from .optimizers import make_optimizer
from .points import PointSets, check_config_for_pde, sample_points
from .training import TrainReport, eval_grid, test_mse, train

__all__ = [
    "Network", "PointSets", "TrainReport",
    "backward_bundle", "backward_value", "check_config_for_pde", "eval_grid",
    "forward_bundle", "forward_value", "init_network", "loss_and_grads",
    "make_optimizer", "sample_points", "test_mse", "total_loss", "train",
]
