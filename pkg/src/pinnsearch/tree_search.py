"""Layered tree search over the hyperparameter axes.

The root is the target problem; each level fixes one axis in the space's
order, so a leaf is a complete configuration.  Selection follows UCT with a
policy-prior bias:

    a* = argmax_a [ Q(s,a) + lambda * prior(a|s) * sqrt(ln N(s) / N(s,a)) ]

Unvisited actions score +infinity (visited-first would starve exploration);
among several unvisited actions the highest prior wins, then axis-value order.
Exact ties between finite scores also resolve by axis-value order.  Rewards
back-propagate as running means along the root-to-leaf path, and every reward
lands in a ledger the snapshots and tests replay.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import ContractError
from .space import HyperConfig, SearchSpace, config_from_assignment, nearest_value

REWARD_TRANSFORMS = ("raw", "log10")
LOG_MSE_FLOOR = 1e-12
LOG_DIVERGENCE_REWARD = -12.0

# Policy: maps (state tuple, candidate actions) -> {action: probability}.
Policy = Callable[[tuple, Sequence], Mapping]


def reward_from_mse(mse: float, transform: str = "raw") -> float:
    """Monotone decreasing map from test MSE to reward."""
    if transform == "raw":
        return -mse
    if transform == "log10":
        return -math.log10(max(mse, LOG_MSE_FLOOR))
    raise ContractError(f"reward transform: unsupported value {transform!r}")


def penalized_reward(mse: Optional[float], diverged: bool, transform: str,
                     prior_rewards) -> float:
    """Reward for an outcome; failed trainings get a floor penalty.

    Divergence pays the worst reward seen so far minus 1 (raw mode) or the
    fixed log-mode floor.
    """
    if diverged or mse is None or not math.isfinite(mse):
        if transform == "log10":
            return LOG_DIVERGENCE_REWARD
        worst = min(prior_rewards, default=-1.0)
        return worst - 1.0
    return reward_from_mse(mse, transform)


def uniform_policy(state: tuple, actions: Sequence) -> dict:
    return {a: 1.0 / len(actions) for a in actions}


class TreeNode:
    """One state: the path of axis values fixed so far plus edge statistics."""

    __slots__ = ("state", "children", "n_visits", "action_visits", "action_value",
                 "expanded")

    def __init__(self, state: tuple):
        self.state = state
        self.children: dict = {}
        self.n_visits = 0
        self.action_visits: dict = {}
        self.action_value: dict = {}
        self.expanded = False


@dataclass(frozen=True)
class LedgerEntry:
    """One completed evaluation: leaf state, raw MSE, and applied reward."""

    state: tuple
    config: HyperConfig
    mse: Optional[float]
    diverged: bool
    reward: float
    transform: str
    origin: str            # "simulate" | "seed"
    snapped: tuple = ()    # ((axis, requested, used), ...) for off-grid seeds


def select(node: TreeNode, prior: Mapping, lam: float) -> object:
    """UCT argmax over the node's actions; see module docstring for ties."""
    if not node.expanded:
        raise ContractError("select requires an expanded node")
    actions = list(node.children)
    unvisited = [a for a in actions if node.action_visits[a] == 0]
    if unvisited:
        best = max(unvisited, key=lambda a: (prior.get(a, 0.0), -actions.index(a)))
        return best
    log_n = math.log(node.n_visits)
    best_action, best_score = None, -math.inf
    for a in actions:
        score = node.action_value[a] + lam * prior.get(a, 0.0) * math.sqrt(
            log_n / node.action_visits[a])
        if score > best_score:
            best_action, best_score = a, score
    return best_action


class SearchTree:
    """Mutable search state for one problem; single-writer, many readers."""

    def __init__(self, space: SearchSpace, reward_transform: str = "raw",
                 lam: float = 1.4):
        if reward_transform not in REWARD_TRANSFORMS:
            raise ContractError(
                f"reward transform: unsupported value {reward_transform!r}")
        self.space = space
        self.reward_transform = reward_transform
        self.lam = lam
        self.root = TreeNode(())
        self._nodes: dict[tuple, TreeNode] = {(): self.root}
        self.ledger: list[LedgerEntry] = []

    # -- structure -----------------------------------------------------------

    @property
    def n_axes(self) -> int:
        return len(self.space.axis_order)

    def is_terminal(self, state: tuple) -> bool:
        return len(state) == self.n_axes

    def node(self, state: tuple) -> TreeNode:
        try:
            return self._nodes[state]
        except KeyError:
            raise ContractError(f"state {state!r} not in tree") from None

    def expand(self, node: TreeNode) -> bool:
        """Create one child per allowed value of the next axis; counters zero.

        Terminal nodes are skipped (returns False).
        """
        if self.is_terminal(node.state):
            return False
        if node.expanded:
            raise ContractError("node already expanded")
        axis = self.space.axis_order[len(node.state)]
        for value in self.space.tree_values[axis]:
            child_state = node.state + (value,)
            child = TreeNode(child_state)
            node.children[value] = child
            node.action_visits[value] = 0
            node.action_value[value] = 0.0
            self._nodes[child_state] = child
        node.expanded = True
        return True

    def assignment(self, state: tuple) -> dict:
        return dict(zip(self.space.axis_order, state))

    def config_for(self, state: tuple, seed: Optional[int] = None) -> HyperConfig:
        if not self.is_terminal(state):
            raise ContractError("config requires a terminal state")
        return config_from_assignment(self.assignment(state), self.space.defaults,
                                      seed=seed)

    # -- search --------------------------------------------------------------

    def simulate(self, policy: Policy = uniform_policy,
                 rng: Optional[np.random.Generator] = None) -> tuple[tuple, HyperConfig]:
        """Walk select/expand from the root to a terminal state.

        The emitted config fills non-axis fields from the space defaults.
        ``rng`` is forwarded to policies that sample; the built-in policies
        are deterministic and ignore it.
        """
        node = self.root
        while not self.is_terminal(node.state):
            if not node.expanded:
                self.expand(node)
            actions = list(node.children)
            prior = policy(node.state, actions)
            action = select(node, prior, self.lam)
            node = node.children[action]
        return node.state, self.config_for(node.state)

    def backpropagate(self, leaf_state: tuple, reward: float, *,
                      config: Optional[HyperConfig] = None,
                      mse: Optional[float] = None, diverged: bool = False,
                      origin: str = "simulate", snapped: tuple = ()) -> None:
        """Increment visits and fold the reward into the running means."""
        if not self.is_terminal(leaf_state):
            raise ContractError("backpropagate requires a terminal state")
        node = self.node(leaf_state)  # raises if the leaf is unknown
        walk = self.root
        for value in leaf_state:
            if value not in walk.children:
                raise ContractError(f"action {value!r} missing under {walk.state!r}")
            walk.n_visits += 1
            n = walk.action_visits[value] + 1
            walk.action_visits[value] = n
            q = walk.action_value[value]
            walk.action_value[value] = q + (reward - q) / n
            walk = walk.children[value]
        walk.n_visits += 1
        self.ledger.append(LedgerEntry(
            state=leaf_state, config=config or self.config_for(leaf_state),
            mse=mse, diverged=diverged, reward=reward,
            transform=self.reward_transform, origin=origin, snapped=snapped))

    def snap_config(self, config: HyperConfig) -> tuple[tuple, tuple]:
        """Map a config onto the tree grid: (leaf state, ((axis, from, to), ...)).

        Off-grid numeric values snap to the nearest tree value (ties toward
        the smaller); does not mutate the tree.
        """
        state: list = []
        snapped: list[tuple] = []
        for axis in self.space.axis_order:
            requested = getattr(config, axis)
            values = self.space.tree_values[axis]
            used = requested if requested in values else nearest_value(values, requested)
            if used != requested:
                snapped.append((axis, requested, used))
            state.append(used)
        return tuple(state), tuple(snapped)

    def ensure_path(self, leaf: tuple) -> None:
        """Expand every node along the root-to-leaf path."""
        node = self.root
        for value in leaf:
            if not node.expanded:
                self.expand(node)
            node = node.children[value]

    def seed_config(self, config: HyperConfig, reward: float, *,
                    mse: Optional[float] = None,
                    diverged: bool = False) -> tuple:
        """Warm-start: materialize the config's path and back-propagate once."""
        leaf, snapped = self.snap_config(config)
        self.ensure_path(leaf)
        self.backpropagate(leaf, reward, config=self.config_for(leaf, seed=config.seed),
                           mse=mse, diverged=diverged, origin="seed",
                           snapped=snapped)
        return leaf

    def reward_for(self, mse: Optional[float], diverged: bool) -> float:
        """Transform an outcome into a reward; failures get a floor penalty."""
        return penalized_reward(mse, diverged, self.reward_transform,
                                (e.reward for e in self.ledger))

    def principal_path(self) -> tuple:
        """Greedy max-Q walk over visited actions; stops at the frontier."""
        node = self.root
        path: list = []
        while node.expanded:
            visited = [a for a in node.children if node.action_visits[a] > 0]
            if not visited:
                break
            best = max(visited, key=lambda a: node.action_value[a])
            path.append(best)
            node = node.children[best]
        return tuple(path)

    def best(self) -> Optional[tuple[HyperConfig, float]]:
        """Config with the lowest observed MSE (not the max-Q path)."""
        best_entry = None
        for entry in self.ledger:
            if entry.diverged or entry.mse is None:
                continue
            if best_entry is None or entry.mse < best_entry.mse:
                best_entry = entry
        if best_entry is None:
            return None
        return best_entry.config, best_entry.mse

    # -- export ----------------------------------------------------------------

    def snapshot(self) -> dict:
        def node_doc(node: TreeNode) -> dict:
            return {
                "n_visits": node.n_visits,
                "actions": {
                    repr(a): {
                        "visits": node.action_visits[a],
                        "q": node.action_value[a],
                        "child": node_doc(node.children[a]),
                    }
                    for a in node.children
                },
            }
        return {
            "axis_order": list(self.space.axis_order),
            "lambda": self.lam,
            "reward_transform": self.reward_transform,
            "root": node_doc(self.root),
            "ledger": [
                {
                    "state": [repr(v) for v in e.state],
                    "config": e.config.to_dict(),
                    "mse": e.mse if e.mse is None or math.isfinite(e.mse) else None,
                    "diverged": e.diverged,
                    "reward": e.reward,
                    "transform": e.transform,
                    "origin": e.origin,
                    "snapped": [list(s) for s in e.snapped],
                }
                for e in self.ledger
            ],
        }

    def save_snapshot(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.snapshot(), fh, indent=1)
