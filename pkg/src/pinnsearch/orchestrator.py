"""End-to-end search loop plus the comparison baselines.

optimize: retrieve best configs of similar solved problems, train and seed
them into the tree, then run N revise iterations of tree-guided proposals,
feeding each iteration's outcome back into the planner context.  Baselines
(uniform random, per-axis TPE-style) receive identical training budgets so
reported numbers are comparable.

All randomness flows from one master seed per repeat, split hierarchically;
worker threads only parallelize trainings that are independent by
construction (bootstrap, random baseline, retrieval seeds, prior-sampling
ablation arm), and results are applied in proposal order, so run ledgers are
identical for any worker count.
"""
from __future__ import annotations

import dataclasses
import json
import math
import shutil
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import features
from .catalog import PdeSpec, get_pde
from .db import ExperimentDb, RunRecord
from .errors import ContractError, LlmFallback
from .features import DEFAULT_SCHEME, WeightScheme
from .policy import (Feedback, LlmSettings, PlannerContext, heuristic_prior,
                     make_heuristic_policy)
from .space import (HyperConfig, SearchSpace, config_from_assignment, desk_space,
                    random_sample)
from .trainer import train
from .tree_search import SearchTree, penalized_reward


@dataclass(frozen=True)
class OptimizeSettings:
    pde_id: str
    db_path: str
    iterations: int = 5
    simulations: int = 4
    topk: int = 1
    lam: float = 1.4
    policy_mode: str = "heuristic"          # heuristic | llm
    reward_transform: str = "raw"
    seeds: tuple[int, ...] = tuple(range(10))
    workers: int = 1
    space: Optional[SearchSpace] = None     # None -> desk-scale space
    scheme: WeightScheme = DEFAULT_SCHEME
    temperature: float = 1.0
    llm: Optional[LlmSettings] = None
    artifacts_dir: Optional[str] = None     # default: "<db_path>.artifacts"

    def __post_init__(self):
        if self.iterations < 1 or self.simulations < 1 or self.topk < 0:
            raise ContractError("iterations, simulations >= 1 and topk >= 0 required")
        if self.policy_mode not in ("heuristic", "llm"):
            raise ContractError(f"policy mode: unsupported value {self.policy_mode!r}")


@dataclass
class OptimizeOutcome:
    pde_id: str
    seed: int
    best_config: Optional[HyperConfig]
    best_mse: float
    best_so_far: list[float]        # after seeding, then after each iteration
    total_trainings: int
    tree_snapshot_path: Optional[str] = None


def _resolve_space(settings_space: Optional[SearchSpace], pde: PdeSpec) -> SearchSpace:
    if settings_space is not None:
        return settings_space
    return desk_space(pde.time_dependent)


def _seed_stream(master_seed: int, label: str) -> np.random.Generator:
    # crc32 is stable across processes (unlike hash(), which is salted)
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, zlib.crc32(label.encode())]))


def _train_seed_sequence(master_seed: int) -> Callable[[], int]:
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, 0x7261]))
    def next_seed() -> int:
        return int(rng.integers(2 ** 32))
    return next_seed


def _pmap(fn, items: Sequence, workers: int) -> list:
    """Order-preserving map; threads only when both sides allow it."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _train_one(pde: PdeSpec, config: HyperConfig):
    report = train(pde, config)
    mse = report.test_mse if math.isfinite(report.test_mse) else None
    return report, mse


def optimize(settings: OptimizeSettings) -> list[OptimizeOutcome]:
    """Run every configured repeat; returns per-seed outcomes in seed order."""
    db = ExperimentDb(settings.db_path)
    return [optimize_seed(settings, seed, db) for seed in settings.seeds]


def optimize_seed(settings: OptimizeSettings, master_seed: int,
                  db: Optional[ExperimentDb] = None,
                  extra_first_iteration: int = 0,
                  topk_override: Optional[int] = None) -> OptimizeOutcome:
    """One full search for one master seed.

    ``extra_first_iteration`` adds proposals to iteration 1 (used by the
    ablation arms to equalize budgets when retrieval is disabled).
    """
    pde = get_pde(settings.pde_id)
    if db is None:
        db = ExperimentDb(settings.db_path)
    space = _resolve_space(settings.space, pde)
    topk = settings.topk if topk_override is None else topk_override
    tree = SearchTree(space, settings.reward_transform, settings.lam)
    next_train_seed = _train_seed_sequence(master_seed)
    policy_rng = _seed_stream(master_seed, "policy")
    policy = make_heuristic_policy(db, space.axis_order,
                                   temperature=settings.temperature)
    run_log_path = _artifact_path(settings, f"runlog-{pde.id}-s{master_seed}.jsonl")
    trained: list[RunRecord] = []
    best_so_far: list[float] = []

    def best_mse_now() -> float:
        vals = [r.mse for r in trained if r.mse is not None and not r.diverged]
        return min(vals) if vals else math.inf

    # Step 1: retrieval warm start (skipped when the database has no candidates).
    retrieved = features.top_k(pde.labels, db, topk, settings.scheme,
                               exclude=pde.id) if topk > 0 else []
    seed_plans = []
    for hit in retrieved:
        leaf, snaps = tree.snap_config(hit.config)
        seed_plans.append((hit, leaf, snaps,
                           tree.config_for(leaf, seed=next_train_seed())))
    results = _pmap(lambda plan: _train_one(pde, plan[3]), seed_plans,
                    settings.workers)
    for (hit, leaf, snaps, config), (report, mse) in zip(seed_plans, results):
        reward = tree.reward_for(mse, report.diverged)
        tree.ensure_path(leaf)
        tree.backpropagate(leaf, reward, config=config, mse=mse,
                           diverged=report.diverged, origin="seed", snapped=snaps)
        trained.append(db.add(
            pde_id=pde.id, labels=pde.labels, config=config, mse=mse,
            reward=reward, reward_transform=settings.reward_transform,
            diverged=report.diverged, provenance="seeded-retrieval", iteration=0,
            wall_time_s=report.wall_time_s, seed=master_seed))
    best_so_far.append(best_mse_now())

    # Steps 2-4: iterate propose -> train -> revise.
    feedback: Optional[Feedback] = None
    last_report = None
    for t in range(1, settings.iterations + 1):
        ctx = PlannerContext(
            pde_id=pde.id, labels=pde.labels, residual_text=pde.description,
            retrieved=tuple(retrieved), tree_path=tree.principal_path(),
            iteration=t - 1, total_iterations=settings.iterations,
            feedback=feedback)
        _append_jsonl(run_log_path, {
            "iteration": t,
            "feedback_best_mse": None if feedback is None else feedback.best_mse,
            "feedback_diverged": None if feedback is None else feedback.diverged,
        })
        n_proposals = settings.simulations + (extra_first_iteration if t == 1 else 0)
        iteration_mses: list[Optional[float]] = []
        for _ in range(n_proposals):
            config = None
            provenance = "mtrs"
            leaf = None
            if settings.policy_mode == "llm":
                try:
                    proposed = llm_propose_for(ctx, space, settings)
                    config = dataclasses.replace(
                        proposed, seed=next_train_seed(),
                        train_iters=space.defaults.train_iters,
                        loss_weights=space.defaults.loss_weights)
                    leaf, snaps = tree.snap_config(config)
                    provenance = "llm"
                except LlmFallback:
                    config = None
            if config is None:
                leaf, config = tree.simulate(policy, policy_rng)
                config = dataclasses.replace(config, seed=next_train_seed())
                snaps = ()
                provenance = "mtrs"
            report, mse = _train_one(pde, config)
            last_report = report
            reward = tree.reward_for(mse, report.diverged)
            tree.ensure_path(leaf)
            tree.backpropagate(leaf, reward, config=config, mse=mse,
                               diverged=report.diverged,
                               origin="simulate" if provenance == "mtrs" else "llm",
                               snapped=snaps)
            trained.append(db.add(
                pde_id=pde.id, labels=pde.labels, config=config, mse=mse,
                reward=reward, reward_transform=settings.reward_transform,
                diverged=report.diverged, provenance=provenance, iteration=t,
                wall_time_s=report.wall_time_s, seed=master_seed))
            iteration_mses.append(mse)
        finite = [m for m in iteration_mses if m is not None]
        feedback = Feedback(
            best_mse=min(finite) if finite else None,
            diverged=any(m is None for m in iteration_mses),
            loss_summary=_loss_summary(last_report))
        best_so_far.append(best_mse_now())

    snapshot_path = _artifact_path(settings, f"tree-{pde.id}-s{master_seed}.json")
    tree.save_snapshot(snapshot_path)
    best = _best_record(trained)
    return OptimizeOutcome(
        pde_id=pde.id, seed=master_seed,
        best_config=best.config if best else None,
        best_mse=best.mse if best else math.inf,
        best_so_far=best_so_far, total_trainings=len(trained),
        tree_snapshot_path=snapshot_path)


def llm_propose_for(ctx: PlannerContext, space: SearchSpace,
                    settings: OptimizeSettings) -> HyperConfig:
    from .policy import llm_propose
    if settings.llm is None:
        raise LlmFallback("no chat endpoint configured")
    return llm_propose(ctx, space, settings.llm)


def _loss_summary(report) -> str:
    if report is None:
        return "no training yet"
    curve = report.loss_curve
    first = curve[0][1] if curve else math.nan
    last = curve[-1][1] if curve else math.nan
    return f"loss {first:.3e} -> {last:.3e} over {curve[-1][0] if curve else 0} iters"


def _best_record(records: Sequence[RunRecord]) -> Optional[RunRecord]:
    best = None
    for rec in records:
        if rec.diverged or rec.mse is None:
            continue
        if best is None or rec.mse < best.mse:
            best = rec
    return best


def _artifact_path(settings: OptimizeSettings, name: str) -> str:
    import os
    base = settings.artifacts_dir or (settings.db_path + ".artifacts")
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, name)


def _append_jsonl(path: str, doc: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(doc) + "\n")


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def baseline_random(pde_id: str, budget: int, master_seed: int,
                    db: ExperimentDb, space: Optional[SearchSpace] = None,
                    workers: int = 1,
                    reward_transform: str = "raw") -> OptimizeOutcome:
    """Uniform independent draws, identical budget accounting to optimize."""
    if budget < 1:
        raise ContractError("budget must be >= 1")
    pde = get_pde(pde_id)
    space = _resolve_space(space, pde)
    rng = _seed_stream(master_seed, "random-baseline")
    configs = [random_sample(space, rng) for _ in range(budget)]
    results = _pmap(lambda c: _train_one(pde, c), configs, workers)
    trained, best_so_far, rewards = [], [], []
    for i, (config, (report, mse)) in enumerate(zip(configs, results), start=1):
        reward = penalized_reward(mse, report.diverged, reward_transform, rewards)
        rewards.append(reward)
        trained.append(db.add(
            pde_id=pde.id, labels=pde.labels, config=config, mse=mse,
            reward=reward, reward_transform=reward_transform,
            diverged=report.diverged, provenance="random", iteration=i,
            wall_time_s=report.wall_time_s, seed=master_seed))
        finite = [r.mse for r in trained if r.mse is not None and not r.diverged]
        best_so_far.append(min(finite) if finite else math.inf)
    best = _best_record(trained)
    return OptimizeOutcome(pde_id=pde.id, seed=master_seed,
                           best_config=best.config if best else None,
                           best_mse=best.mse if best else math.inf,
                           best_so_far=best_so_far, total_trainings=len(trained))


def baseline_tpe(pde_id: str, budget: int, master_seed: int,
                 db: ExperimentDb, space: Optional[SearchSpace] = None,
                 reward_transform: str = "raw") -> OptimizeOutcome:
    """Per-axis categorical TPE-style baseline.

    First quarter of the budget (minimum 4) is uniform warmup.  Afterwards
    the history splits at the median reward and each axis value is sampled
    proportionally to (good_count + 1) / (bad_count + 1).
    """
    if budget < 4:
        raise ContractError("tpe baseline requires budget >= 4")
    pde = get_pde(pde_id)
    space = _resolve_space(space, pde)
    rng = _seed_stream(master_seed, "tpe-baseline")
    warmup = max(4, budget // 4)
    history: list[tuple[HyperConfig, float]] = []
    trained, best_so_far = [], []
    for i in range(1, budget + 1):
        if i <= warmup:
            config = random_sample(space, rng)
        else:
            config = _tpe_propose(space, history, rng)
        report, mse = _train_one(pde, config)
        reward = penalized_reward(mse, report.diverged, reward_transform,
                                  (r for _, r in history))
        history.append((config, reward))
        trained.append(db.add(
            pde_id=pde.id, labels=pde.labels, config=config, mse=mse,
            reward=reward, reward_transform=reward_transform,
            diverged=report.diverged, provenance="tpe", iteration=i,
            wall_time_s=report.wall_time_s, seed=master_seed))
        finite = [r.mse for r in trained if r.mse is not None and not r.diverged]
        best_so_far.append(min(finite) if finite else math.inf)
    best = _best_record(trained)
    return OptimizeOutcome(pde_id=pde.id, seed=master_seed,
                           best_config=best.config if best else None,
                           best_mse=best.mse if best else math.inf,
                           best_so_far=best_so_far, total_trainings=len(trained))


def tpe_axis_scores(values: Sequence, axis: str,
                    history: Sequence[tuple[HyperConfig, float]]) -> list[float]:
    """(good+1)/(bad+1) per value, splitting history at the median reward."""
    rewards = sorted(r for _, r in history)
    median = rewards[len(rewards) // 2] if len(rewards) % 2 else \
        0.5 * (rewards[len(rewards) // 2 - 1] + rewards[len(rewards) // 2])
    scores = []
    for v in values:
        good = sum(1 for c, r in history if getattr(c, axis) == v and r >= median)
        bad = sum(1 for c, r in history if getattr(c, axis) == v and r < median)
        scores.append((good + 1) / (bad + 1))
    return scores


def _tpe_propose(space: SearchSpace, history, rng: np.random.Generator) -> HyperConfig:
    assignment = {}
    for axis in space.axis_order:
        values = space.sample_values[axis]
        scores = np.array(tpe_axis_scores(values, axis, history))
        probs = scores / scores.sum()
        assignment[axis] = values[int(rng.choice(len(values), p=probs))]
    return config_from_assignment(assignment, space.defaults,
                                  seed=int(rng.integers(2 ** 32)))


# ---------------------------------------------------------------------------
# Ablation
# ---------------------------------------------------------------------------

ABLATION_ARMS = ("full", "no-retrieval", "no-retrieval-no-tree")


def ablate(settings: OptimizeSettings) -> dict[str, list[OptimizeOutcome]]:
    """Three equal-budget arms on separate copies of the starting database.

    full: retrieval + tree search.  no-retrieval: tree search only, with the
    retrieval budget folded into iteration 1.  no-retrieval-no-tree:
    independent draws from the heuristic prior frozen at arm start (no
    memory), same total budget.
    """
    import os
    outcomes: dict[str, list[OptimizeOutcome]] = {}
    for arm in ABLATION_ARMS:
        arm_db_path = f"{settings.db_path}.ablate-{arm}.jsonl"
        if os.path.exists(arm_db_path):
            os.remove(arm_db_path)
        if os.path.exists(settings.db_path):
            shutil.copy(settings.db_path, arm_db_path)
        arm_settings = dataclasses.replace(settings, db_path=arm_db_path)
        db = ExperimentDb(arm_db_path)
        runs = []
        for seed in settings.seeds:
            if arm == "full":
                runs.append(optimize_seed(arm_settings, seed, db))
            elif arm == "no-retrieval":
                runs.append(optimize_seed(arm_settings, seed, db,
                                          extra_first_iteration=settings.topk,
                                          topk_override=0))
            else:
                runs.append(_policy_sampling_arm(arm_settings, seed, db))
        outcomes[arm] = runs
    return outcomes


def _policy_sampling_arm(settings: OptimizeSettings, master_seed: int,
                         db: ExperimentDb) -> OptimizeOutcome:
    """Prior-only sampling: no retrieval, no tree statistics."""
    pde = get_pde(settings.pde_id)
    space = _resolve_space(settings.space, pde)
    rng = _seed_stream(master_seed, "policy-arm")
    next_train_seed = _train_seed_sequence(master_seed)
    stats = {axis: db.axis_stats(None, axis) for axis in space.axis_order}

    def draw() -> HyperConfig:
        assignment = {}
        for axis in space.axis_order:
            values = space.tree_values[axis]
            prior = heuristic_prior(values, stats[axis], settings.temperature)
            probs = np.array([prior[v] for v in values])
            assignment[axis] = values[int(rng.choice(len(values), p=probs))]
        return config_from_assignment(assignment, space.defaults,
                                      seed=next_train_seed())

    trained, best_so_far, rewards = [], [], []
    budget_per_iter = [settings.simulations] * settings.iterations
    budget_per_iter[0] += settings.topk
    configs = [(t + 1, draw()) for t, n in enumerate(budget_per_iter)
               for _ in range(n)]
    results = _pmap(lambda item: _train_one(pde, item[1]), configs, settings.workers)
    for (iteration, config), (report, mse) in zip(configs, results):
        reward = penalized_reward(mse, report.diverged,
                                  settings.reward_transform, rewards)
        rewards.append(reward)
        trained.append(db.add(
            pde_id=pde.id, labels=pde.labels, config=config, mse=mse,
            reward=reward, reward_transform=settings.reward_transform,
            diverged=report.diverged, provenance="policy", iteration=iteration,
            wall_time_s=report.wall_time_s, seed=master_seed))
        finite = [r.mse for r in trained if r.mse is not None and not r.diverged]
        best_so_far.append(min(finite) if finite else math.inf)
    best = _best_record(trained)
    return OptimizeOutcome(pde_id=pde.id, seed=master_seed,
                           best_config=best.config if best else None,
                           best_mse=best.mse if best else math.inf,
                           best_so_far=best_so_far, total_trainings=len(trained))


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def _sci(x: float) -> str:
    return f"{x:.2E}"


def report(db: ExperimentDb, pde_filter: Optional[str] = None) -> tuple[str, str]:
    """(table text, CSV text): per (pde, provenance) mean/std of per-seed best MSE."""
    groups: dict[tuple[str, str], dict[int, float]] = {}
    for rec in db.records:
        if pde_filter is not None and rec.pde_id != pde_filter:
            continue
        if rec.diverged or rec.mse is None:
            continue
        seed_best = groups.setdefault((rec.pde_id, rec.provenance), {})
        seed_best[rec.seed] = min(seed_best.get(rec.seed, math.inf), rec.mse)
    header = f"{'pde':<12}{'method':<20}{'seeds':>6}{'best-MSE mean (std)':>28}{'overall best':>16}"
    lines = [header, "-" * len(header)]
    csv_lines = ["pde,method,seeds,mean_best_mse,std_best_mse,overall_best_mse"]
    for (pde_id, provenance) in sorted(groups):
        per_seed = list(groups[(pde_id, provenance)].values())
        mean = float(np.mean(per_seed))
        std = float(np.std(per_seed))  # population std; single seed -> 0
        best = float(np.min(per_seed))
        lines.append(f"{pde_id:<12}{provenance:<20}{len(per_seed):>6}"
                     f"{_sci(mean) + ' (±' + _sci(std) + ')':>28}{_sci(best):>16}")
        csv_lines.append(f"{pde_id},{provenance},{len(per_seed)},"
                         f"{mean!r},{std!r},{best!r}")
    if len(lines) == 2:
        lines.append("(no matching runs)")
    return "\n".join(lines) + "\n", "\n".join(csv_lines) + "\n"


# ---------------------------------------------------------------------------
# Bootstrap corpus
# ---------------------------------------------------------------------------

def bootstrap(db: ExperimentDb, n_runs: int, master_seed: int = 0,
              pde_ids: Optional[Sequence[str]] = None,
              space_factory: Callable[[bool], SearchSpace] = desk_space,
              workers: int = 1,
              reward_transform: str = "raw") -> int:
    """Train n_runs random configs per catalog problem; returns record count."""
    if n_runs < 1:
        raise ContractError("n_runs must be >= 1")
    from .catalog import list_pdes
    pdes = [get_pde(p) for p in pde_ids] if pde_ids else list_pdes()
    total = 0
    for pde in pdes:
        space = space_factory(pde.time_dependent)
        rng = _seed_stream(master_seed, f"bootstrap-{pde.id}")
        configs = [random_sample(space, rng) for _ in range(n_runs)]
        results = _pmap(lambda c: _train_one(pde, c), configs, workers)
        rewards: list[float] = []
        for i, (config, (rep, mse)) in enumerate(zip(configs, results), start=1):
            reward = penalized_reward(mse, rep.diverged, reward_transform, rewards)
            rewards.append(reward)
            db.add(pde_id=pde.id, labels=pde.labels, config=config, mse=mse,
                   reward=reward, reward_transform=reward_transform,
                   diverged=rep.diverged, provenance="bootstrap", iteration=i,
                   wall_time_s=rep.wall_time_s, seed=master_seed)
            total += 1
    return total
