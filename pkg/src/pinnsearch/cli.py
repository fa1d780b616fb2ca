"""Command-line interface.

Exit code 0 on success; contract and I/O failures exit nonzero with the error
on stderr.  Chat-endpoint credentials come only from environment variables.
"""
from __future__ import annotations

import json
import sys

import click

from . import catalog, features, orchestrator
from .db import ExperimentDb
from .errors import ConfigFormatError, ContractError, DatabaseError
from .policy import LlmSettings
from .space import default_space, desk_space, from_yaml
from .trainer import train


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _space_option(name: str, time_dependent: bool):
    if name == "desk":
        return desk_space(time_dependent)
    if name == "paper":
        return default_space(time_dependent)
    raise ContractError(f"space: unsupported value {name!r}")


def _parse_seeds(seeds: str) -> tuple[int, ...]:
    """'10' means ten repeats (seeds 0..9); '0,3,7' or '0,' means those seeds."""
    if "," in seeds:
        return tuple(int(s) for s in seeds.split(",") if s.strip())
    return tuple(range(int(seeds)))


@click.group()
def main():
    """PINN hyperparameter search tools."""


@main.group()
def catalog_cmd():
    """Benchmark problem catalog."""


main.add_command(catalog_cmd, name="catalog")


@catalog_cmd.command("list")
def catalog_list():
    """Print one JSON object per built-in problem."""
    for pde in catalog.list_pdes():
        click.echo(json.dumps({
            "id": pde.id,
            "labels": pde.labels.to_dict(),
            "domain": [list(b) for b in pde.domain],
            "description": pde.description,
        }, sort_keys=True))


@main.command()
@click.argument("pde_id")
@click.option("--scheme", "scheme_path", type=click.Path(exists=True), default=None)
def encode(pde_id, scheme_path):
    """Print a problem's feature vector as JSON."""
    try:
        scheme = _load_scheme(scheme_path)
        pde = catalog.get_pde(pde_id)
        vec = features.encode(pde.labels, scheme)
    except (ContractError, OSError) as exc:
        _fail(exc)
    click.echo(json.dumps({"pde_id": pde_id, "vector": vec.tolist()}))


def _load_scheme(path):
    if path is None:
        return features.DEFAULT_SCHEME
    with open(path, "r", encoding="utf-8") as fh:
        return features.scheme_from_yaml(fh.read())


@main.command()
@click.argument("pde_id")
@click.option("--top-k", "top_k", type=int, default=1, show_default=True)
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--scheme", "scheme_path", type=click.Path(exists=True), default=None)
def similar(pde_id, top_k, db_path, scheme_path):
    """Print the ranked retrieval list as JSON lines."""
    try:
        scheme = _load_scheme(scheme_path)
        pde = catalog.get_pde(pde_id)
        db = ExperimentDb(db_path)
        hits = features.top_k(pde.labels, db, top_k, scheme, exclude=pde.id)
    except (ContractError, DatabaseError, OSError) as exc:
        _fail(exc)
    for hit in hits:
        click.echo(json.dumps({
            "pde_id": hit.pde_id, "similarity": hit.score,
            "best_mse": hit.mse, "config": hit.config.to_dict(),
        }, sort_keys=True))


@main.command("train")
@click.argument("pde_id")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
def train_cmd(pde_id, config_path, out_path):
    """Train one PINN from a YAML config and emit the report JSON."""
    try:
        pde = catalog.get_pde(pde_id)
        with open(config_path, "r", encoding="utf-8") as fh:
            config = from_yaml(fh.read())
        report = train(pde, config)
    except (ContractError, ConfigFormatError, OSError) as exc:
        _fail(exc)
    doc = json.dumps(report.to_dict(), indent=1)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(doc + "\n")
    click.echo(f"test_mse={report.test_mse:.6e} diverged={report.diverged} "
               f"wall={report.wall_time_s:.2f}s")
    if not out_path:
        click.echo(doc)


@main.command("bootstrap")
@click.option("--runs", type=int, default=10, show_default=True)
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--space", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.option("--pde", "pde_ids", multiple=True,
              help="Restrict to specific problems (repeatable).")
@click.option("--workers", type=int, default=1, show_default=True)
def bootstrap_cmd(runs, db_path, seed, space, pde_ids, workers):
    """Populate a database with random-config training runs."""
    try:
        db = ExperimentDb(db_path)
        factory = desk_space if space == "desk" else default_space
        n = orchestrator.bootstrap(db, runs, seed, pde_ids or None,
                                   space_factory=factory, workers=workers)
    except (ContractError, DatabaseError) as exc:
        _fail(exc)
    click.echo(f"appended {n} bootstrap runs to {db_path}")


@main.command()
@click.argument("pde_id")
@click.option("--iters", type=int, default=5, show_default=True)
@click.option("--sims", type=int, default=4, show_default=True)
@click.option("--top-k", "topk", type=int, default=1, show_default=True)
@click.option("--policy", "policy_mode", type=click.Choice(["heuristic", "llm"]),
              default="heuristic", show_default=True)
@click.option("--lambda", "lam", type=float, default=1.4, show_default=True)
@click.option("--reward", "reward_transform", type=click.Choice(["raw", "log"]),
              default="raw", show_default=True)
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--seeds", default="10", show_default=True,
              help="Repeat count, or an explicit list like '0,1,2'.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--space", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.option("--llm-endpoint", default=None, help="OpenAI-compatible base URL.")
@click.option("--llm-model", default="gpt-4", show_default=True)
def optimize(pde_id, iters, sims, topk, policy_mode, lam, reward_transform,
             db_path, seeds, workers, space, llm_endpoint, llm_model):
    """Search for a good configuration for PDE_ID."""
    try:
        pde = catalog.get_pde(pde_id)
        llm = None
        if policy_mode == "llm":
            llm = LlmSettings(endpoint_url=llm_endpoint or "http://localhost:8000/v1",
                              model=llm_model,
                              prompts_log=f"{db_path}.prompts.jsonl")
        settings = orchestrator.OptimizeSettings(
            pde_id=pde_id, db_path=db_path, iterations=iters, simulations=sims,
            topk=topk, lam=lam, policy_mode=policy_mode,
            reward_transform="log10" if reward_transform == "log" else "raw",
            seeds=_parse_seeds(seeds), workers=workers,
            space=_space_option(space, pde.time_dependent), llm=llm)
        outcomes = orchestrator.optimize(settings)
    except (ContractError, DatabaseError) as exc:
        _fail(exc)
    for out in outcomes:
        click.echo(f"seed {out.seed}: best MSE {out.best_mse:.6e} "
                   f"({out.total_trainings} trainings, tree: {out.tree_snapshot_path})")
    best = min(outcomes, key=lambda o: o.best_mse)
    if best.best_config is not None:
        click.echo("best config:")
        click.echo(json.dumps(best.best_config.to_dict(), indent=1))


@main.command()
@click.argument("pde_id")
@click.option("--method", type=click.Choice(["random", "tpe"]), required=True)
@click.option("--budget", type=int, required=True)
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--seeds", default="10", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--space", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
def baseline(pde_id, method, budget, db_path, seeds, workers, space):
    """Run a baseline search with an explicit training budget."""
    try:
        pde = catalog.get_pde(pde_id)
        sp = _space_option(space, pde.time_dependent)
        db = ExperimentDb(db_path)
        for seed in _parse_seeds(seeds):
            if method == "random":
                out = orchestrator.baseline_random(pde_id, budget, seed, db, sp,
                                                   workers=workers)
            else:
                out = orchestrator.baseline_tpe(pde_id, budget, seed, db, sp)
            click.echo(f"seed {seed}: best MSE {out.best_mse:.6e}")
    except (ContractError, DatabaseError) as exc:
        _fail(exc)


@main.command()
@click.argument("pde_id")
@click.option("--iters", type=int, default=5, show_default=True)
@click.option("--sims", type=int, default=4, show_default=True)
@click.option("--top-k", "topk", type=int, default=1, show_default=True)
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--seeds", default="5", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--space", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
def ablate(pde_id, iters, sims, topk, db_path, seeds, workers, space):
    """Run the three-arm ablation with equal training budgets."""
    try:
        pde = catalog.get_pde(pde_id)
        settings = orchestrator.OptimizeSettings(
            pde_id=pde_id, db_path=db_path, iterations=iters, simulations=sims,
            topk=topk, seeds=_parse_seeds(seeds), workers=workers,
            space=_space_option(space, pde.time_dependent))
        outcomes = orchestrator.ablate(settings)
    except (ContractError, DatabaseError) as exc:
        _fail(exc)
    for arm, runs in outcomes.items():
        mses = sorted(r.best_mse for r in runs)
        median = mses[len(mses) // 2]
        click.echo(f"{arm}: median best MSE {median:.6e} over {len(runs)} seeds "
                   f"({runs[0].total_trainings} trainings each)")


@main.command("report")
@click.option("--db", "db_path", required=True, type=click.Path(exists=True))
@click.option("--pde", "pde_id", default=None)
@click.option("--csv", "csv_path", default=None, type=click.Path())
def report_cmd(db_path, pde_id, csv_path):
    """Summarize per-(pde, method) best-MSE statistics across seeds."""
    try:
        db = ExperimentDb(db_path)
        text, csv_text = orchestrator.report(db, pde_id)
        if csv_path:
            with open(csv_path, "w", encoding="utf-8") as fh:
                fh.write(csv_text)
    except (DatabaseError, OSError) as exc:
        _fail(exc)
    click.echo(text, nl=False)


if __name__ == "__main__":
    main()
