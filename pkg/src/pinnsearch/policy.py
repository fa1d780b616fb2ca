"""Planner priors and the optional chat-model config proposer.

The deterministic heuristic prior turns historical per-value rewards into a
softmax distribution over a node's actions, which keeps the whole pipeline
offline and bit-reproducible.  The chat path builds a versioned prompt,
extracts one fenced YAML block from the reply, validates it, allows a single
repair round, and otherwise signals fallback so the orchestrator can use tree
search instead.  Every request/reply pair is appended to a JSONL audit log.
"""
from __future__ import annotations

import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import httpx

from .catalog import FeatureLabels
from .errors import ConfigFormatError, ContractError, LlmFallback
from .features import Retrieved
from .space import HyperConfig, SearchSpace, from_yaml, to_yaml, validate

PROMPT_VERSION = "cfg-prompt-v1"


def validate_distribution(probs: Mapping, actions: Sequence) -> None:
    """Simplex check: support equals the action set, entries >= 0, sum ~ 1."""
    if set(probs) != set(actions):
        raise ContractError("distribution support must equal the action set")
    total = 0.0
    for a, p in probs.items():
        if p < 0.0:
            raise ContractError(f"negative probability for {a!r}")
        total += p
    if abs(total - 1.0) > 1e-9:
        raise ContractError(f"probabilities sum to {total}, expected 1")


def heuristic_prior(actions: Sequence, stats: Mapping, temperature: float = 1.0) -> dict:
    """Softmax over per-value mean rewards; uniform when no history exists.

    ``stats`` maps action value -> (count, mean reward) as produced by the
    run store.  Values without history score the mean of the observed scores,
    which keeps them competitive without dominating.
    """
    if temperature <= 0.0:
        raise ContractError(f"temperature must be positive, got {temperature}")
    known = {a: stats[a][1] for a in actions if a in stats and stats[a][0] > 0}
    if not known:
        return {a: 1.0 / len(actions) for a in actions}
    fill = sum(known.values()) / len(known)
    scores = [known.get(a, fill) / temperature for a in actions]
    peak = max(scores)
    weights = [math.exp(s - peak) for s in scores]
    total = sum(weights)
    return {a: w / total for a, w in zip(actions, weights)}


def make_heuristic_policy(db, axis_order: Sequence[str],
                          pde_filter: Optional[str | Sequence[str]] = None,
                          temperature: float = 1.0):
    """Tree policy closure: statistics are re-read per call, so fresh rewards
    appended to the store immediately steer later simulations."""
    def policy(state: tuple, actions: Sequence) -> dict:
        axis = axis_order[len(state)]
        return heuristic_prior(actions, db.axis_stats(pde_filter, axis), temperature)
    return policy


@dataclass(frozen=True)
class Feedback:
    """Outcome of the previous iteration threaded back into the planner."""

    best_mse: Optional[float]
    diverged: bool
    loss_summary: str


@dataclass(frozen=True)
class PlannerContext:
    pde_id: str
    labels: FeatureLabels
    residual_text: str
    retrieved: tuple[Retrieved, ...]
    tree_path: tuple
    iteration: int
    total_iterations: int
    feedback: Optional[Feedback] = None

    def __post_init__(self):
        if (self.feedback is None) != (self.iteration == 0):
            raise ContractError("feedback must be present exactly when iteration > 0")


def build_prompt(ctx: PlannerContext, space: SearchSpace) -> str:
    """Deterministic prompt: problem, grids, prior configs, feedback, format."""
    lines = [
        f"[{PROMPT_VERSION}] PINN hyperparameter planning, "
        f"iteration {ctx.iteration + 1} of {ctx.total_iterations}.",
        "",
        f"Problem: {ctx.pde_id}",
        f"Equation: {ctx.residual_text}",
        "Labels: " + json.dumps(ctx.labels.to_dict(), sort_keys=True),
        "",
        "Search space (choose values from these grids):",
    ]
    for axis in space.axis_order:
        values = ", ".join(str(v) for v in space.sample_values[axis])
        lines.append(f"  {axis}: {values}")
    lines.append("")
    if ctx.retrieved:
        lines.append("Best known configurations from similar solved problems:")
        for hit in ctx.retrieved:
            lines.append(f"- {hit.pde_id} (similarity {hit.score:.4f}, "
                         f"test MSE {hit.mse:.3e}):")
            lines.append("```yaml\n" + to_yaml(hit.config).rstrip() + "\n```")
    else:
        lines.append("No similar solved problems were found in the database.")
    lines.append("")
    if ctx.feedback is not None:
        fb = ctx.feedback
        mse_text = "diverged" if fb.best_mse is None else f"{fb.best_mse:.6e}"
        lines.append("Feedback from the previous iteration:")
        lines.append(f"  best test MSE: {mse_text}")
        lines.append(f"  any run diverged: {fb.diverged}")
        lines.append(f"  training loss: {fb.loss_summary}")
        lines.append("")
    if ctx.tree_path:
        lines.append("Currently preferred partial assignment: "
                     + json.dumps([repr(v) for v in ctx.tree_path]))
        lines.append("")
    lines.append(
        "Reply with exactly one fenced YAML block containing the keys "
        "net_type, activation, width, depth, optimizer, initializer, "
        "learning_rate, n_domain, n_boundary, n_initial, "
        "loss_weights {pde, bc, ic}, train_iters, seed. "
        "Choose the configuration you expect to minimize test MSE.")
    return "\n".join(lines)


@dataclass
class LlmSettings:
    """OpenAI-compatible chat endpoint settings; credential via env by default."""

    endpoint_url: str = "http://localhost:8000/v1"
    model: str = "gpt-4"
    api_key_env: str = "PINNSEARCH_LLM_API_KEY"
    timeout_s: float = 30.0
    temperature: float = 0.7
    max_in_flight: int = 2
    prompts_log: Optional[str] = None
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._gate = threading.Semaphore(self.max_in_flight)

    @property
    def api_key(self) -> str:
        return os.environ.get(self.api_key_env, "")


_FENCE = re.compile(r"```(?:yaml|yml)?\s*\n(.*?)```", re.DOTALL)


def extract_yaml_block(text: str) -> str:
    match = _FENCE.search(text)
    if match is None:
        raise LlmFallback("reply contains no fenced YAML block")
    return match.group(1)


def _log_exchange(settings: LlmSettings, messages, reply: Optional[str],
                  note: str) -> None:
    if not settings.prompts_log:
        return
    entry = {"ts": time.time(), "model": settings.model, "note": note,
             "messages": messages, "reply": reply}
    with open(settings.prompts_log, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry) + "\n")


def _chat(settings: LlmSettings, messages, client: Optional[httpx.Client]) -> str:
    payload = {
        "model": settings.model,
        "messages": messages,
        "temperature": settings.temperature,
    }
    headers = {"Content-Type": "application/json"}
    if settings.api_key:
        headers["Authorization"] = f"Bearer {settings.api_key}"
    url = settings.endpoint_url.rstrip("/") + "/chat/completions"
    owns_client = client is None
    if owns_client:
        client = httpx.Client(timeout=settings.timeout_s)
    try:
        with settings._gate:
            response = client.post(url, json=payload, headers=headers)
        response.raise_for_status()
        doc = response.json()
        return doc["choices"][0]["message"]["content"]
    except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
        raise LlmFallback(f"chat endpoint failure: {exc}") from exc
    finally:
        if owns_client:
            client.close()


def _parse_reply(reply: str, space: SearchSpace):
    """(config, []) on success, else (None, problem descriptions)."""
    try:
        config = from_yaml(extract_yaml_block(reply))
    except LlmFallback as exc:
        return None, [str(exc)]
    except ConfigFormatError as exc:
        return None, [str(exc)]
    return (config, []) if not (v := validate(config, space)) else (None, v)


def llm_propose(ctx: PlannerContext, space: SearchSpace, settings: LlmSettings,
                client: Optional[httpx.Client] = None) -> HyperConfig:
    """One proposal with a single repair round; raises LlmFallback otherwise.

    Parse failures and grid violations both trigger the repair round.  The
    returned config always passes validation against the full grids.
    """
    prompt = build_prompt(ctx, space)
    messages = [{"role": "user", "content": prompt}]
    try:
        reply = _chat(settings, messages, client)
    except LlmFallback:
        _log_exchange(settings, messages, None, "endpoint failure")
        raise
    _log_exchange(settings, messages, reply, "proposal")
    config, problems = _parse_reply(reply, space)
    if config is not None:
        return config
    repair = ("The previous reply was not usable:\n- " + "\n- ".join(problems)
              + "\nReply again with exactly one corrected fenced YAML block.")
    messages = messages + [{"role": "assistant", "content": reply},
                           {"role": "user", "content": repair}]
    try:
        reply = _chat(settings, messages, client)
    except LlmFallback:
        _log_exchange(settings, messages, None, "endpoint failure on repair")
        raise
    _log_exchange(settings, messages, reply, "repair")
    config, problems = _parse_reply(reply, space)
    if config is None:
        _log_exchange(settings, messages, reply, "fallback")
        raise LlmFallback("unusable after repair: " + "; ".join(problems))
    return config
