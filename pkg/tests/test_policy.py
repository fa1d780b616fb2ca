import json
import math
import os

import httpx
import pytest

from pinnsearch import catalog
from pinnsearch.errors import ContractError, LlmFallback
from pinnsearch.features import Retrieved
from pinnsearch.policy import (Feedback, LlmSettings, PlannerContext, build_prompt,
                               extract_yaml_block, heuristic_prior, llm_propose,
                               validate_distribution)
from pinnsearch.space import HyperConfig, desk_space, to_yaml

GOLDEN = os.path.join(os.path.dirname(__file__), "data", "prompt_v1.txt")


def _config(**kw):
    base = dict(net_type="fnn", activation="tanh", width=32, depth=4,
                optimizer="adam", initializer="glorot_normal", learning_rate=1e-3,
                n_domain=600, n_boundary=100, n_initial=0, seed=1)
    base.update(kw)
    return HyperConfig(**base)


def _ctx(iteration=0, retrieved=(), feedback=None):
    pde = catalog.get_pde("poisson1d")
    return PlannerContext(
        pde_id=pde.id, labels=pde.labels, residual_text=pde.description,
        retrieved=tuple(retrieved), tree_path=(), iteration=iteration,
        total_iterations=5, feedback=feedback)


def test_heuristic_prior_uniform_on_empty_stats():
    prior = heuristic_prior(["a", "b", "c"], {})
    assert prior == {"a": pytest.approx(1 / 3), "b": pytest.approx(1 / 3),
                     "c": pytest.approx(1 / 3)}


def test_heuristic_prior_orders_by_mean_reward():
    stats = {"a": (3, -0.1), "b": (2, -0.9)}
    prior = heuristic_prior(["a", "b"], stats)
    assert prior["a"] > prior["b"]


def test_heuristic_prior_matches_hand_computed_softmax():
    stats = {"a": (2, -0.2), "b": (1, -0.4)}
    prior = heuristic_prior(["a", "b"], stats, temperature=1.0)
    za = math.exp(-0.2)
    zb = math.exp(-0.4)
    assert prior["a"] == pytest.approx(za / (za + zb), abs=1e-9)
    assert prior["b"] == pytest.approx(zb / (za + zb), abs=1e-9)


def test_heuristic_prior_fills_unseen_values_with_mean_score():
    stats = {"a": (4, -0.2), "b": (4, -0.6)}
    prior = heuristic_prior(["a", "b", "c"], stats)
    assert prior["a"] > prior["c"] > prior["b"]


def test_heuristic_prior_is_valid_distribution():
    for stats in ({}, {"a": (1, -2.0)}, {"a": (2, -0.5), "b": (1, 0.0)}):
        prior = heuristic_prior(["a", "b"], stats)
        validate_distribution(prior, ["a", "b"])


def test_heuristic_prior_requires_positive_temperature():
    with pytest.raises(ContractError):
        heuristic_prior(["a"], {}, temperature=0.0)


def test_validate_distribution_rejects_bad_support_and_sums():
    with pytest.raises(ContractError):
        validate_distribution({"a": 1.0}, ["a", "b"])
    with pytest.raises(ContractError):
        validate_distribution({"a": 0.7, "b": 0.7}, ["a", "b"])
    with pytest.raises(ContractError):
        validate_distribution({"a": -0.1, "b": 1.1}, ["a", "b"])


def test_planner_context_requires_feedback_after_first_iteration():
    with pytest.raises(ContractError):
        _ctx(iteration=1, feedback=None)
    with pytest.raises(ContractError):
        _ctx(iteration=0, feedback=Feedback(1e-3, False, "x"))


def test_prompt_includes_retrieved_config_and_mse():
    hit = Retrieved("poisson2d", 0.944, _config(), 2.5e-4)
    prompt = build_prompt(_ctx(retrieved=[hit]), desk_space(False))
    assert "poisson2d" in prompt
    assert "2.500e-04" in prompt
    assert to_yaml(hit.config).strip().splitlines()[0] in prompt


def test_prompt_omits_feedback_block_at_first_iteration():
    prompt = build_prompt(_ctx(), desk_space(False))
    assert "Feedback from the previous iteration" not in prompt
    fed = build_prompt(
        _ctx(iteration=2, feedback=Feedback(3.2e-3, False, "loss fell")),
        desk_space(False))
    assert "Feedback from the previous iteration" in fed
    assert "3.200000e-03" in fed


def test_prompt_matches_golden_snapshot():
    hit = Retrieved("poisson2d", 0.9444444444444444, _config(), 2.5e-4)
    prompt = build_prompt(_ctx(retrieved=[hit]), desk_space(False))
    with open(GOLDEN, "r", encoding="utf-8") as fh:
        assert prompt == fh.read()


def test_extract_yaml_block():
    text = "Here you go:\n```yaml\nwidth: 32\n```\ntrailing"
    assert extract_yaml_block(text) == "width: 32\n"
    with pytest.raises(LlmFallback):
        extract_yaml_block("no fence here")


def _mock_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def _reply(content):
    return httpx.Response(200, json={
        "choices": [{"message": {"role": "assistant", "content": content}}]})


def _settings(tmp_path):
    return LlmSettings(endpoint_url="http://test/v1", model="test-model",
                       prompts_log=str(tmp_path / "prompts.jsonl"))


def test_llm_propose_parses_valid_reply(tmp_path):
    good = "```yaml\n" + to_yaml(_config()) + "```"
    calls = []

    def handler(request):
        calls.append(json.loads(request.content))
        return _reply(good)

    config = llm_propose(_ctx(), desk_space(False), _settings(tmp_path),
                         client=_mock_client(handler))
    assert config == _config()
    assert len(calls) == 1
    assert calls[0]["model"] == "test-model"
    assert calls[0]["temperature"] == 0.7


def test_llm_propose_repairs_invalid_width_once(tmp_path):
    bad = "```yaml\n" + to_yaml(_config(width=30)) + "```"
    good = "```yaml\n" + to_yaml(_config()) + "```"
    calls = []

    def handler(request):
        calls.append(json.loads(request.content))
        return _reply(bad if len(calls) == 1 else good)

    settings = _settings(tmp_path)
    config = llm_propose(_ctx(), desk_space(False), settings,
                         client=_mock_client(handler))
    assert config == _config()
    assert len(calls) == 2
    repair_text = calls[1]["messages"][-1]["content"]
    assert "width" in repair_text and "30" in repair_text
    log_lines = open(settings.prompts_log).read().strip().splitlines()
    assert len(log_lines) == 2  # proposal + repair, both audited


def test_llm_propose_falls_back_after_second_bad_reply(tmp_path):
    bad = "```yaml\n" + to_yaml(_config(width=30)) + "```"

    def handler(request):
        return _reply(bad)

    with pytest.raises(LlmFallback):
        llm_propose(_ctx(), desk_space(False), _settings(tmp_path),
                    client=_mock_client(handler))


def test_llm_propose_falls_back_on_unreachable_endpoint(tmp_path):
    def handler(request):
        raise httpx.ConnectError("no route to host")

    with pytest.raises(LlmFallback):
        llm_propose(_ctx(), desk_space(False), _settings(tmp_path),
                    client=_mock_client(handler))


def test_llm_propose_never_returns_invalid_config(tmp_path):
    # parse failure first, then a valid block: repair round covers both paths
    replies = ["total garbage, no yaml", "```yaml\n" + to_yaml(_config()) + "```"]
    calls = []

    def handler(request):
        calls.append(1)
        return _reply(replies[len(calls) - 1])

    config = llm_propose(_ctx(), desk_space(False), _settings(tmp_path),
                         client=_mock_client(handler))
    from pinnsearch.space import validate
    assert validate(config, desk_space(False)) == []
