import json
import math

import numpy as np
import pytest

from pinnsearch.catalog import get_pde
from pinnsearch.db import ExperimentDb, RunRecord, SCHEMA_VERSION, deterministic_run_id
from pinnsearch.errors import DatabaseError
from pinnsearch.space import HyperConfig


def _config(seed=0, **kw):
    base = dict(net_type="fnn", activation="tanh", width=32, depth=4,
                optimizer="adam", initializer="glorot_normal", learning_rate=1e-3,
                n_domain=600, n_boundary=100, n_initial=0, seed=seed)
    base.update(kw)
    return HyperConfig(**base)


def _record(run_id, pde_id="poisson1d", mse=1e-3, reward=None, seed=0,
            diverged=False, provenance="bootstrap", timestamp=1000.0):
    labels = get_pde(pde_id).labels
    return RunRecord(
        run_id=run_id, pde_id=pde_id, labels=labels, config=_config(seed),
        mse=mse, reward=-mse if (reward is None and mse is not None) else (reward or 0.0),
        reward_transform="raw", diverged=diverged, provenance=provenance,
        iteration=1, wall_time_s=0.5, timestamp=timestamp, seed=seed)


def test_append_then_query_best(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    rec = _record("r1")
    db.append(rec)
    assert db.query_best("poisson1d") == rec


def test_duplicate_run_id_rejected(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    db.append(_record("r1"))
    with pytest.raises(DatabaseError, match="duplicate"):
        db.append(_record("r1"))


def test_file_line_count_matches_appends(tmp_path):
    path = tmp_path / "runs.jsonl"
    db = ExperimentDb(str(path))
    for i in range(50):
        db.append(_record(f"r{i:03d}", mse=1e-3 * (i + 1)))
    assert len(path.read_text().strip().splitlines()) == 50
    assert len(ExperimentDb(str(path))) == 50


def test_append_only_never_rewrites_existing_lines(tmp_path):
    path = tmp_path / "runs.jsonl"
    db = ExperimentDb(str(path))
    db.append(_record("r1"))
    before = path.read_text()
    db.append(_record("r2"))
    assert path.read_text().startswith(before)


def test_query_best_skips_diverged_and_breaks_ties_by_timestamp(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    db.append(_record("a", mse=1e-2, timestamp=1.0))
    db.append(_record("b", mse=3e-4, timestamp=2.0))
    db.append(_record("c", mse=None, reward=-9.0, diverged=True, timestamp=3.0))
    db.append(_record("d", mse=3e-4, timestamp=4.0))
    best = db.query_best("poisson1d")
    assert best.run_id == "b"
    assert db.query_best("nosuch") is None


def test_query_best_matches_linear_scan_oracle(tmp_path):
    rng = np.random.default_rng(12)
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    pdes = ["poisson1d", "heat1d", "wave1d"]
    rows = []
    for i in range(500):
        pde_id = pdes[int(rng.integers(3))]
        diverged = bool(rng.random() < 0.1)
        mse = None if diverged else float(rng.uniform(1e-5, 1.0))
        rec = _record(f"r{i:04d}", pde_id=pde_id, mse=mse, diverged=diverged,
                      reward=-1.0 if diverged else None, timestamp=float(i))
        db.append(rec)
        rows.append(rec)
    for pde_id in pdes:
        want = None
        for rec in rows:
            if rec.pde_id != pde_id or rec.diverged:
                continue
            if want is None or rec.mse < want.mse:
                want = rec
        assert db.query_best(pde_id) == want


def test_torn_final_line_is_skipped_with_warning(tmp_path):
    path = tmp_path / "runs.jsonl"
    db = ExperimentDb(str(path))
    db.append(_record("r1"))
    db.append(_record("r2"))
    with open(path, "a") as fh:
        fh.write('{"schema_version": 1, "run_id": "r3", "pde')  # torn write
    with pytest.warns(UserWarning, match="torn final line"):
        recovered = ExperimentDb(str(path))
    assert len(recovered) == 2
    assert {r.run_id for r in recovered.records} == {"r1", "r2"}
    recovered.append(_record("r3"))  # store remains usable
    assert len(recovered) == 3


def test_corrupt_interior_line_raises(tmp_path):
    path = tmp_path / "runs.jsonl"
    db = ExperimentDb(str(path))
    db.append(_record("r1"))
    lines = path.read_text().splitlines()
    lines.insert(0, "garbage not json")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatabaseError, match="corrupt record at line 1"):
        ExperimentDb(str(path))


def test_round_trip_preserves_record(tmp_path):
    rec = _record("rt", mse=2.5e-4)
    assert RunRecord.from_json(rec.to_json()) == rec
    doc = json.loads(rec.to_json())
    assert doc["schema_version"] == SCHEMA_VERSION
    assert set(doc) == {"schema_version", "run_id", "pde_id", "labels", "config",
                        "mse", "reward", "reward_transform", "diverged",
                        "provenance", "iteration", "wall_time_s", "timestamp",
                        "seed"}


def test_axis_stats_empty_db(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    assert db.axis_stats(None, "activation") == {}


def test_axis_stats_mean_rewards(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    db.append(_record("a", mse=0.2, reward=-0.2))
    db.append(_record("b", mse=0.4, reward=-0.4))
    stats = db.axis_stats(None, "activation")
    assert stats == {"tanh": (2, pytest.approx(-0.3))}


def test_axis_stats_matches_recompute_oracle(tmp_path):
    rng = np.random.default_rng(7)
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    activations = ["tanh", "relu", "silu"]
    rows = []
    for i in range(100):
        act = activations[int(rng.integers(3))]
        diverged = bool(rng.random() < 0.15)
        mse = None if diverged else float(rng.uniform(0.01, 1.0))
        rec = _record(f"r{i:03d}", mse=mse, diverged=diverged,
                      reward=-2.0 if diverged else -mse)
        rec = RunRecord(**{**rec.__dict__, "config": _config(i, activation=act)})
        db.append(rec)
        rows.append(rec)
    stats = db.axis_stats("poisson1d", "activation")
    for act in activations:
        sample = [r.reward for r in rows if not r.diverged
                  and r.config.activation == act]
        if sample:
            count, mean = stats[act]
            assert count == len(sample)
            assert mean == pytest.approx(sum(sample) / len(sample), abs=1e-12)
        else:
            assert act not in stats


def test_axis_stats_pde_filter(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    db.append(_record("a", pde_id="poisson1d", mse=0.1, reward=-0.1))
    heat_cfg = _config(1, n_initial=600)
    rec = _record("b", pde_id="heat1d", mse=0.5, reward=-0.5)
    db.append(RunRecord(**{**rec.__dict__, "config": heat_cfg}))
    assert db.axis_stats("poisson1d", "activation")["tanh"] == (1, pytest.approx(-0.1))
    assert db.axis_stats(["poisson1d", "heat1d"], "activation")["tanh"][0] == 2


def test_best_by_pde_view(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    db.append(_record("a", mse=1e-2))
    db.append(_record("b", mse=1e-3))
    view = db.best_by_pde()
    assert set(view) == {"poisson1d"}
    labels, config, mse = view["poisson1d"]
    assert mse == 1e-3


def test_record_validation():
    rec = _record("x", mse=-1.0)
    with pytest.raises(ValueError, match="mse"):
        rec.validate()
    rec = _record("x", provenance="unknown")
    with pytest.raises(ValueError, match="provenance"):
        rec.validate()


def test_deterministic_run_id_is_stable_and_sortable():
    a = deterministic_run_id(1, "poisson1d", "mtrs", 1, 0, _config())
    b = deterministic_run_id(1, "poisson1d", "mtrs", 1, 0, _config())
    c = deterministic_run_id(2, "poisson1d", "mtrs", 1, 0, _config())
    assert a == b
    assert a < c


def test_add_assigns_unique_sequential_ids(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    pde = get_pde("poisson1d")
    r1 = db.add(pde_id=pde.id, labels=pde.labels, config=_config(), mse=0.5,
                reward=-0.5, reward_transform="raw", diverged=False,
                provenance="bootstrap", iteration=1, wall_time_s=0.1, seed=0)
    r2 = db.add(pde_id=pde.id, labels=pde.labels, config=_config(), mse=0.4,
                reward=-0.4, reward_transform="raw", diverged=False,
                provenance="bootstrap", iteration=2, wall_time_s=0.1, seed=0)
    assert r1.run_id < r2.run_id
    assert len(db) == 2


def test_non_finite_mse_stored_as_null(tmp_path):
    db = ExperimentDb(str(tmp_path / "runs.jsonl"))
    pde = get_pde("poisson1d")
    rec = db.add(pde_id=pde.id, labels=pde.labels, config=_config(),
                 mse=math.inf, reward=-2.0, reward_transform="raw",
                 diverged=True, provenance="bootstrap", iteration=1,
                 wall_time_s=0.1, seed=0)
    assert rec.mse is None
    assert ExperimentDb(db.path).records[0].mse is None
