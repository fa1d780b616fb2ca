"""Append-only JSONL store of training runs.

One JSON object per line, schema_version on every line.  The file is the
knowledge base retrieval queries and the statistics source for the heuristic
planner prior.  Loading tolerates a torn final line (crash mid-append) by
skipping it with a warning; corruption anywhere else raises.  Writes are
serialized through one lock; readers work on immutable snapshots.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .catalog import FeatureLabels
from .errors import DatabaseError
from .space import HyperConfig

SCHEMA_VERSION = 1

PROVENANCES = ("bootstrap", "mtrs", "random", "tpe", "seeded-retrieval", "llm", "policy")


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    pde_id: str
    labels: FeatureLabels
    config: HyperConfig
    mse: Optional[float]          # None when training diverged to non-finite
    reward: float
    reward_transform: str
    diverged: bool
    provenance: str
    iteration: int
    wall_time_s: float
    timestamp: float
    seed: int

    def validate(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance: {self.provenance!r} not in {PROVENANCES}")
        if self.mse is not None and not (self.mse >= 0.0):
            raise ValueError(f"mse: {self.mse} must be >= 0")
        if self.mse is None and not self.diverged:
            raise ValueError("mse may be absent only for diverged runs")
        self.labels.validate()

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "run_id": self.run_id,
            "pde_id": self.pde_id,
            "labels": self.labels.to_dict(),
            "config": self.config.to_dict(),
            "mse": self.mse if self.mse is None or math.isfinite(self.mse) else None,
            "reward": self.reward,
            "reward_transform": self.reward_transform,
            "diverged": self.diverged,
            "provenance": self.provenance,
            "iteration": self.iteration,
            "wall_time_s": self.wall_time_s,
            "timestamp": self.timestamp,
            "seed": self.seed,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        doc = json.loads(line)
        return cls(
            run_id=doc["run_id"], pde_id=doc["pde_id"],
            labels=FeatureLabels.from_dict(doc["labels"]),
            config=HyperConfig.from_dict(doc["config"]),
            mse=doc["mse"], reward=doc["reward"],
            reward_transform=doc["reward_transform"], diverged=doc["diverged"],
            provenance=doc["provenance"], iteration=doc["iteration"],
            wall_time_s=doc["wall_time_s"], timestamp=doc["timestamp"],
            seed=doc["seed"],
        )


def deterministic_run_id(sequence: int, pde_id: str, provenance: str,
                         iteration: int, seed: int, config: HyperConfig) -> str:
    """Sortable id; depends only on content and position, never on the clock."""
    payload = f"{pde_id}|{provenance}|{iteration}|{seed}|{config.to_dict()}"
    digest = hashlib.sha1(payload.encode()).hexdigest()[:12]
    return f"{sequence:010d}-{digest}"


class ExperimentDb:
    """Handle on one JSONL database file."""

    def __init__(self, path: str):
        self.path = str(path)
        self._lock = threading.Lock()
        self._records: list[RunRecord] = []
        self._ids: set[str] = set()
        if os.path.exists(self.path):
            self._load()

    def _load(self) -> None:
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                lines = fh.read().split("\n")
        except OSError as exc:
            raise DatabaseError(f"{self.path}: {exc}") from exc
        if lines and lines[-1] == "":
            lines.pop()
        for i, line in enumerate(lines):
            try:
                record = RunRecord.from_json(line)
            except (json.JSONDecodeError, KeyError) as exc:
                if i == len(lines) - 1:
                    import warnings
                    warnings.warn(f"{self.path}: skipping torn final line ({exc})")
                    break
                raise DatabaseError(f"{self.path}: corrupt record at line {i + 1}") from exc
            self._records.append(record)
            self._ids.add(record.run_id)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[RunRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def append(self, record: RunRecord) -> None:
        record.validate()
        with self._lock:
            if record.run_id in self._ids:
                raise DatabaseError(f"{self.path}: duplicate run id {record.run_id}")
            line = record.to_json()
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
            except OSError as exc:
                raise DatabaseError(f"{self.path}: {exc}") from exc
            self._records.append(record)
            self._ids.add(record.run_id)

    def add(self, *, pde_id: str, labels: FeatureLabels, config: HyperConfig,
            mse: Optional[float], reward: float, reward_transform: str,
            diverged: bool, provenance: str, iteration: int,
            wall_time_s: float, seed: int) -> RunRecord:
        """Assign a deterministic run id and append in one step."""
        with self._lock:
            sequence = len(self._records) + 1
        if mse is not None and not math.isfinite(mse):
            mse = None
        record = RunRecord(
            run_id=deterministic_run_id(sequence, pde_id, provenance, iteration,
                                        seed, config),
            pde_id=pde_id, labels=labels, config=config, mse=mse, reward=reward,
            reward_transform=reward_transform, diverged=diverged,
            provenance=provenance, iteration=iteration, wall_time_s=wall_time_s,
            timestamp=time.time(), seed=seed,
        )
        self.append(record)
        return record

    # -- queries (read-only snapshots) --------------------------------------

    def query_best(self, pde_id: str) -> Optional[RunRecord]:
        """Minimum-MSE non-diverged record; ties resolve to the earliest."""
        best = None
        for rec in self.records:
            if rec.pde_id != pde_id or rec.diverged or rec.mse is None:
                continue
            if best is None or rec.mse < best.mse or \
                    (rec.mse == best.mse and rec.timestamp < best.timestamp):
                best = rec
        return best

    def best_by_pde(self) -> dict[str, tuple[FeatureLabels, HyperConfig, float]]:
        """Retrieval view: pde_id -> (labels, best config, best mse)."""
        out = {}
        for rec in self.records:
            if rec.diverged or rec.mse is None:
                continue
            cur = out.get(rec.pde_id)
            if cur is None or rec.mse < cur[2]:
                out[rec.pde_id] = (rec.labels, rec.config, rec.mse)
        return out

    def axis_stats(self, pde_filter: Optional[str | Iterable[str]],
                   axis: str) -> dict[object, tuple[int, float]]:
        """Per-value (count, mean reward) over non-diverged matching records."""
        if pde_filter is None:
            allowed = None
        elif isinstance(pde_filter, str):
            allowed = {pde_filter}
        else:
            allowed = set(pde_filter)
        sums: dict[object, list[float]] = {}
        for rec in self.records:
            if rec.diverged:
                continue
            if allowed is not None and rec.pde_id not in allowed:
                continue
            value = getattr(rec.config, axis)
            acc = sums.setdefault(value, [0, 0.0])
            acc[0] += 1
            acc[1] += rec.reward
        return {v: (int(c), s / c) for v, (c, s) in sums.items()}
