"""Weighted one-hot encoding of PDE labels and cosine-similarity retrieval.

Each label category occupies one block of the feature vector; the single
nonzero entry of a block equals that category's weight, so categories with
larger weights dominate the angle between vectors.  The similarity stage
accepts an optional extra diagonal weighting, but by default it is the
identity: the encoding already carries the weights, and applying them twice
would square their effect.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import yaml

from . import catalog
from .errors import ContractError, ZeroVectorError
from .space import HyperConfig

# (category, values); boolean categories use a single 0/weight slot.
BLOCKS: tuple[tuple[str, tuple], ...] = (
    ("equation_type", catalog.EQUATION_TYPES),
    ("spatial_dims_class", catalog.DIMS_CLASSES),
    ("linearity", catalog.LINEARITIES),
    ("time_dependence", (True,)),
    ("bc_type", catalog.BC_TYPES),
    ("ic_present", (True,)),
    ("coefficient_type", catalog.COEFFICIENT_TYPES),
    ("time_scale", catalog.TIME_SCALES),
    ("geometric_complexity", catalog.GEOMETRY_CLASSES),
)

CATEGORIES = tuple(name for name, _ in BLOCKS)


@dataclass(frozen=True)
class WeightScheme:
    """Per-category weights plus an optional similarity-stage diagonal."""

    weights: Mapping[str, float] = field(default_factory=dict)
    w_diag: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        for name, w in self.weights.items():
            if name not in CATEGORIES:
                raise ContractError(f"unknown category {name!r}")
            if not w > 0:
                raise ContractError(f"{name}: weight must be positive, got {w}")
        if self.w_diag is not None and len(self.w_diag) != self.dimension:
            raise ContractError(
                f"w_diag length {len(self.w_diag)} != feature dimension {self.dimension}")

    def weight(self, category: str) -> float:
        return float(self.weights.get(category, 1.0))

    @property
    def dimension(self) -> int:
        return sum(len(values) for _, values in BLOCKS)

    def block_layout(self) -> list[tuple[str, int, int]]:
        layout, start = [], 0
        for name, values in BLOCKS:
            layout.append((name, start, start + len(values)))
            start += len(values)
        return layout


DEFAULT_SCHEME = WeightScheme({"equation_type": 3.0, "linearity": 2.0})


def scheme_from_yaml(text: str) -> WeightScheme:
    """Parse a scheme document: {weights: {category: w}, w_diag: [..]?}.

    Categories not listed keep weight 1.0.
    """
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ContractError("weight scheme: expected a mapping")
    weights = raw.get("weights", {})
    if not isinstance(weights, dict):
        raise ContractError("weights: expected a mapping")
    w_diag = raw.get("w_diag")
    if w_diag is not None:
        w_diag = tuple(float(v) for v in w_diag)
    return WeightScheme({k: float(v) for k, v in weights.items()}, w_diag)


def encode(labels: catalog.FeatureLabels, scheme: WeightScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Weighted one-hot concatenation over the block layout; shape (m,)."""
    labels.validate()
    values = labels.to_dict()
    vec = np.zeros(scheme.dimension)
    pos = 0
    for name, block_values in BLOCKS:
        w = scheme.weight(name)
        current = values[name]
        if block_values == (True,):  # boolean block
            vec[pos] = w if current else 0.0
        else:
            vec[pos + block_values.index(current)] = w
        pos += len(block_values)
    return vec


def similarity(a: np.ndarray, b: np.ndarray,
               w_diag: Optional[Sequence[float]] = None) -> float:
    """Cosine of the angle between two (already weighted) feature vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if w_diag is not None:
        w = np.asarray(w_diag, dtype=float)
        if w.shape != a.shape:
            raise ContractError(f"w_diag shape {w.shape} != vector shape {a.shape}")
        a = w * a
        b = w * b
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("similarity undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def similarity_matrix(vectors: Sequence[np.ndarray],
                      w_diag: Optional[Sequence[float]] = None) -> np.ndarray:
    """Pairwise similarities; S[i][j] = similarity(v_i, v_j)."""
    if len(vectors) == 0:
        raise ContractError("similarity_matrix requires at least one vector")
    n = len(vectors)
    S = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            try:
                S[i, j] = similarity(vectors[i], vectors[j], w_diag)
            except ContractError as exc:
                raise ContractError(f"pair ({i}, {j}): {exc}") from exc
    return S


@dataclass(frozen=True)
class Retrieved:
    """One ranked retrieval hit: a solved PDE and its best known config."""

    pde_id: str
    score: float
    config: HyperConfig
    mse: float


def top_k(target: catalog.FeatureLabels, db, k: int,
          scheme: WeightScheme = DEFAULT_SCHEME,
          exclude: Optional[str] = None) -> list[Retrieved]:
    """Rank solved PDEs by similarity to the target labels.

    ``db`` is any object exposing best_by_pde() -> {pde_id: (labels, config, mse)}
    over non-diverged completed runs.  The target PDE itself is excluded so
    retrieval follows the unseen-problem protocol.  Ties: higher similarity,
    then lower best MSE, then lexicographic id.  Empty databases yield an
    empty list, which callers treat as the fall-back signal.
    """
    if k < 0:
        raise ContractError(f"k must be non-negative, got {k}")
    target_vec = encode(target, scheme)
    ranked = []
    for pde_id, (labels, config, mse) in db.best_by_pde().items():
        if exclude is not None and pde_id == exclude:
            continue
        score = similarity(target_vec, encode(labels, scheme), scheme.w_diag)
        ranked.append(Retrieved(pde_id, score, config, mse))
    ranked.sort(key=lambda r: (-r.score, r.mse, r.pde_id))
    return ranked[:k]
