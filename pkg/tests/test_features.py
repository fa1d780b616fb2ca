import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnsearch import catalog, features
from pinnsearch.catalog import FeatureLabels
from pinnsearch.errors import ContractError, ZeroVectorError
from pinnsearch.features import DEFAULT_SCHEME, Retrieved, WeightScheme
from pinnsearch.space import HyperConfig


def labels_strategy():
    return st.builds(
        FeatureLabels,
        equation_type=st.sampled_from(catalog.EQUATION_TYPES),
        spatial_dims_class=st.sampled_from(catalog.DIMS_CLASSES),
        linearity=st.sampled_from(catalog.LINEARITIES),
        time_dependence=st.booleans(),
        bc_type=st.sampled_from(catalog.BC_TYPES),
        ic_present=st.booleans(),
        coefficient_type=st.sampled_from(catalog.COEFFICIENT_TYPES),
        time_scale=st.sampled_from(catalog.TIME_SCALES),
        geometric_complexity=st.sampled_from(catalog.GEOMETRY_CLASSES),
    )


# Hand-computed from the documented block layout before implementation:
# [eq_type x4 w3][dims x4][linearity x2 w2][time_dep][bc x4][ic][coef x2]
# [time_scale x2][geometry x2]
POISSON1D_VECTOR = [3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 1, 0]


def test_poisson1d_encoding_matches_hand_computed_fixture():
    pde = catalog.get_pde("poisson1d")
    vec = features.encode(pde.labels, DEFAULT_SCHEME)
    assert vec.tolist() == POISSON1D_VECTOR
    assert len(vec) == DEFAULT_SCHEME.dimension == 22


def test_equation_type_block_is_scaled_one_hot():
    pde = catalog.get_pde("poisson1d")  # elliptic
    vec = features.encode(pde.labels, WeightScheme({"equation_type": 3.0}))
    assert vec[:4].tolist() == [3.0, 0.0, 0.0, 0.0]


def test_encoding_is_deterministic_bitwise():
    labels = catalog.get_pde("heat1d").labels
    a = features.encode(labels)
    b = features.encode(labels)
    assert np.array_equal(a, b)


def test_one_nonzero_entry_per_categorical_block():
    scheme = DEFAULT_SCHEME
    for pde in catalog.list_pdes():
        vec = features.encode(pde.labels, scheme)
        for name, start, stop in scheme.block_layout():
            block = vec[start:stop]
            if stop - start == 1:  # boolean block
                assert block[0] in (0.0, scheme.weight(name))
            else:
                assert np.count_nonzero(block) == 1
                assert block.max() == scheme.weight(name)


def test_self_similarity_is_one():
    v = features.encode(catalog.get_pde("wave1d").labels)
    assert features.similarity(v, v) == pytest.approx(1.0, abs=1e-12)


def test_disjoint_support_vectors_are_orthogonal():
    a = np.array([1.0, 0.0, 2.0, 0.0])
    b = np.array([0.0, 3.0, 0.0, 4.0])
    assert features.similarity(a, b) == 0.0


def test_poisson1d_vs_poisson2d_matches_brute_force():
    va = features.encode(catalog.get_pde("poisson1d").labels)
    vb = features.encode(catalog.get_pde("poisson2d").labels)
    # independent inner-product oracle with python arithmetic
    dot = math.fsum(x * y for x, y in zip(va, vb))
    na = math.sqrt(math.fsum(x * x for x in va))
    nb = math.sqrt(math.fsum(x * x for x in vb))
    assert features.similarity(va, vb) == pytest.approx(dot / (na * nb), abs=1e-12)


def test_zero_vector_raises():
    with pytest.raises(ZeroVectorError):
        features.similarity(np.zeros(3), np.ones(3))


def test_dimension_mismatch_raises():
    with pytest.raises(ContractError):
        features.similarity(np.ones(3), np.ones(4))


def test_similarity_matrix_single_vector():
    S = features.similarity_matrix([np.array([1.0, 2.0])])
    assert S.shape == (1, 1)
    assert S[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_similarity_matrix_properties_on_catalog():
    vectors = [features.encode(p.labels) for p in catalog.list_pdes()]
    S = features.similarity_matrix(vectors)
    assert np.abs(S - S.T).max() < 1e-12
    assert np.abs(np.diag(S) - 1.0).max() < 1e-12
    assert S.min() >= -1.0 - 1e-12 and S.max() <= 1.0 + 1e-12
    # elementwise brute-force oracle
    for i in range(len(vectors)):
        for j in range(len(vectors)):
            dot = math.fsum(x * y for x, y in zip(vectors[i], vectors[j]))
            ni = math.sqrt(math.fsum(x * x for x in vectors[i]))
            nj = math.sqrt(math.fsum(x * x for x in vectors[j]))
            assert S[i, j] == pytest.approx(dot / (ni * nj), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(labels_strategy(), st.floats(0.1, 100.0))
def test_similarity_scale_invariance(labels, c):
    v = features.encode(labels)
    w = features.encode(catalog.get_pde("heat1d").labels)
    assert features.similarity(c * v, w) == pytest.approx(
        features.similarity(v, w), abs=1e-12)


class FakeDb:
    def __init__(self, entries):
        self.entries = entries

    def best_by_pde(self):
        return self.entries


def _config(seed=0):
    return HyperConfig("fnn", "tanh", 32, 4, "adam", "glorot_normal", 1e-3,
                       600, 100, 0, seed=seed)


def test_top_k_single_candidate():
    p2 = catalog.get_pde("poisson2d")
    db = FakeDb({"poisson2d": (p2.labels, _config(), 2e-3)})
    hits = features.top_k(catalog.get_pde("poisson1d").labels, db, 1,
                          exclude="poisson1d")
    assert len(hits) == 1
    assert hits[0].pde_id == "poisson2d"
    assert hits[0].mse == 2e-3


def test_top_k_excludes_target():
    p1 = catalog.get_pde("poisson1d")
    db = FakeDb({"poisson1d": (p1.labels, _config(), 1e-4)})
    assert features.top_k(p1.labels, db, 3, exclude="poisson1d") == []


def test_top_k_larger_than_candidates_returns_all_sorted():
    entries = {p.id: (p.labels, _config(), 1e-3) for p in catalog.list_pdes()}
    target = catalog.get_pde("heat1d")
    hits = features.top_k(target.labels, db=FakeDb(entries), k=100,
                          exclude="heat1d")
    assert len(hits) == len(entries) - 1
    scores = [h.score for h in hits]
    assert scores == sorted(scores, reverse=True)


def _brute_force_rank(target_labels, entries, k, exclude):
    target_vec = features.encode(target_labels)
    rows = []
    for pde_id, (labels, config, mse) in entries.items():
        if pde_id == exclude:
            continue
        score = features.similarity(target_vec, features.encode(labels))
        rows.append(Retrieved(pde_id, score, config, mse))
    rows.sort(key=lambda r: (-r.score, r.mse, r.pde_id))
    return rows[:k]


def test_top_k_matches_exhaustive_sort_on_randomized_databases():
    rng = np.random.default_rng(11)
    all_labels = [p.labels for p in catalog.list_pdes()]
    for trial in range(60):
        n = int(rng.integers(1, 10))
        entries = {}
        for i in range(n):
            labels = all_labels[int(rng.integers(len(all_labels)))]
            mse = float(rng.choice([1e-4, 1e-3, 1e-3, 5e-2]))  # deliberate ties
            entries[f"pde{i:02d}"] = (labels, _config(i), mse)
        target = all_labels[int(rng.integers(len(all_labels)))]
        k = int(rng.integers(1, n + 2))
        got = features.top_k(target, FakeDb(entries), k)
        want = _brute_force_rank(target, entries, k, None)
        assert got == want


def test_top_k_prefix_property():
    entries = {p.id: (p.labels, _config(), float(i + 1) * 1e-3)
               for i, p in enumerate(catalog.list_pdes())}
    target = catalog.get_pde("poisson5d").labels
    for k in range(1, len(entries)):
        assert features.top_k(target, FakeDb(entries), k) == \
            features.top_k(target, FakeDb(entries), k + 1)[:k]


def test_weight_monotonicity_in_ranking():
    # candidates differ from the target only in equation type (matching vs not)
    target = catalog.get_pde("heat1d").labels       # parabolic
    match = catalog.get_pde("burgers1d").labels     # parabolic, nonlinear
    import dataclasses
    mismatch = dataclasses.replace(match, equation_type="hyperbolic")
    entries = {"match": (match, _config(), 1e-2), "mismatch": (mismatch, _config(), 1e-2)}
    for w in (1.0, 2.0, 5.0, 20.0):
        scheme = WeightScheme({"equation_type": w, "linearity": 2.0})
        hits = features.top_k(target, FakeDb(entries), 2, scheme)
        assert hits[0].pde_id == "match"


def test_scheme_from_yaml_roundtrip_and_defaults():
    scheme = features.scheme_from_yaml("weights:\n  equation_type: 4.5\n")
    assert scheme.weight("equation_type") == 4.5
    assert scheme.weight("linearity") == 1.0
    with pytest.raises(ContractError):
        features.scheme_from_yaml("weights:\n  equation_type: -1\n")
    with pytest.raises(ContractError):
        features.scheme_from_yaml("weights:\n  bogus_category: 2\n")


def test_w_diag_similarity_stage():
    scheme = features.scheme_from_yaml(
        "weights: {}\nw_diag: [" + ", ".join(["1"] * 22) + "]\n")
    v = features.encode(catalog.get_pde("poisson1d").labels, scheme)
    assert features.similarity(v, v, scheme.w_diag) == pytest.approx(1.0, abs=1e-12)
