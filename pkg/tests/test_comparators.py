import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from morphtest.comparators import (
    ComparatorConfig,
    Expectation,
    RelationVerdict,
    SetRelation,
    cosine,
    exact_equal,
    numeric_equivalent,
    semantic_similarity,
    semantic_verdict,
    set_compare,
)
from morphtest.errors import EmbeddingUnavailable, NonFiniteInput
from morphtest.gateway import HashingEmbedder


class StubProvider:
    def __init__(self, table):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.calls = 0

    def embed(self, text):
        self.calls += 1
        return self.table[text]


class BrokenProvider:
    def embed(self, text):
        raise RuntimeError("down")


@pytest.mark.parametrize("a,b,expected", [
    ("unknown", "unknown", True),
    ("unknown", "cirque", False),
    ("Cirque ", "cirque", True),
])
def test_exact_equal(a, b, expected):
    assert exact_equal(a, b) is expected


@given(st.text(), st.sampled_from(["", " ", "\t", "\n "]))
def test_exact_equal_ignores_padding(s, pad):
    assert exact_equal(s, s)
    assert exact_equal(pad + s + pad, s)


@given(st.text("abcXYZ qé"))
def test_exact_equal_ignores_case(s):
    assert exact_equal(s.upper(), s.lower())


X = ("x", "r", "y")


@pytest.mark.parametrize("a,b,expected", [
    ({X}, {X}, SetRelation.SET_EQUAL),
    (set(), {X}, SetRelation.SUBSET),
    ({("a", "r", "b"), ("c", "s", "d")}, {("a", "r", "b")}, SetRelation.SUPERSET),
    ({("a", "r", "b")}, {("c", "s", "d")}, SetRelation.DISJOINT),
    ({("a", "r", "b"), X}, {X, ("c", "s", "d")}, SetRelation.OVERLAP),
    ({("Paris ", "Capital", "France")}, {("paris", "capital", "france")}, SetRelation.SET_EQUAL),
])
def test_set_compare(a, b, expected):
    assert set_compare(a, b) is expected


def test_similarity_short_circuits_identical_strings():
    provider = StubProvider({})
    assert semantic_similarity("same", "same", provider) == 1.0
    assert provider.calls == 0


def test_similarity_orthogonal():
    assert semantic_similarity("a", "b", StubProvider({"a": (1, 0), "b": (0, 1)})) == 0.0


def test_similarity_diagonal():
    provider = StubProvider({"a": (1, 0), "b": (1 / math.sqrt(2), 1 / math.sqrt(2))})
    # hand-computed: cos(45 degrees) = 1/sqrt(2)
    assert semantic_similarity("a", "b", provider) == pytest.approx(0.7071067811865476, abs=1e-6)


def test_similarity_provider_failure():
    with pytest.raises(EmbeddingUnavailable):
        semantic_similarity("a", "b", BrokenProvider())


@given(st.text(max_size=40), st.text(max_size=40))
def test_similarity_symmetric(a, b):
    provider = HashingEmbedder(dim=64)
    assert semantic_similarity(a, b, provider) == semantic_similarity(b, a, provider)


def test_cosine_zero_vector():
    assert cosine([0, 0], [1, 0]) == 0.0


@pytest.mark.parametrize("score,expectation,expected", [
    (0.9, Expectation.EQUIVALENT, RelationVerdict.SATISFIED),
    (0.8, Expectation.EQUIVALENT, RelationVerdict.SATISFIED),
    (0.6, Expectation.EQUIVALENT, RelationVerdict.INDETERMINATE),
    (0.4, Expectation.EQUIVALENT, RelationVerdict.VIOLATED),
    (0.3, Expectation.EQUIVALENT, RelationVerdict.VIOLATED),
    (0.3, Expectation.DIFFERENT, RelationVerdict.SATISFIED),
    (0.4, Expectation.DIFFERENT, RelationVerdict.SATISFIED),
    (0.6, Expectation.DIFFERENT, RelationVerdict.INDETERMINATE),
    (0.8, Expectation.DIFFERENT, RelationVerdict.VIOLATED),
])
def test_semantic_verdict(score, expectation, expected):
    assert semantic_verdict(score, expectation, ComparatorConfig()) is expected


@given(st.floats(-1, 1), st.sampled_from(list(Expectation)))
def test_no_dead_zone_outside_thresholds(score, expectation):
    verdict = semantic_verdict(score, expectation, ComparatorConfig())
    if score >= 0.8 or score <= 0.4:
        assert verdict is not RelationVerdict.INDETERMINATE


@pytest.mark.parametrize("a,b,expected", [
    (0.5, 0.55, True),
    (0.2, 0.35, False),
    (0.4, 0.5, True),
    (0.7, 0.8, True),
])
def test_numeric_equivalent(a, b, expected):
    assert numeric_equivalent(a, b, 0.1) is expected


def test_numeric_non_finite():
    with pytest.raises(NonFiniteInput):
        numeric_equivalent(float("nan"), 0.0, 0.1)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0, 10))
def test_numeric_reflexive_symmetric(a, b, w):
    assert numeric_equivalent(a, a, w)
    assert numeric_equivalent(a, b, w) == numeric_equivalent(b, a, w)


def test_numeric_not_transitive():
    assert numeric_equivalent(0.0, 0.1, 0.1) and numeric_equivalent(0.1, 0.2, 0.1)
    assert not numeric_equivalent(0.0, 0.2, 0.1)


@pytest.mark.parametrize("kw", [
    {"equivalence_threshold": 0.4, "difference_threshold": 0.4},
    {"numeric_window": -0.1},
    {"equivalence_threshold": 0.0},
])
def test_comparator_config_invariants(kw):
    with pytest.raises(ValueError):
        ComparatorConfig(**kw)
