"""Output comparison primitives: exact, set, numeric window and embedding similarity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Protocol

import numpy as np

from .errors import EmbeddingUnavailable, NonFiniteInput

# Absorbs binary rounding so decimal boundaries (0.7 vs 0.8 with window 0.1) stay inclusive.
_WINDOW_EPS = 1e-9


class RelationVerdict(str, Enum):
    SATISFIED = "SATISFIED"
    VIOLATED = "VIOLATED"
    INDETERMINATE = "INDETERMINATE"


class Expectation(str, Enum):
    EQUIVALENT = "EQUIVALENT"
    DIFFERENT = "DIFFERENT"


class SetRelation(str, Enum):
    SET_EQUAL = "SET_EQUAL"
    SUBSET = "SUBSET"
    SUPERSET = "SUPERSET"
    DISJOINT = "DISJOINT"
    OVERLAP = "OVERLAP"


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


@dataclass
class ComparatorConfig:
    equivalence_threshold: float = 0.8
    difference_threshold: float = 0.4
    numeric_window: float = 0.1
    embedding_provider: EmbeddingProvider | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.equivalence_threshold <= 1:
            raise ValueError("equivalence_threshold must be in (0, 1]")
        if not 0 <= self.difference_threshold < 1:
            raise ValueError("difference_threshold must be in [0, 1)")
        if not self.difference_threshold < self.equivalence_threshold:
            raise ValueError("difference_threshold must be below equivalence_threshold")
        if not self.numeric_window >= 0:
            raise ValueError("numeric_window must be non-negative")
        if self.embedding_provider is None:
            from .gateway import HashingEmbedder
            self.embedding_provider = HashingEmbedder()


def _norm_text(s: str) -> str:
    return s.strip().casefold()


def exact_equal(a: str, b: str) -> bool:
    return _norm_text(a) == _norm_text(b)


def _norm_tuples(items: Iterable[Iterable[str]]) -> frozenset:
    return frozenset(tuple(_norm_text(x) for x in t) for t in items)


def set_compare(a: Iterable, b: Iterable) -> SetRelation:
    a, b = _norm_tuples(a), _norm_tuples(b)
    if a == b:
        return SetRelation.SET_EQUAL
    if a < b:
        return SetRelation.SUBSET
    if a > b:
        return SetRelation.SUPERSET
    if a.isdisjoint(b):
        return SetRelation.DISJOINT
    return SetRelation.OVERLAP


def cosine(u, v) -> float:
    """Cosine of two vectors; 0.0 when either has zero norm."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"embedding shapes differ: {u.shape} vs {v.shape}")
    denom = np.linalg.norm(u) * np.linalg.norm(v)
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / denom, -1.0, 1.0))


def semantic_similarity(a: str, b: str, provider: EmbeddingProvider) -> float:
    if a == b:
        return 1.0
    try:
        ea, eb = provider.embed(a), provider.embed(b)
    except EmbeddingUnavailable:
        raise
    except Exception as exc:
        raise EmbeddingUnavailable(f"embedding provider failed: {exc}") from exc
    return cosine(ea, eb)


def semantic_verdict(score: float, expectation: Expectation | str,
                     cfg: ComparatorConfig) -> RelationVerdict:
    expectation = Expectation(expectation)
    similar = score >= cfg.equivalence_threshold
    dissimilar = score <= cfg.difference_threshold
    if expectation is Expectation.EQUIVALENT:
        if similar:
            return RelationVerdict.SATISFIED
        if dissimilar:
            return RelationVerdict.VIOLATED
    else:
        if dissimilar:
            return RelationVerdict.SATISFIED
        if similar:
            return RelationVerdict.VIOLATED
    return RelationVerdict.INDETERMINATE


def numeric_equivalent(a: float, b: float, window: float) -> bool:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NonFiniteInput(f"non-finite operand: {a!r}, {b!r}")
    return abs(a - b) <= window + _WINDOW_EPS
