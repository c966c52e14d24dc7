"""Verification predicates: restrictions a metamorphic group must meet to count.

Input-phase predicates receive ``(source, derivation)`` and run before the LLM
under test is queried. Output-phase predicates receive
``(source_output, followup_outputs)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

from .transforms import split_sentences

Phase = Literal["input", "output"]


@dataclass(frozen=True)
class Verification:
    name: str
    phase: Phase
    check: Callable[..., bool]


VERIFICATIONS: dict[str, Verification] = {}


def register_verification(name: str, phase: Phase):
    def deco(fn):
        VERIFICATIONS[name] = Verification(name, phase, fn)
        return fn
    return deco


def _targeted(derivation) -> set[int]:
    return set().union(*derivation.transformed_slots) if derivation.transformed_slots else set()


@register_verification("source_nonempty", "input")
def source_nonempty(source, derivation) -> bool:
    return all(s.strip() for s in source)


@register_verification("followup_differs", "input")
def followup_differs(source, derivation) -> bool:
    return all(tuple(f) != tuple(source) for f in derivation.followup_inputs)


@register_verification("multi_sentence", "input")
def multi_sentence(source, derivation) -> bool:
    slots = _targeted(derivation) or range(len(source))
    return all(len(split_sentences(source[k])) >= 2 for k in slots)


@register_verification("outputs_nonempty", "output")
def outputs_nonempty(source_output, followup_outputs) -> bool:
    return bool(source_output.text.strip()) and all(o.text.strip() for o in followup_outputs)
