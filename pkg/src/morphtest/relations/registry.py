"""Metamorphic relation descriptors, the relation registry and its JSON loader."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from ..errors import (
    DuplicateRelationId,
    MalformedRelation,
    UnknownFunctionId,
    UnknownRelation,
    UnknownVerification,
)
from .transforms import TRANSFORMS
from .verifications import VERIFICATIONS


class TransformKind(str, Enum):
    FUNCTIONAL = "functional"
    LLM_PROMPTED = "llm_prompted"


class OutputRelationKind(str, Enum):
    EQUIVALENT = "EQUIVALENT"
    DIFFERENT = "DIFFERENT"
    SET_EQUAL = "SET_EQUAL"
    NUMERIC_EQUAL = "NUMERIC_EQUAL"


class TargetPolicy(str, Enum):
    EACH_SLOT = "EACH_SLOT"
    ALL_SLOTS = "ALL_SLOTS"
    EACH_AND_ALL = "EACH_AND_ALL"


@dataclass(frozen=True)
class TransformationSpec:
    kind: TransformKind
    function_id: str | None = None
    prompt_template_id: str | None = None
    few_shot_examples: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.kind is TransformKind.FUNCTIONAL:
            if not self.function_id or self.prompt_template_id is not None:
                raise MalformedRelation("functional transformation needs function_id only")
        else:
            if not self.prompt_template_id or self.function_id is not None:
                raise MalformedRelation("prompted transformation needs prompt_template_id only")
            if not self.few_shot_examples:
                raise MalformedRelation("prompted transformation needs few-shot examples")

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is TransformKind.FUNCTIONAL:
            d["function_id"] = self.function_id
        else:
            d["prompt_template_id"] = self.prompt_template_id
            d["few_shot_examples"] = [list(p) for p in self.few_shot_examples]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransformationSpec":
        return cls(
            kind=TransformKind(d["kind"]),
            function_id=d.get("function_id"),
            prompt_template_id=d.get("prompt_template_id"),
            few_shot_examples=tuple((a, b) for a, b in d.get("few_shot_examples", ())),
        )


@dataclass(frozen=True)
class VerificationSpec:
    name: str


@dataclass(frozen=True, eq=True)
class RelationDescriptor:
    id: str
    name: str
    applicable_tasks: frozenset[str]
    transformation: TransformationSpec
    output_relation: OutputRelationKind = OutputRelationKind.EQUIVALENT
    verifications: tuple[VerificationSpec, ...] = ()
    input_target_policy: TargetPolicy = TargetPolicy.EACH_SLOT
    # task id -> slot names the transformation may touch; tasks not listed use every slot
    target_slots: dict[str, tuple[str, ...]] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not self.id:
            raise MalformedRelation("relation without an id")
        if not self.applicable_tasks:
            raise MalformedRelation(f"{self.id}: applicable_tasks must be non-empty")

    def applies_to(self, task_id: str) -> bool:
        return task_id in self.applicable_tasks

    def slots_for(self, task) -> list[int]:
        names = self.target_slots.get(task.id)
        if not names:
            return list(range(task.input_arity))
        return sorted(task.slot_index(n) for n in names)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "name": self.name,
            "applicable_tasks": sorted(self.applicable_tasks),
            "transformation": self.transformation.to_dict(),
            "output_relation": self.output_relation.value,
            "verifications": [v.name for v in self.verifications],
            "input_target_policy": self.input_target_policy.value,
        }
        if self.target_slots:
            d["target_slots"] = {k: list(v) for k, v in self.target_slots.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RelationDescriptor":
        try:
            return cls(
                id=d["id"],
                name=d.get("name", d["id"]),
                applicable_tasks=frozenset(d["applicable_tasks"]),
                transformation=TransformationSpec.from_dict(d["transformation"]),
                output_relation=OutputRelationKind(d.get("output_relation", "EQUIVALENT")),
                verifications=tuple(VerificationSpec(v if isinstance(v, str) else v["name"])
                                    for v in d.get("verifications", ())),
                input_target_policy=TargetPolicy(d.get("input_target_policy", "EACH_SLOT")),
                target_slots={k: tuple(v) for k, v in d.get("target_slots", {}).items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRelation(f"bad relation entry {d.get('id', '?')!r}: {exc}") from exc


class RelationRegistry:
    """Immutable collection of relations; ``register`` returns a new registry."""

    def __init__(self, relations: Iterable[RelationDescriptor] = (),
                 prompt_templates: dict[str, str] | None = None):
        self.prompt_templates = dict(prompt_templates or {})
        self._by_id: dict[str, RelationDescriptor] = {}
        for r in relations:
            self._check(r)
            self._by_id[r.id] = r

    def _check(self, r: RelationDescriptor) -> None:
        if r.id in self._by_id:
            raise DuplicateRelationId(r.id)
        t = r.transformation
        if t.kind is TransformKind.FUNCTIONAL and t.function_id not in TRANSFORMS:
            raise UnknownFunctionId(f"{r.id}: no transform registered as {t.function_id!r}")
        if t.kind is TransformKind.LLM_PROMPTED and t.prompt_template_id not in self.prompt_templates:
            raise MalformedRelation(f"{r.id}: unknown prompt template {t.prompt_template_id!r}")
        for v in r.verifications:
            if v.name not in VERIFICATIONS:
                raise UnknownVerification(f"{r.id}: unknown verification {v.name!r}")

    def register(self, descriptor: RelationDescriptor) -> "RelationRegistry":
        return RelationRegistry([*self._by_id.values(), descriptor], self.prompt_templates)

    def get(self, relation_id: str) -> RelationDescriptor:
        try:
            return self._by_id[relation_id]
        except KeyError:
            raise UnknownRelation(f"unknown relation {relation_id!r}") from None

    def for_task(self, task_id: str) -> list[RelationDescriptor]:
        return [r for r in self._by_id.values() if r.applies_to(task_id)]

    @property
    def ids(self) -> list[str]:
        return list(self._by_id)

    def __contains__(self, relation_id: str) -> bool:
        return relation_id in self._by_id

    def __iter__(self) -> Iterator[RelationDescriptor]:
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)


def register_relation(descriptor: RelationDescriptor,
                      registry: RelationRegistry) -> RelationRegistry:
    return registry.register(descriptor)


def _data_file(*parts: str) -> Path:
    return Path(str(resources.files("morphtest").joinpath("data", *parts)))


def load_prompt_templates(path: str | Path | None = None) -> dict[str, str]:
    path = Path(path) if path is not None else _data_file("template", "it_prompt_templates.json")
    return json.loads(path.read_text(encoding="utf-8"))


def load_relations(path: str | Path, templates_path: str | Path | None = None) -> RelationRegistry:
    """Read a relation list file into a registry.

    Prompt templates default to ``template/it_prompt_templates.json`` next to
    the list, falling back to the bundled set.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedRelation(f"cannot read {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise MalformedRelation(f"{path}: expected a JSON array of relations")
    if templates_path is None:
        sibling = path.parent / "template" / "it_prompt_templates.json"
        templates_path = sibling if sibling.exists() else None
    return RelationRegistry([RelationDescriptor.from_dict(e) for e in entries],
                            load_prompt_templates(templates_path))


def builtin_registry() -> RelationRegistry:
    return load_relations(_data_file("list_relations.json"))
