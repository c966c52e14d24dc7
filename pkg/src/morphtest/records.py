"""TestRecord: the outcome of one metamorphic group, and its JSON forms."""

from __future__ import annotations

from dataclasses import dataclass, field

from .comparators import RelationVerdict
from .tasks import InputTuple, TaskOutput, as_input_tuple

RESULT_FIELDS = (
    "source_input",
    "source_output",
    "followup_inputs",
    "followup_outputs",
    "relation",
    "verification_failure",
)


def _input_json(t: InputTuple):
    return t[0] if len(t) == 1 else list(t)


@dataclass
class TestRecord:
    __test__ = False  # keep pytest from collecting this class

    model_id: str
    task_id: str
    mr_id: str
    input_index: int
    seed_used: int
    source_input: InputTuple
    source_output: TaskOutput
    followup_inputs: list[InputTuple] = field(default_factory=list)
    followup_outputs: list[TaskOutput] = field(default_factory=list)
    relation: list[RelationVerdict] = field(default_factory=list)
    verification_failure: bool = False
    transformed_slots: list[tuple[int, ...]] = field(default_factory=list)
    note: str | None = None

    def __post_init__(self):
        if not len(self.relation) == len(self.followup_inputs) == len(self.followup_outputs):
            raise ValueError("relation, followup_inputs and followup_outputs must align")

    @property
    def violated(self) -> bool:
        return not self.verification_failure and RelationVerdict.VIOLATED in self.relation

    @property
    def indeterminate(self) -> bool:
        return (not self.verification_failure and not self.violated
                and RelationVerdict.INDETERMINATE in self.relation)

    def result_entry(self) -> dict:
        """The six-field form written to the results file."""
        return {
            "source_input": _input_json(self.source_input),
            "source_output": self.source_output.text,
            "followup_inputs": [_input_json(f) for f in self.followup_inputs],
            "followup_outputs": [o.text for o in self.followup_outputs],
            "relation": [v.value for v in self.relation],
            "verification_failure": self.verification_failure,
        }

    def details(self) -> dict:
        """Everything else needed to rebuild the record from a results file."""
        return {
            "model_id": self.model_id,
            "task_id": self.task_id,
            "mr_id": self.mr_id,
            "input_index": self.input_index,
            "seed_used": self.seed_used,
            "source_output": self.source_output.to_dict(),
            "followup_outputs": [o.to_dict() for o in self.followup_outputs],
            "transformed_slots": [list(s) for s in self.transformed_slots],
            "note": self.note,
        }

    def to_dict(self) -> dict:
        return {"result": self.result_entry(), "details": self.details()}

    @classmethod
    def from_parts(cls, entry: dict, details: dict) -> "TestRecord":
        return cls(
            model_id=details["model_id"],
            task_id=details["task_id"],
            mr_id=details["mr_id"],
            input_index=details["input_index"],
            seed_used=details["seed_used"],
            source_input=as_input_tuple(entry["source_input"]),
            source_output=TaskOutput.from_dict(details["source_output"]),
            followup_inputs=[as_input_tuple(f) for f in entry["followup_inputs"]],
            followup_outputs=[TaskOutput.from_dict(o) for o in details["followup_outputs"]],
            relation=[RelationVerdict(v) for v in entry["relation"]],
            verification_failure=bool(entry["verification_failure"]),
            transformed_slots=[tuple(s) for s in details["transformed_slots"]],
            note=details.get("note"),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "TestRecord":
        return cls.from_parts(d["result"], d["details"])
