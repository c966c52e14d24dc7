"""NLP task catalog: task specs, zero-shot prompt rendering and output parsing."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .errors import ArityMismatch, MalformedTaskFile, UnknownTask

InputTuple = tuple[str, ...]

_PLACEHOLDER = re.compile(r"\{INPUT_(\d+)\}")
_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)")
_EDGE_PUNCT = ".,;:!?\"'`()[]{} \t\n"
_NO_TUPLES = {"none", "no relations", "n/a", "unknown"}


class OutputKind(str, Enum):
    FREE_TEXT = "free_text"
    LABEL = "label"
    NUMERIC_SCORE = "numeric_score"
    TUPLE_SET = "tuple_set"


@dataclass(frozen=True)
class TaskSpec:
    id: str
    slot_names: tuple[str, ...]
    prompt_template: str
    output_kind: OutputKind
    name: str = ""
    labels: tuple[str, ...] = ()
    score_range: tuple[float, float] | None = None
    tuple_delimiter: str = "|"
    tuple_width: int = 3

    @property
    def input_arity(self) -> int:
        return len(self.slot_names)

    def slot_index(self, name: str) -> int:
        try:
            return self.slot_names.index(name)
        except ValueError:
            raise KeyError(f"task {self.id!r} has no slot {name!r}") from None

    def validate(self) -> None:
        """Raise MalformedTaskFile if any TaskSpec invariant is broken."""
        if self.input_arity < 1:
            raise MalformedTaskFile("needs at least one input slot", self.id)
        found = [int(k) for k in _PLACEHOLDER.findall(self.prompt_template)]
        for k in range(self.input_arity):
            n = found.count(k)
            if n != 1:
                raise MalformedTaskFile(
                    f"template must contain {{INPUT_{k}}} exactly once (found {n})", self.id)
        extra = sorted({k for k in found if k >= self.input_arity})
        if extra:
            raise MalformedTaskFile(f"template references slots beyond arity: {extra}", self.id)
        if self.output_kind is OutputKind.LABEL and not self.labels:
            raise MalformedTaskFile("label task needs a non-empty vocabulary", self.id)
        if self.output_kind is OutputKind.NUMERIC_SCORE:
            if self.score_range is None or not self.score_range[0] < self.score_range[1]:
                raise MalformedTaskFile("numeric task needs a range with min < max", self.id)
        if self.output_kind is OutputKind.TUPLE_SET:
            if not self.tuple_delimiter or self.tuple_width < 1:
                raise MalformedTaskFile("tuple task needs a delimiter and positive width", self.id)


@dataclass(frozen=True)
class TaskOutput:
    kind: OutputKind
    text: str
    parsed: Any = None
    parse_ok: bool = True

    def to_dict(self) -> dict:
        parsed = self.parsed
        if self.kind is OutputKind.TUPLE_SET and parsed is not None:
            parsed = sorted(list(t) for t in parsed)
        return {"kind": self.kind.value, "text": self.text, "parsed": parsed,
                "parse_ok": self.parse_ok}

    @classmethod
    def from_dict(cls, d: dict) -> "TaskOutput":
        kind = OutputKind(d["kind"])
        parsed = d.get("parsed")
        if kind is OutputKind.TUPLE_SET and parsed is not None:
            parsed = frozenset(tuple(t) for t in parsed)
        return cls(kind, d["text"], parsed, bool(d["parse_ok"]))

    @classmethod
    def failed(cls, kind: OutputKind, text: str = "") -> "TaskOutput":
        return cls(kind, text, None, False)


def _task_from_entry(entry: dict, templates: dict[str, str]) -> TaskSpec:
    task_id = entry.get("id")
    if not isinstance(task_id, str) or not task_id:
        raise MalformedTaskFile(f"task entry without an id: {entry!r}")
    try:
        slots = tuple(entry["slots"])
        output = entry.get("output", {"kind": "free_text"})
        kind = OutputKind(output["kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedTaskFile(f"bad entry ({exc})", task_id) from exc
    template = entry.get("prompt_template", templates.get(task_id))
    if not isinstance(template, str):
        raise MalformedTaskFile("no prompt template", task_id)
    score_range = output.get("range")
    spec = TaskSpec(
        id=task_id,
        slot_names=slots,
        prompt_template=template,
        output_kind=kind,
        name=entry.get("name", ""),
        labels=tuple(label.lower() for label in output.get("labels", ())),
        score_range=tuple(float(x) for x in score_range) if score_range else None,
        tuple_delimiter=output.get("delimiter", "|"),
        tuple_width=int(output.get("width", 3)),
    )
    spec.validate()
    return spec


def load_tasks(path: str | Path, templates_path: str | Path | None = None) -> list[TaskSpec]:
    """Load a task list file.

    A task's prompt template is taken from its ``prompt_template`` entry if
    present, else from the templates file keyed by task id. That file defaults
    to ``template/sut_prompt_templates.json`` next to the task list.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedTaskFile(f"cannot read {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise MalformedTaskFile(f"{path}: expected a JSON array of tasks")

    if templates_path is None:
        templates_path = path.parent / "template" / "sut_prompt_templates.json"
    templates: dict[str, str] = {}
    if entries and Path(templates_path).exists():
        try:
            templates = json.loads(Path(templates_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedTaskFile(f"cannot parse {templates_path}: {exc}") from exc

    tasks = [_task_from_entry(e, templates) for e in entries]
    ids = [t.id for t in tasks]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        raise MalformedTaskFile(f"duplicate task ids: {sorted(dupes)}")
    return tasks


def default_tasks_path() -> Path:
    return Path(str(resources.files("morphtest") / "data" / "list_tasks.json"))


def builtin_tasks() -> dict[str, TaskSpec]:
    return {t.id: t for t in load_tasks(default_tasks_path())}


def get_task(tasks: dict[str, TaskSpec], task_id: str) -> TaskSpec:
    try:
        return tasks[task_id]
    except KeyError:
        raise UnknownTask(f"unknown task {task_id!r}; known: {sorted(tasks)}") from None


def as_input_tuple(item: str | Sequence[str]) -> InputTuple:
    if isinstance(item, str):
        return (item,)
    return tuple(item)


def render_prompt(task: TaskSpec, inputs: Sequence[str]) -> str:
    if len(inputs) != task.input_arity:
        raise ArityMismatch(
            f"task {task.id!r} takes {task.input_arity} inputs, got {len(inputs)}")
    # single pass, so placeholder-like text inside an input is never re-expanded
    return _PLACEHOLDER.sub(lambda m: inputs[int(m.group(1))], task.prompt_template)


def _normalize_label(raw: str) -> str:
    return raw.strip().strip(_EDGE_PUNCT).lower()


def _parse_label(task: TaskSpec, raw: str) -> TaskOutput:
    norm = _normalize_label(raw)
    if norm in task.labels:
        return TaskOutput(OutputKind.LABEL, raw, norm)
    # "The answer is entailment." style replies: accept a single unambiguous vocabulary word
    words = set(re.findall(r"[a-z_]+", raw.lower()))
    hits = [label for label in task.labels if label in words]
    if len(hits) == 1:
        return TaskOutput(OutputKind.LABEL, raw, hits[0])
    return TaskOutput.failed(OutputKind.LABEL, raw)


def _parse_number(task: TaskSpec, raw: str) -> TaskOutput:
    m = _NUMBER.search(raw)
    if m is None:
        return TaskOutput.failed(OutputKind.NUMERIC_SCORE, raw)
    value = float(m.group(0))
    lo, hi = task.score_range
    if not lo <= value <= hi:
        return TaskOutput.failed(OutputKind.NUMERIC_SCORE, raw)
    return TaskOutput(OutputKind.NUMERIC_SCORE, raw, value)


def _parse_tuples(task: TaskSpec, raw: str) -> TaskOutput:
    tuples = set()
    meaningful = False
    for line in raw.splitlines():
        line = line.strip().lstrip("-*•").strip()
        if not line:
            continue
        if _normalize_label(line) in _NO_TUPLES:
            continue
        meaningful = True
        fields = [f.strip().lower() for f in line.split(task.tuple_delimiter)]
        if len(fields) == task.tuple_width and all(fields):
            tuples.add(tuple(fields))
    if meaningful and not tuples:
        return TaskOutput.failed(OutputKind.TUPLE_SET, raw)
    return TaskOutput(OutputKind.TUPLE_SET, raw, frozenset(tuples))


def parse_output(task: TaskSpec, raw: str) -> TaskOutput:
    """Parse raw LLM text into a typed output. Never raises; failures set parse_ok=False."""
    kind = task.output_kind
    if kind is OutputKind.FREE_TEXT:
        return TaskOutput(kind, raw, raw.strip())
    if kind is OutputKind.LABEL:
        return _parse_label(task, raw)
    if kind is OutputKind.NUMERIC_SCORE:
        return _parse_number(task, raw)
    return _parse_tuples(task, raw)


def load_inputs(path: str | Path, task_id: str | None = None) -> list[InputTuple]:
    """Read an input-data file.

    The file is a JSON array whose items are strings (single-slot tasks) or
    arrays of strings. It may instead be an object mapping task ids to such
    arrays, so one campaign can feed tasks of different arity.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        if task_id is None or task_id not in data:
            raise KeyError(f"{path}: no inputs for task {task_id!r}")
        data = data[task_id]
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of inputs")
    out = []
    for item in data:
        if not isinstance(item, (str, list)) or (
                isinstance(item, list) and not all(isinstance(x, str) for x in item)):
            raise ValueError(f"{path}: input items must be strings or arrays of strings")
        out.append(as_input_tuple(item))
    return out
