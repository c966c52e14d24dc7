"""Running metamorphic groups and whole campaigns, with checkpoint/resume."""

from __future__ import annotations

import json
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from .comparators import ComparatorConfig, RelationVerdict
from .config import RunConfig, validate_config
from .errors import (
    AuthFailure,
    ConfigMismatch,
    CorruptCheckpoint,
    EmbeddingUnavailable,
    GatewayError,
    InvalidConfig,
    LlmUnreachable,
    MorphError,
    TransformationFailed,
)
from .gateway import Gateway, HashingEmbedder, LlmHandle, ResponseCache
from .records import TestRecord
from .relations import (
    RelationDescriptor,
    RelationRegistry,
    check_output_relation,
    derive_followups,
    derive_seed,
    run_verifications,
)
from .reporting import RunReport, atomic_write_json, write_results
from .tasks import InputTuple, TaskOutput, TaskSpec, load_inputs, parse_output, render_prompt

log = logging.getLogger(__name__)

# Errors that make the rest of a campaign meaningless; everything else is contained per group.
ABORTING = (LlmUnreachable, AuthFailure, EmbeddingUnavailable)


def _now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass
class Runtime:
    """Everything a group needs besides its own inputs."""
    gateway: Gateway
    registry: RelationRegistry
    tasks: dict[str, TaskSpec]
    comparators: ComparatorConfig

    @classmethod
    def from_config(cls, config: RunConfig, *, gateway: Gateway | None = None,
                    tasks: dict[str, TaskSpec] | None = None,
                    registry: RelationRegistry | None = None) -> "Runtime":
        if tasks is None or registry is None:
            default_tasks, default_registry = config.catalogs()
            tasks = tasks if tasks is not None else default_tasks
            registry = registry if registry is not None else default_registry
        if gateway is None:
            gateway = Gateway(cache=ResponseCache(Path(config.base_dir) / "cache"),
                              max_concurrent_requests=config.max_concurrent_requests)
        if config.embedding_provider == "hashed":
            provider = HashingEmbedder()
        else:
            handle = LlmHandle(config.embedding_model,
                               endpoint=config.embedding_endpoint or config.llm_endpoint)
            provider = gateway.embedder(handle)
        return cls(gateway, registry, tasks, config.comparator_config(provider))


def run_test_group(llm: LlmHandle, task: TaskSpec, mr: RelationDescriptor,
                   source: Sequence[str], seed: int, runtime: Runtime, *,
                   transformer: LlmHandle | None = None, input_index: int = 0) -> TestRecord:
    """Transform, query the LLM under test on source and follow-ups, and judge the relation.

    Only the errors in ``ABORTING`` escape; any other failure inside the group
    yields a record with ``verification_failure`` set.
    """
    source = tuple(source)
    kind = task.output_kind

    def record(**kw) -> TestRecord:
        return TestRecord(model_id=llm.model_id, task_id=task.id, mr_id=mr.id,
                          input_index=input_index, seed_used=seed, source_input=source, **kw)

    try:
        derivation = derive_followups(mr, source, task, seed, transformer or llm,
                                      gateway=runtime.gateway,
                                      prompt_templates=runtime.registry.prompt_templates)
    except ABORTING:
        raise
    except TransformationFailed as exc:
        return record(source_output=TaskOutput.failed(kind), verification_failure=True,
                      note=f"transformation failed: {exc}")

    followups = derivation.followup_inputs
    n = len(followups)
    skipped = dict(
        followup_inputs=followups, followup_outputs=[TaskOutput.failed(kind)] * n,
        relation=[RelationVerdict.INDETERMINATE] * n, verification_failure=True,
        transformed_slots=derivation.transformed_slots)

    if run_verifications(mr, source, derivation):
        return record(source_output=TaskOutput.failed(kind),
                      note="input verification failed", **skipped)

    notes: list[str] = []

    def ask(inputs: InputTuple) -> TaskOutput:
        try:
            raw = runtime.gateway.complete(llm, render_prompt(task, inputs))
        except ABORTING:
            raise
        except GatewayError as exc:
            notes.append(f"query failed: {exc}")
            return TaskOutput.failed(kind)
        out = parse_output(task, raw)
        if not out.parse_ok:
            notes.append(f"unparseable output: {raw[:80]!r}")
        return out

    source_output = ask(source)
    followup_outputs = [ask(f) for f in followups]

    verdicts = []
    for out in followup_outputs:
        if not (source_output.parse_ok and out.parse_ok):
            verdicts.append(RelationVerdict.INDETERMINATE)
            continue
        try:
            verdicts.append(check_output_relation(mr, source_output, out, runtime.comparators))
        except ABORTING:
            raise
        except MorphError as exc:
            notes.append(f"comparison failed: {exc}")
            verdicts.append(RelationVerdict.INDETERMINATE)

    failed = bool(notes) or run_verifications(mr, source, derivation,
                                              (source_output, followup_outputs))
    if failed and not notes:
        notes.append("output verification failed")
    return record(source_output=source_output, followup_inputs=followups,
                  followup_outputs=followup_outputs, relation=verdicts,
                  verification_failure=failed, transformed_slots=derivation.transformed_slots,
                  note="; ".join(notes) or None)


# -- checkpoints -------------------------------------------------------------

@dataclass
class Checkpoint:
    campaign_id: str
    processed_count: int
    records: list[TestRecord]
    created_at: str
    config_digest: str

    def __post_init__(self):
        if self.processed_count != len(self.records):
            raise CorruptCheckpoint(
                f"processed_count {self.processed_count} != {len(self.records)} records")

    def to_dict(self) -> dict:
        return {"campaign_id": self.campaign_id, "processed_count": self.processed_count,
                "created_at": self.created_at, "config_digest": self.config_digest,
                "records": [r.to_dict() for r in self.records]}

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        return cls(d["campaign_id"], d["processed_count"],
                   [TestRecord.from_dict(r) for r in d["records"]],
                   d["created_at"], d["config_digest"])


def checkpoint_dir(base_dir: str | Path) -> Path:
    return Path(base_dir) / "checkpoints"


def save_checkpoint(state: Checkpoint, base_dir: str | Path) -> Path:
    stamp = datetime.fromisoformat(state.created_at).strftime("%Y%m%dT%H%M%S%fZ")
    name = f"ckpt-{state.campaign_id}-{state.processed_count}-{stamp}.json"
    return atomic_write_json(checkpoint_dir(base_dir) / name, state.to_dict())


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        return Checkpoint.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except CorruptCheckpoint:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"{path}: {exc}") from exc


def resume_latest(base_dir: str | Path, config: RunConfig) -> Checkpoint | None:
    """Newest readable checkpoint for ``config``, or None if there are no checkpoints."""
    files = sorted(checkpoint_dir(base_dir).glob("ckpt-*.json"))
    if not files:
        return None
    loaded, corrupt = [], []
    for f in files:
        try:
            loaded.append(load_checkpoint(f))
        except CorruptCheckpoint as exc:
            log.warning("skipping unreadable checkpoint: %s", exc)
            corrupt.append(f)
    digest = config.digest()
    matching = [c for c in loaded if c.config_digest == digest]
    if not matching:
        if loaded:
            raise ConfigMismatch(
                f"no checkpoint in {checkpoint_dir(base_dir)} matches the current config")
        raise CorruptCheckpoint(f"all {len(corrupt)} checkpoint(s) are unreadable")
    return max(matching, key=lambda c: (datetime.fromisoformat(c.created_at), c.processed_count))


# -- campaign ----------------------------------------------------------------

@dataclass(frozen=True)
class GroupKey:
    model_id: str
    task_id: str
    mr_id: str
    input_index: int


def expand_tasks(config: RunConfig, registry: RelationRegistry) -> dict[str, list[str]]:
    """Task -> relation ids, with an empty list meaning every relation applicable to the task."""
    return {task_id: list(mr_ids) if mr_ids else [r.id for r in registry.for_task(task_id)]
            for task_id, mr_ids in config.tasks.items()}


def load_campaign_inputs(config: RunConfig, tasks: dict[str, TaskSpec]) -> dict[str, list[InputTuple]]:
    out = {}
    for task_id in config.tasks:
        try:
            items = load_inputs(config.input_data, task_id)
        except (OSError, ValueError, KeyError) as exc:
            raise InvalidConfig(f"input data {config.input_data}: {exc}") from exc
        arity = tasks[task_id].input_arity
        for i, item in enumerate(items):
            if len(item) != arity:
                raise InvalidConfig(
                    f"input {i} has {len(item)} slot(s); task {task_id!r} takes {arity}")
        out[task_id] = items
    return out


def plan_groups(config: RunConfig, registry: RelationRegistry,
                inputs: dict[str, list[InputTuple]]) -> list[GroupKey]:
    expanded = expand_tasks(config, registry)
    return [GroupKey(model, task_id, mr_id, i)
            for model in config.llm_list
            for task_id, mr_ids in expanded.items()
            for mr_id in mr_ids
            for i in range(len(inputs[task_id]))]


def run_campaign(config: RunConfig, runtime: Runtime | None = None, *,
                 handle_factory: Callable[[str], LlmHandle] | None = None,
                 on_group: Callable[[int, TestRecord], None] | None = None) -> RunReport:
    """Run every (llm, task, relation, input) group in that order and write the report.

    ``handle_factory`` maps a model id to its handle (default: remote handle on
    ``config.llm_endpoint``). ``on_group`` is called after each group with the
    processed count, after any checkpoint for that count has been written.
    """
    runtime = runtime or Runtime.from_config(config)
    validate_config(config, runtime.tasks, runtime.registry)
    if handle_factory is None:
        def handle_factory(model_id: str) -> LlmHandle:
            return LlmHandle(model_id, endpoint=config.llm_endpoint)

    inputs = load_campaign_inputs(config, runtime.tasks)
    groups = plan_groups(config, runtime.registry, inputs)
    campaign_id, digest = config.campaign_id, config.digest()
    started_at = _now().isoformat()

    records: list[TestRecord] = []
    if config.continue_from_checkpoint:
        ckpt = resume_latest(config.base_dir, config)
        if ckpt is not None:
            if ckpt.processed_count > len(groups):
                raise CorruptCheckpoint("checkpoint holds more groups than the campaign plans")
            records = list(ckpt.records)
            log.info("resuming from checkpoint at %d/%d groups", len(records), len(groups))

    handles: dict[str, LlmHandle] = {}

    def handle(model_id: str) -> LlmHandle:
        if model_id not in handles:
            handles[model_id] = handle_factory(model_id)
        return handles[model_id]

    for model in config.llm_list:
        handle(model)
        handle(config.transformer_for(model))

    def work(g: GroupKey) -> TestRecord:
        mr = runtime.registry.get(g.mr_id)
        return run_test_group(handles[g.model_id], runtime.tasks[g.task_id], mr,
                              inputs[g.task_id][g.input_index],
                              derive_seed(config.seed, g.input_index, g.mr_id), runtime,
                              transformer=handles[config.transformer_for(g.model_id)],
                              input_index=g.input_index)

    pending = iter(groups[len(records):])
    window = config.max_concurrent_requests * 2
    with ThreadPoolExecutor(max_workers=config.max_concurrent_requests) as pool:
        in_flight: deque = deque()
        try:
            for g in pending:
                in_flight.append(pool.submit(work, g))
                if len(in_flight) < window:
                    continue
                _collect(in_flight.popleft().result(), records, config, campaign_id, digest, on_group)
            while in_flight:
                _collect(in_flight.popleft().result(), records, config, campaign_id, digest, on_group)
        except BaseException:
            for fut in in_flight:
                fut.cancel()
            raise

    report = RunReport.build(
        campaign_id, records,
        model_ids=list(config.llm_list), started_at=started_at,
        finished_at=_now().isoformat(), config=config.to_dict())
    path = write_results(report, config.base_dir)
    log.info("wrote %s", path)
    return report


def _collect(record: TestRecord, records: list[TestRecord], config: RunConfig,
             campaign_id: str, digest: str, on_group) -> None:
    records.append(record)
    n = len(records)
    if n % config.checkpoint_interval == 0:
        save_checkpoint(Checkpoint(campaign_id, n, list(records), _now().isoformat(), digest),
                        config.base_dir)
    if on_group is not None:
        on_group(n, record)
