"""RunConfig, configuration-file loading, CLI argument parsing and validation."""

from __future__ import annotations

import argparse
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

from .comparators import ComparatorConfig
from .errors import InvalidConfig, MalformedConfig, MissingArgument, UnknownRelation
from .gateway import DEFAULT_ENDPOINT
from .relations import RelationRegistry, builtin_registry, load_relations
from .tasks import TaskSpec, builtin_tasks, get_task, load_tasks

DEFAULT_CONFIG_PATH = Path("config") / "run_config.json"
CLI_ARGS = ("llm", "task", "mr", "input_data", "base_dir")
EMBEDDING_PROVIDERS = ("remote", "hashed")

# keys that do not change what a campaign computes; excluded from the resume digest
_RESUME_NEUTRAL = {"checkpoint_interval", "continue_from_checkpoint", "max_concurrent_requests"}


@dataclass(frozen=True)
class RunConfig:
    llm_list: tuple[str, ...]
    tasks: dict[str, tuple[str, ...]]
    input_data: Path
    base_dir: Path
    checkpoint_interval: int = 100
    continue_from_checkpoint: bool = False
    llm_endpoint: str = DEFAULT_ENDPOINT
    llm_for_transformation: str | None = None
    seed: int = 0
    equivalence_threshold: float = 0.8
    difference_threshold: float = 0.4
    numeric_window: float = 0.1
    max_concurrent_requests: int = 4
    embedding_provider: str = "remote"
    embedding_model: str = "paraphrase-MiniLM-L6-v2"
    embedding_endpoint: str | None = None
    tasks_file: Path | None = None
    relations_file: Path | None = None

    def transformer_for(self, model_id: str) -> str:
        """The LLM that implements prompted transformations; defaults to the LLM under test."""
        return self.llm_for_transformation or model_id

    def comparator_config(self, provider=None) -> ComparatorConfig:
        return ComparatorConfig(self.equivalence_threshold, self.difference_threshold,
                                self.numeric_window, provider)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["llm_list"] = list(self.llm_list)
        d["tasks"] = {k: list(v) for k, v in self.tasks.items()}
        for key in ("input_data", "base_dir", "tasks_file", "relations_file"):
            if d[key] is not None:
                d[key] = str(d[key])
        return d

    def digest(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _RESUME_NEUTRAL}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()

    @property
    def campaign_id(self) -> str:
        return self.digest()[:12]

    def catalogs(self) -> tuple[dict[str, TaskSpec], RelationRegistry]:
        tasks = ({t.id: t for t in load_tasks(self.tasks_file)} if self.tasks_file
                 else builtin_tasks())
        registry = load_relations(self.relations_file) if self.relations_file else builtin_registry()
        return tasks, registry


_FIELDS = {f.name: f for f in fields(RunConfig)}
_REQUIRED = ("llm_list", "tasks", "input_data", "base_dir")


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def config_from_mapping(raw: dict) -> RunConfig:
    """Build a RunConfig from a parsed config mapping, checking key names and value types."""
    if not isinstance(raw, dict):
        raise MalformedConfig("config must be a JSON object")
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise MalformedConfig(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise MalformedConfig(f"missing config keys: {', '.join(missing)}")

    llm_list = raw["llm_list"]
    if isinstance(llm_list, str):
        llm_list = [llm_list]
    if not isinstance(llm_list, list) or not llm_list or not all(
            isinstance(m, str) and m for m in llm_list):
        raise MalformedConfig("llm_list must be a non-empty list of model names")
    tasks = raw["tasks"]
    if not isinstance(tasks, dict) or not tasks:
        raise MalformedConfig("tasks must be a non-empty object of task -> relation list")
    for task_id, mrs in tasks.items():
        if not isinstance(mrs, list) or not all(isinstance(m, str) for m in mrs):
            raise MalformedConfig(f"tasks[{task_id!r}] must be a list of relation ids")

    kw: dict = {
        "llm_list": tuple(llm_list),
        "tasks": {k: tuple(v) for k, v in tasks.items()},
        "input_data": Path(raw["input_data"]),
        "base_dir": Path(raw["base_dir"]),
    }
    for key in ("tasks_file", "relations_file"):
        if raw.get(key) is not None:
            kw[key] = Path(raw[key])
    for key in ("checkpoint_interval", "seed", "max_concurrent_requests"):
        if key in raw:
            if not _is_int(raw[key]):
                raise MalformedConfig(f"{key} must be an integer")
            kw[key] = raw[key]
    for key in ("equivalence_threshold", "difference_threshold", "numeric_window"):
        if key in raw:
            if not _is_number(raw[key]):
                raise MalformedConfig(f"{key} must be a number")
            kw[key] = float(raw[key])
    if "continue_from_checkpoint" in raw:
        if not isinstance(raw["continue_from_checkpoint"], bool):
            raise MalformedConfig("continue_from_checkpoint must be true or false")
        kw["continue_from_checkpoint"] = raw["continue_from_checkpoint"]
    for key in ("llm_endpoint", "embedding_model", "embedding_provider"):
        if key in raw:
            if not isinstance(raw[key], str) or not raw[key]:
                raise MalformedConfig(f"{key} must be a non-empty string")
            kw[key] = raw[key]
    for key in ("llm_for_transformation", "embedding_endpoint"):
        if raw.get(key) is not None:
            if not isinstance(raw[key], str) or not raw[key]:
                raise MalformedConfig(f"{key} must be a non-empty string or null")
            kw[key] = raw[key]
    return RunConfig(**kw)


def validate_config(cfg: RunConfig, tasks: dict[str, TaskSpec] | None = None,
                    registry: RelationRegistry | None = None) -> RunConfig:
    if tasks is None or registry is None:
        default_tasks, default_registry = cfg.catalogs()
        tasks = tasks if tasks is not None else default_tasks
        registry = registry if registry is not None else default_registry

    if cfg.checkpoint_interval < 1:
        raise MalformedConfig("checkpoint_interval must be a positive integer")
    if cfg.max_concurrent_requests < 1:
        raise MalformedConfig("max_concurrent_requests must be a positive integer")
    if cfg.seed < 0:
        raise MalformedConfig("seed must be non-negative")
    if cfg.embedding_provider not in EMBEDDING_PROVIDERS:
        raise MalformedConfig(f"embedding_provider must be one of {EMBEDDING_PROVIDERS}")
    try:
        cfg.comparator_config(provider=object())
    except ValueError as exc:
        raise MalformedConfig(str(exc)) from exc
    if not cfg.llm_list:
        raise MalformedConfig("llm_list must not be empty")

    for task_id, mr_ids in cfg.tasks.items():
        get_task(tasks, task_id)
        for mr_id in mr_ids:
            mr = registry.get(mr_id)
            if not mr.applies_to(task_id):
                raise InvalidConfig(f"relation {mr_id} does not apply to task {task_id!r}")
        if not mr_ids and not registry.for_task(task_id):
            raise InvalidConfig(f"no registered relation applies to task {task_id!r}")
    return cfg


def load_config(path: str | Path = DEFAULT_CONFIG_PATH, *, tasks: dict[str, TaskSpec] | None = None,
                registry: RelationRegistry | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MalformedConfig(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedConfig(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(config_from_mapping(raw), tasks, registry)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise MalformedConfig(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morphtest",
                description="Metamorphic testing of LLMs on NLP tasks. Pass the five run "
                            "arguments, or --config to run from a configuration file.")
    p.add_argument("--llm", help="ID of the LLM to test (model name sent to the API)")
    p.add_argument("--task", help="NLP task id, e.g. qa, nli, sa, re")
    p.add_argument("--mr", help="metamorphic relation id, e.g. MR-84")
    p.add_argument("--input_data", help="JSON file with the source inputs")
    p.add_argument("--base_dir", help="directory for caches, checkpoints and results")
    p.add_argument("--config", help=f"configuration file (default {DEFAULT_CONFIG_PATH})")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(ns: argparse.Namespace, *, tasks=None, registry=None) -> RunConfig:
    for name in CLI_ARGS:
        if not getattr(ns, name):
            raise MissingArgument(name)
    tasks = tasks if tasks is not None else builtin_tasks()
    registry = registry if registry is not None else builtin_registry()
    get_task(tasks, ns.task)
    if ns.mr not in registry:
        raise UnknownRelation(f"unknown relation {ns.mr!r}; known: {registry.ids}")
    cfg = RunConfig(llm_list=(ns.llm,), tasks={ns.task: (ns.mr,)},
                    input_data=Path(ns.input_data), base_dir=Path(ns.base_dir))
    return validate_config(cfg, tasks, registry)


def parse_cli(args: Sequence[str], *, tasks: dict[str, TaskSpec] | None = None,
              registry: RelationRegistry | None = None) -> RunConfig:
    """Turn the five run arguments into a single-LLM, single-task, single-relation config."""
    ns = build_parser().parse_args(list(args))
    return config_from_args(ns, tasks=tasks, registry=registry)
