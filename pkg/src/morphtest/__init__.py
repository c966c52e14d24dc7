"""Metamorphic testing of LLMs on NLP tasks, without labelled data."""

from .comparators import (
    ComparatorConfig,
    RelationVerdict,
    exact_equal,
    numeric_equivalent,
    semantic_similarity,
    semantic_verdict,
    set_compare,
)
from .config import RunConfig, load_config, parse_cli
from .gateway import Gateway, HashingEmbedder, LlmHandle, MockRule, MockScript, ResponseCache
from .orchestrator import Runtime, resume_latest, run_campaign, run_test_group, save_checkpoint
from .records import TestRecord
from .relations import builtin_registry, derive_followups
from .reporting import RunReport, read_results, summarize, write_results
from .tasks import OutputKind, TaskOutput, TaskSpec, builtin_tasks, parse_output, render_prompt

__version__ = "0.1.0"

__all__ = [
    "ComparatorConfig", "RelationVerdict", "exact_equal", "numeric_equivalent",
    "semantic_similarity", "semantic_verdict", "set_compare",
    "RunConfig", "load_config", "parse_cli",
    "Gateway", "HashingEmbedder", "LlmHandle", "MockRule", "MockScript", "ResponseCache",
    "Runtime", "resume_latest", "run_campaign", "run_test_group", "save_checkpoint",
    "TestRecord", "builtin_registry", "derive_followups",
    "RunReport", "read_results", "summarize", "write_results",
    "OutputKind", "TaskOutput", "TaskSpec", "builtin_tasks", "parse_output", "render_prompt",
]
