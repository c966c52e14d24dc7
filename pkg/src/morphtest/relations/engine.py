"""Follow-up derivation, output-relation checking and verification for a metamorphic group."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..comparators import (
    ComparatorConfig,
    Expectation,
    RelationVerdict,
    SetRelation,
    exact_equal,
    numeric_equivalent,
    semantic_similarity,
    semantic_verdict,
    set_compare,
)
from ..errors import (
    GatewayError,
    NotApplicable,
    OutputKindMismatch,
    TransformationFailed,
    UnknownVerification,
    UnparsedOutput,
)
from ..gateway import Gateway, LlmHandle
from ..tasks import InputTuple, OutputKind, TaskOutput, TaskSpec
from .registry import (
    OutputRelationKind,
    RelationDescriptor,
    TargetPolicy,
    TransformationSpec,
    TransformKind,
    load_prompt_templates,
)
from .transforms import TRANSFORMS, derive_seed
from .verifications import VERIFICATIONS

_QUOTE_PAIRS = {'"': '"', "'": "'", "“": "”", "‘": "’", "`": "`"}

_default_gateway: Gateway | None = None


def _gateway(gateway: Gateway | None) -> Gateway:
    global _default_gateway
    if gateway is not None:
        return gateway
    if _default_gateway is None:
        _default_gateway = Gateway()
    return _default_gateway


@dataclass(frozen=True)
class FollowupDerivation:
    followup_inputs: list[InputTuple]
    transformed_slots: list[tuple[int, ...]]
    seed_used: int


def strip_llm_text(text: str) -> str:
    """Trim whitespace, then one matching pair of surrounding quotes."""
    text = text.strip()
    if len(text) >= 2 and _QUOTE_PAIRS.get(text[0]) == text[-1]:
        text = text[1:-1]
    return text


def render_transform_prompt(template: str, text: str,
                            examples: Sequence[tuple[str, str]]) -> str:
    shots = "".join(f'Text: "{a}"\nRewritten: "{b}"\n\n' for a, b in examples)
    return template.replace("{EXAMPLES}", shots).replace("{INPUT}", text)


def llm_transform(text: str, spec: TransformationSpec, transformer_llm: LlmHandle, *,
                  gateway: Gateway | None = None,
                  prompt_templates: dict[str, str] | None = None) -> str:
    templates = prompt_templates if prompt_templates is not None else load_prompt_templates()
    try:
        template = templates[spec.prompt_template_id]
    except KeyError:
        raise TransformationFailed(f"no prompt template {spec.prompt_template_id!r}") from None
    prompt = render_transform_prompt(template, text, spec.few_shot_examples)
    try:
        raw = _gateway(gateway).complete(transformer_llm, prompt)
    except GatewayError as exc:
        raise TransformationFailed(f"transformer LLM failed: {exc}") from exc
    out = strip_llm_text(raw)
    if not out:
        raise TransformationFailed("transformer LLM returned an empty rewrite")
    return out


PARAPHRASE_SPEC = TransformationSpec(
    TransformKind.LLM_PROMPTED,
    prompt_template_id="paraphrase",
    few_shot_examples=(
        ("The movie was great.", "The film was excellent."),
        ("She left the office early because she felt unwell.",
         "Feeling ill, she departed from work ahead of time."),
        ("Who wrote the report?", "Who was the author of the report?"),
    ),
)


def transform_paraphrase_llm(text: str, transformer_llm: LlmHandle, *,
                             gateway: Gateway | None = None) -> str:
    return llm_transform(text, PARAPHRASE_SPEC, transformer_llm, gateway=gateway)


def slot_combinations(policy: TargetPolicy, slots: Sequence[int]) -> list[tuple[int, ...]]:
    each = [(k,) for k in slots]
    every = [tuple(slots)]
    if policy is TargetPolicy.EACH_SLOT:
        combos = each
    elif policy is TargetPolicy.ALL_SLOTS:
        combos = every
    else:
        combos = each + every
    seen: list[tuple[int, ...]] = []
    for c in combos:
        if c not in seen:
            seen.append(c)
    return seen


def derive_followups(mr: RelationDescriptor, source: Sequence[str], task: TaskSpec, seed: int,
                     transformer_llm: LlmHandle | None = None, *,
                     gateway: Gateway | None = None,
                     prompt_templates: dict[str, str] | None = None) -> FollowupDerivation:
    """Build the follow-up inputs for one source input.

    Each targeted slot is transformed once and reused across slot combinations,
    so under EACH_AND_ALL the premise-only follow-up and the both-slots
    follow-up carry the same rewritten premise.
    """
    source = tuple(source)
    if not mr.applies_to(task.id):
        raise NotApplicable(f"{mr.id} does not apply to task {task.id!r}")
    if len(source) != task.input_arity:
        raise NotApplicable(
            f"task {task.id!r} takes {task.input_arity} inputs, got {len(source)}")

    slots = mr.slots_for(task)
    spec = mr.transformation
    rewritten: dict[int, str] = {}
    for k in slots:
        if spec.kind is TransformKind.FUNCTIONAL:
            rewritten[k] = TRANSFORMS[spec.function_id](source[k], derive_seed(seed, "slot", k))
        else:
            if transformer_llm is None:
                raise TransformationFailed(f"{mr.id} needs a transformer LLM")
            rewritten[k] = llm_transform(source[k], spec, transformer_llm,
                                         gateway=gateway, prompt_templates=prompt_templates)

    combos = slot_combinations(mr.input_target_policy, slots)
    followups = [tuple(rewritten[i] if i in combo else s for i, s in enumerate(source))
                 for combo in combos]
    return FollowupDerivation(followups, combos, seed)


def _expect(kind: OutputRelationKind) -> Expectation:
    return Expectation.DIFFERENT if kind is OutputRelationKind.DIFFERENT else Expectation.EQUIVALENT


def _verdict(ok: bool) -> RelationVerdict:
    return RelationVerdict.SATISFIED if ok else RelationVerdict.VIOLATED


def check_output_relation(mr: RelationDescriptor, source_output: TaskOutput,
                          followup_output: TaskOutput,
                          comparators: ComparatorConfig) -> RelationVerdict:
    kind = source_output.kind
    if followup_output.kind is not kind:
        raise OutputKindMismatch(f"{kind.value} vs {followup_output.kind.value}")
    if not (source_output.parse_ok and followup_output.parse_ok):
        raise UnparsedOutput(f"{mr.id}: cannot compare an output that failed to parse")
    rel = mr.output_relation
    a, b = source_output.parsed, followup_output.parsed

    if rel is OutputRelationKind.NUMERIC_EQUAL:
        if kind is not OutputKind.NUMERIC_SCORE:
            raise OutputKindMismatch(f"{mr.id}: NUMERIC_EQUAL needs numeric outputs, got {kind.value}")
        return _verdict(numeric_equivalent(a, b, comparators.numeric_window))
    if rel is OutputRelationKind.SET_EQUAL:
        if kind is not OutputKind.TUPLE_SET:
            raise OutputKindMismatch(f"{mr.id}: SET_EQUAL needs tuple-set outputs, got {kind.value}")
        return _verdict(set_compare(a, b) is SetRelation.SET_EQUAL)

    want_same = rel is OutputRelationKind.EQUIVALENT
    if kind is OutputKind.FREE_TEXT:
        if exact_equal(a, b):
            return _verdict(want_same)
        score = semantic_similarity(a, b, comparators.embedding_provider)
        return semantic_verdict(score, _expect(rel), comparators)
    if kind is OutputKind.LABEL:
        same = a == b
    elif kind is OutputKind.NUMERIC_SCORE:
        same = numeric_equivalent(a, b, comparators.numeric_window)
    else:
        same = set_compare(a, b) is SetRelation.SET_EQUAL
    return _verdict(same == want_same)


def run_verifications(mr: RelationDescriptor, source: Sequence[str],
                      followups: FollowupDerivation,
                      outputs: tuple[TaskOutput, Sequence[TaskOutput]] | None = None) -> bool:
    """Return True (verification failure) if any of the relation's predicates is unsatisfied.

    Output-phase predicates are skipped when ``outputs`` is None.
    """
    source = tuple(source)
    failed = False
    for spec in mr.verifications:
        try:
            v = VERIFICATIONS[spec.name]
        except KeyError:
            raise UnknownVerification(spec.name) from None
        if v.phase == "input":
            failed |= not v.check(source, followups)
        elif outputs is not None:
            failed |= not v.check(*outputs)
    return failed
