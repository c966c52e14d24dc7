import json

import pytest

from morphtest.comparators import ComparatorConfig, RelationVerdict
from morphtest.errors import (
    DuplicateRelationId,
    MalformedRelation,
    NotApplicable,
    OutputKindMismatch,
    TransformationFailed,
    UnknownFunctionId,
    UnknownRelation,
    UnknownVerification,
    UnparsedOutput,
)
from morphtest.gateway import Gateway, HashingEmbedder, LlmHandle, MockScript
from morphtest.relations import (
    OutputRelationKind,
    RelationDescriptor,
    RelationRegistry,
    TargetPolicy,
    TransformationSpec,
    TransformKind,
    VerificationSpec,
    check_output_relation,
    derive_followups,
    load_relations,
    register_relation,
    run_verifications,
    strip_llm_text,
    transform_paraphrase_llm,
)
from morphtest.relations.engine import FollowupDerivation
from morphtest.tasks import OutputKind, TaskOutput

from conftest import mock_handle, write_json


def functional(function_id="insert_random_spaces"):
    return TransformationSpec(TransformKind.FUNCTIONAL, function_id=function_id)


def make_mr(id="MR-X", tasks=("sa",), transformation=None, relation="EQUIVALENT",
            verifications=(), policy="EACH_SLOT", **kw):
    return RelationDescriptor(
        id=id, name=id, applicable_tasks=frozenset(tasks),
        transformation=transformation or functional(),
        output_relation=OutputRelationKind(relation),
        verifications=tuple(VerificationSpec(v) for v in verifications),
        input_target_policy=TargetPolicy(policy), **kw)


# -- registry ----------------------------------------------------------------

def test_register_into_empty_registry(registry):
    mr84 = registry.get("MR-84")
    reg = register_relation(mr84, RelationRegistry())
    assert len(reg) == 1 and reg.get("MR-84") is mr84


def test_register_twice_rejected(registry):
    reg = register_relation(registry.get("MR-84"), RelationRegistry())
    with pytest.raises(DuplicateRelationId):
        register_relation(registry.get("MR-84"), reg)


def test_register_returns_new_registry(registry):
    empty = RelationRegistry()
    register_relation(registry.get("MR-84"), empty)
    assert len(empty) == 0


def test_unknown_function_id():
    with pytest.raises(UnknownFunctionId):
        RelationRegistry([make_mr(transformation=functional("no_such_fn"))])


def test_unknown_verification_at_registration():
    with pytest.raises(UnknownVerification):
        RelationRegistry([make_mr(verifications=["nope"])])


def test_builtin_catalog_filter_for_sa(registry):
    # expected list from data/list_relations.json, reading applicable_tasks by hand
    assert [r.id for r in registry.for_task("sa")] == [
        "MR-51", "MR-84", "MR-RS", "MR-UC", "MR-SYN", "MR-TYPO", "MR-PUNCT", "MR-SHUF"]
    assert [r.id for r in registry.for_task("re")] == ["MR-RS", "MR-TYPO", "MR-PUNCT", "MR-SHUF"]


def test_unknown_relation_lookup(registry):
    with pytest.raises(UnknownRelation):
        registry.get("NOPE")


@pytest.mark.parametrize("kw", [
    dict(kind=TransformKind.FUNCTIONAL),
    dict(kind=TransformKind.FUNCTIONAL, function_id="f", prompt_template_id="t"),
    dict(kind=TransformKind.LLM_PROMPTED, prompt_template_id="paraphrase"),
])
def test_transformation_spec_invariants(kw):
    with pytest.raises(MalformedRelation):
        TransformationSpec(**kw)


def test_empty_applicable_tasks_rejected():
    with pytest.raises(MalformedRelation):
        make_mr(tasks=())


def test_relation_file_round_trip(tmp_path, registry):
    path = write_json(tmp_path / "list_relations.json", [r.to_dict() for r in registry])
    loaded = load_relations(path)
    assert [r.to_dict() for r in loaded] == [r.to_dict() for r in registry]
    assert set(json.loads(path.read_text())[0]) >= {
        "id", "name", "applicable_tasks", "transformation", "output_relation",
        "verifications", "input_target_policy"}


# -- derivation --------------------------------------------------------------

def test_each_and_all_on_nli_pair(tasks):
    mr = make_mr(tasks=["nli"], transformation=functional("to_uppercase"), policy="EACH_AND_ALL")
    d = derive_followups(mr, ("a premise.", "a hypothesis."), tasks["nli"], seed=7)
    assert d.followup_inputs == [
        ("A PREMISE.", "a hypothesis."),
        ("a premise.", "A HYPOTHESIS."),
        ("A PREMISE.", "A HYPOTHESIS."),
    ]
    assert d.transformed_slots == [(0,), (1,), (0, 1)]
    assert d.seed_used == 7


@pytest.mark.parametrize("policy", list(TargetPolicy))
def test_single_slot_gives_one_followup(tasks, policy):
    mr = make_mr(policy=policy.value)
    assert len(derive_followups(mr, ("text here",), tasks["sa"], 1).followup_inputs) == 1


def test_all_slots_gives_one_followup(tasks):
    mr = make_mr(tasks=["qa"], policy="ALL_SLOTS")
    d = derive_followups(mr, ("ctx here", "what?"), tasks["qa"], 3)
    assert d.transformed_slots == [(0, 1)]


def test_target_slots_restrict_transformation(tasks, registry):
    d = derive_followups(registry.get("MR-84"), ("Context.", "Question?"), tasks["qa"], 5)
    assert d.transformed_slots == [(0,)]
    [(ctx, q)] = d.followup_inputs
    assert ctx.startswith("Context. ") and q == "Question?"


def test_functional_derivation_deterministic(tasks, registry):
    mr = registry.get("MR-RS")
    a = derive_followups(mr, ("one two", "three four"), tasks["nli"], 11)
    b = derive_followups(mr, ("one two", "three four"), tasks["nli"], 11)
    assert json.dumps(a.__dict__) == json.dumps(b.__dict__)


def test_derivation_not_applicable(tasks, registry):
    with pytest.raises(NotApplicable):
        derive_followups(registry.get("MR-UC"), ("x",), tasks["re"], 0)
    with pytest.raises(NotApplicable):
        derive_followups(registry.get("MR-UC"), ("x", "y"), tasks["sa"], 0)


def test_llm_derivation_calls_transformer_once_per_slot(tasks, registry):
    script = MockScript(default_response='"rewritten"')
    transformer = LlmHandle.mock("t", script)
    d = derive_followups(registry.get("MR-51"), ("p.", "h."), tasks["nli"], 0, transformer)
    assert d.followup_inputs == [("rewritten", "h."), ("p.", "rewritten"),
                                 ("rewritten", "rewritten")]
    assert len(script.call_log) == 2
    assert 'Text: "The movie was great."' in script.call_log[0]


# -- paraphrase --------------------------------------------------------------

def test_paraphrase_scripted():
    llm = mock_handle(rules=[("The movie was great", "The film was excellent")], default="")
    assert transform_paraphrase_llm("The movie was great", llm, gateway=Gateway()) == \
        "The film was excellent"


def test_paraphrase_empty_response():
    with pytest.raises(TransformationFailed):
        transform_paraphrase_llm("x", mock_handle(default=""), gateway=Gateway())


def test_paraphrase_quoted_only_response():
    with pytest.raises(TransformationFailed):
        transform_paraphrase_llm("x", mock_handle(default='  ""  '), gateway=Gateway())


def test_paraphrase_strips_whitespace_and_quotes():
    assert transform_paraphrase_llm("x", mock_handle(default='  "X"  ')) == "X"


@pytest.mark.parametrize("raw,expected", [
    ('  "X"  ', "X"),
    ("'single'", "single"),
    ('"unbalanced', '"unbalanced'),
    ('""nested""', '"nested"'),
    ("“curly”", "curly"),
    ("plain", "plain"),
])
def test_strip_rule(raw, expected):
    assert strip_llm_text(raw) == expected


# -- output relation -----------------------------------------------------------

CFG = ComparatorConfig(embedding_provider=HashingEmbedder())


def free(text):
    return TaskOutput(OutputKind.FREE_TEXT, text, text.strip())


def num(x):
    return TaskOutput(OutputKind.NUMERIC_SCORE, str(x), x)


def test_equivalent_free_text_violated():
    mr = make_mr(tasks=["qa"])
    assert check_output_relation(mr, free("unknown"), free("cirque"), CFG) is RelationVerdict.VIOLATED


def test_equivalent_identical_satisfied():
    mr = make_mr(tasks=["qa"])
    assert check_output_relation(mr, free("cirque"), free("cirque"), CFG) is RelationVerdict.SATISFIED


def test_numeric_equal_window():
    mr = make_mr(relation="NUMERIC_EQUAL")
    assert check_output_relation(mr, num(0.50), num(0.55), CFG) is RelationVerdict.SATISFIED
    assert check_output_relation(mr, num(0.2), num(0.35), CFG) is RelationVerdict.VIOLATED


def test_numeric_equal_on_text_mismatch():
    with pytest.raises(OutputKindMismatch):
        check_output_relation(make_mr(relation="NUMERIC_EQUAL"), free("a"), free("b"), CFG)


def test_kind_mismatch_between_outputs():
    with pytest.raises(OutputKindMismatch):
        check_output_relation(make_mr(), free("0.5"), num(0.5), CFG)


def test_unparsed_output_refused():
    bad = TaskOutput.failed(OutputKind.NUMERIC_SCORE, "??")
    with pytest.raises(UnparsedOutput):
        check_output_relation(make_mr(), num(0.5), bad, CFG)


def test_different_relation():
    mr = make_mr(tasks=["qa"], relation="DIFFERENT")
    assert check_output_relation(mr, free("x"), free("x"), CFG) is RelationVerdict.VIOLATED
    assert check_output_relation(mr, free("apples"), free("bridges"), CFG) is RelationVerdict.SATISFIED


def test_label_and_set_outputs():
    lab = lambda s: TaskOutput(OutputKind.LABEL, s, s)
    tup = lambda *t: TaskOutput(OutputKind.TUPLE_SET, "", frozenset(t))
    eq = make_mr()
    assert check_output_relation(eq, lab("neutral"), lab("neutral"), CFG) is RelationVerdict.SATISFIED
    assert check_output_relation(eq, lab("neutral"), lab("entailment"), CFG) is RelationVerdict.VIOLATED
    s = make_mr(relation="SET_EQUAL")
    x, y = ("a", "r", "b"), ("c", "r", "d")
    assert check_output_relation(s, tup(x, y), tup(y, x), CFG) is RelationVerdict.SATISFIED
    assert check_output_relation(s, tup(x, y), tup(x), CFG) is RelationVerdict.VIOLATED


def test_semantic_dead_zone_indeterminate():
    class Fixed:
        def embed(self, text):
            return {"a": [1.0, 0.0], "b": [0.6, 0.8]}[text]
    cfg = ComparatorConfig(embedding_provider=Fixed())
    assert check_output_relation(make_mr(tasks=["qa"]), free("a"), free("b"), cfg) is \
        RelationVerdict.INDETERMINATE


# -- verifications -------------------------------------------------------------

def test_echo_paraphraser_fails_verification(tasks, registry):
    mr = registry.get("MR-51")
    echo = LlmHandle.mock("echo", MockScript([(lambda p: True, "The movie was great")]))
    d = derive_followups(mr, ("The movie was great",), tasks["sa"], 0, echo)
    assert run_verifications(mr, ("The movie was great",), d) is True


def test_no_verifications_never_fail():
    d = FollowupDerivation([("y",)], [(0,)], 0)
    assert run_verifications(make_mr(), ("x",), d) is False


def test_space_insertion_on_empty_source_fails(tasks, registry):
    mr = registry.get("MR-RS")
    d = derive_followups(mr, ("",), tasks["sa"], 0)
    assert run_verifications(mr, ("",), d) is True


def test_unknown_verification_at_run_time():
    mr = make_mr()
    object.__setattr__(mr, "verifications", (VerificationSpec("ghost"),))
    with pytest.raises(UnknownVerification):
        run_verifications(mr, ("x",), FollowupDerivation([("y",)], [(0,)], 0))


def test_output_phase_only_runs_with_outputs():
    mr = make_mr(verifications=["outputs_nonempty"])
    d = FollowupDerivation([("y",)], [(0,)], 0)
    assert run_verifications(mr, ("x",), d) is False
    blank = TaskOutput(OutputKind.FREE_TEXT, "  ", "")
    assert run_verifications(mr, ("x",), d, (free("a"), [blank])) is True


def test_multi_sentence_verification(tasks, registry):
    mr = registry.get("MR-SHUF")
    one = derive_followups(mr, ("Only one.",), tasks["sa"], 0)
    two = derive_followups(mr, ("First. Second.",), tasks["sa"], 0)
    assert run_verifications(mr, ("Only one.",), one) is True
    assert run_verifications(mr, ("First. Second.",), two) is False
