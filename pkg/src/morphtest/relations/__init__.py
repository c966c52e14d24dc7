"""Metamorphic relations: registry, transformations, relation checks and verifications."""

from .engine import (
    FollowupDerivation,
    check_output_relation,
    derive_followups,
    llm_transform,
    run_verifications,
    strip_llm_text,
    transform_paraphrase_llm,
)
from .registry import (
    OutputRelationKind,
    RelationDescriptor,
    RelationRegistry,
    TargetPolicy,
    TransformationSpec,
    TransformKind,
    VerificationSpec,
    builtin_registry,
    load_relations,
    register_relation,
)
from .transforms import (
    TRANSFORMS,
    concat_random_sentence,
    derive_seed,
    insert_random_spaces,
    register_transform,
)
from .verifications import VERIFICATIONS, register_verification

__all__ = [
    "FollowupDerivation", "check_output_relation", "derive_followups", "llm_transform",
    "run_verifications", "strip_llm_text", "transform_paraphrase_llm",
    "OutputRelationKind", "RelationDescriptor", "RelationRegistry", "TargetPolicy",
    "TransformationSpec", "TransformKind", "VerificationSpec", "builtin_registry",
    "load_relations", "register_relation",
    "TRANSFORMS", "concat_random_sentence", "derive_seed", "insert_random_spaces",
    "register_transform", "VERIFICATIONS", "register_verification",
]
