"""Adding a new transformation and a relation that uses it, without touching
the package.

The new relation swaps digits for words ("3" -> "three"); a sentiment score
should not move when that happens.
"""

import re

from morphtest import builtin_registry, builtin_tasks
from morphtest.comparators import ComparatorConfig
from morphtest.gateway import Gateway, LlmHandle, MockScript
from morphtest.orchestrator import Runtime, run_test_group
from morphtest.relations import RelationDescriptor, register_transform

WORDS = "zero one two three four five six seven eight nine".split()


@register_transform("spell_digits")
def spell_digits(text, seed):
    return re.sub(r"\b\d\b", lambda m: WORDS[int(m.group())], text)


descriptor = RelationDescriptor.from_dict({
    "id": "MR-DIGITS",
    "name": "Spell out single digits",
    "applicable_tasks": ["sa"],
    "transformation": {"kind": "functional", "function_id": "spell_digits"},
    "output_relation": "EQUIVALENT",
    "verifications": ["followup_differs"],
    "input_target_policy": "EACH_SLOT",
})
registry = builtin_registry().register(descriptor)
print("relations for sa:", [r.id for r in registry.for_task("sa")])

tasks = builtin_tasks()
runtime = Runtime(Gateway(), registry, tasks, ComparatorConfig())

# a model that gets more positive when it sees words instead of digits
script = MockScript([("five", "0.9")], default_response="0.4")
llm = LlmHandle.mock("digit-sensitive", script)

for text in ["I give it 5 stars.", "Nothing numeric here."]:
    rec = run_test_group(llm, tasks["sa"], descriptor, (text,), seed=0, runtime=runtime)
    print(f"\n{text!r} -> {rec.followup_inputs[0][0]!r}")
    print("  outputs:", rec.source_output.text, [o.text for o in rec.followup_outputs])
    print("  relation:", [v.value for v in rec.relation], " excluded:", rec.verification_failure)
