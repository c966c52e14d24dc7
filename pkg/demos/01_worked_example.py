"""One metamorphic group by hand: insert random spaces into a QA input and
see a scripted model change its answer.

Runs offline. The "model" is a scripted mock that answers "unknown" to the
untouched prompt and "cirque" to anything else.
"""

from morphtest import builtin_registry, builtin_tasks
from morphtest.comparators import ComparatorConfig
from morphtest.gateway import Gateway, HashingEmbedder, LlmHandle, MockRule, MockScript
from morphtest.orchestrator import Runtime, run_test_group
from morphtest.tasks import render_prompt

tasks = builtin_tasks()
registry = builtin_registry()
qa = tasks["qa"]
space_mr = registry.get("MR-RS")

source = ("The area in which a glacier forms is called a cirque.",
          "What geological features formed by glaciers?")

# what the model under test sees for the source input
intact_prompt = render_prompt(qa, source)
print(intact_prompt, end="\n\n")

script = MockScript([MockRule(intact_prompt, "unknown", exact=True)], default_response="cirque")
llm = LlmHandle.mock("scripted-llm", script)

runtime = Runtime(Gateway(), registry, tasks, ComparatorConfig(embedding_provider=HashingEmbedder()))
record = run_test_group(llm, qa, space_mr, source, seed=7, runtime=runtime)

print("follow-up context: ", record.followup_inputs[0][0])
print("follow-up question:", record.followup_inputs[0][1])
print("source output:     ", record.source_output.text)
print("follow-up output:  ", record.followup_outputs[0].text)
print("relation:          ", [v.value for v in record.relation])
print("excluded:          ", record.verification_failure)

# the six fields that land in the result file
for key, value in record.result_entry().items():
    print(f"{key:>22}: {value}")
