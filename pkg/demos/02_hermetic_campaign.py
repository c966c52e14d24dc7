"""A whole campaign against a mock model, with checkpoints, a simulated crash
and a resume.

Everything is written under a temporary directory; nothing touches the network.
"""

import json
import re
import tempfile
from pathlib import Path

from morphtest import load_config, run_campaign
from morphtest.gateway import LlmHandle, MockScript

work = Path(tempfile.mkdtemp(prefix="morphtest-demo-"))

reviews = ["The soup was cold. Service was slow.", "Great film, loved the ending.",
           "It was fine.", "The staff were friendly. Prices were fair.",
           "Terrible acoustics.", "A quiet, pleasant hotel."]
(work / "inputs.json").write_text(json.dumps({"sa": reviews}))

(work / "run_config.json").write_text(json.dumps({
    "llm_list": ["mock-sentiment"],
    "tasks": {"sa": ["MR-UC", "MR-84", "MR-SHUF"]},
    "input_data": str(work / "inputs.json"),
    "base_dir": str(work / "out"),
    "checkpoint_interval": 4,
    "continue_from_checkpoint": True,
    "embedding_provider": "hashed",
}))
config = load_config(work / "run_config.json")

# a sentiment "model" that is thrown off by shouting
script = MockScript([(re.compile(r"[A-Z]{5,}"), "0.1")], default_response="0.7")


def mock(model_id):
    return LlmHandle.mock(model_id, script)


class PowerCut(Exception):
    pass


def crash_at_ten(n, record):
    if n == 10:
        raise PowerCut


try:
    run_campaign(config, handle_factory=mock, on_group=crash_at_ten)
except PowerCut:
    print("interrupted; checkpoints on disk:")
    for p in sorted((config.base_dir / "checkpoints").glob("ckpt-*.json")):
        print("   ", p.name)

report = run_campaign(config, handle_factory=mock)
s = report.summary.overall
print(f"\n{s.groups_total} groups, {s.groups_excluded} excluded, {s.groups_violated} violated, "
      f"failure rate {s.failure_rate:.3f}")

for (task, mr), stats in report.summary.by_task_relation.items():
    print(f"  {task}/{mr:<8} valid={stats.groups_total - stats.groups_excluded:<2} "
          f"violated={stats.groups_violated}")

# MR-SHUF needs at least two sentences, so single-sentence reviews are excluded
for r in report.records:
    if r.verification_failure:
        print(f"  excluded {r.mr_id} input {r.input_index}: {r.note}")

print("\nresults written to", config.base_dir / "results" / f"results-{report.campaign_id}.json")
