"""Result files and summary statistics."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import IoFailure
from .records import TestRecord

_COUNTS = ("groups_total", "groups_excluded", "groups_violated", "indeterminate_groups")


@dataclass
class GroupStats:
    groups_total: int = 0
    groups_excluded: int = 0
    groups_violated: int = 0
    indeterminate_groups: int = 0

    @property
    def failure_rate(self) -> float:
        valid = self.groups_total - self.groups_excluded
        return self.groups_violated / valid if valid else 0.0

    def add(self, record: TestRecord) -> None:
        self.groups_total += 1
        if record.verification_failure:
            self.groups_excluded += 1
        elif record.violated:
            self.groups_violated += 1
        elif record.indeterminate:
            self.indeterminate_groups += 1

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in _COUNTS}
        d["failure_rate"] = self.failure_rate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GroupStats":
        return cls(**{k: int(d[k]) for k in _COUNTS})


@dataclass
class Summary:
    overall: GroupStats = field(default_factory=GroupStats)
    by_task_relation: dict[tuple[str, str], GroupStats] = field(default_factory=dict)
    by_model: dict[str, GroupStats] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "by_task_relation": [
                {"task_id": t, "mr_id": m, **self.by_task_relation[(t, m)].to_dict()}
                for t, m in sorted(self.by_task_relation)
            ],
            "by_model": [{"model_id": m, **self.by_model[m].to_dict()}
                         for m in sorted(self.by_model)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Summary":
        return cls(
            overall=GroupStats.from_dict(d["overall"]),
            by_task_relation={(e["task_id"], e["mr_id"]): GroupStats.from_dict(e)
                              for e in d["by_task_relation"]},
            by_model={e["model_id"]: GroupStats.from_dict(e) for e in d["by_model"]},
        )


def summarize(records: Iterable[TestRecord]) -> Summary:
    """Group-level counts. A group is violated when any follow-up verdict is VIOLATED
    and it passed its verifications; INDETERMINATE alone does not count as violated.
    """
    s = Summary()
    for r in records:
        s.overall.add(r)
        s.by_task_relation.setdefault((r.task_id, r.mr_id), GroupStats()).add(r)
        s.by_model.setdefault(r.model_id, GroupStats()).add(r)
    return s


@dataclass
class RunReport:
    campaign_id: str
    records: list[TestRecord]
    summary: Summary
    metadata: dict = field(default_factory=dict)

    @classmethod
    def build(cls, campaign_id: str, records: list[TestRecord], **metadata) -> "RunReport":
        return cls(campaign_id, list(records), summarize(records), metadata)

    def to_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "metadata": self.metadata,
            "summary": self.summary.to_dict(),
            "records": [r.result_entry() for r in self.records],
            "record_details": [r.details() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if len(d["records"]) != len(d["record_details"]):
            raise ValueError("records and record_details differ in length")
        records = [TestRecord.from_parts(e, x) for e, x in zip(d["records"], d["record_details"])]
        return cls(d["campaign_id"], records, Summary.from_dict(d["summary"]), d.get("metadata", {}))


def atomic_write_json(path: Path, payload) -> Path:
    """Write JSON to a temp file in the target directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.stem}-", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, ensure_ascii=False)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        Path(tmp).unlink(missing_ok=True)
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def results_path(base_dir: str | Path, campaign_id: str) -> Path:
    return Path(base_dir) / "results" / f"results-{campaign_id}.json"


def write_results(report: RunReport, base_dir: str | Path) -> Path:
    return atomic_write_json(results_path(base_dir, report.campaign_id), report.to_dict())


def read_results(path: str | Path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
