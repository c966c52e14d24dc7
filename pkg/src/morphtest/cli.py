"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime abort.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

from .config import CLI_ARGS, DEFAULT_CONFIG_PATH, build_parser, config_from_args, load_config
from .errors import InvalidConfig, MalformedRelation, MalformedTaskFile, MorphError
from .orchestrator import run_campaign
from .reporting import results_path


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if any(getattr(ns, name) for name in CLI_ARGS):
            if ns.config:
                raise InvalidConfig("--config cannot be combined with the run arguments")
            config = config_from_args(ns)
        else:
            config = load_config(Path(ns.config) if ns.config else DEFAULT_CONFIG_PATH)
    except (InvalidConfig, MalformedTaskFile, MalformedRelation) as exc:
        print(f"morphtest: error: {exc}", file=sys.stderr)
        return 1

    try:
        report = run_campaign(config)
    except InvalidConfig as exc:
        print(f"morphtest: error: {exc}", file=sys.stderr)
        return 1
    except (MorphError, OSError) as exc:
        print(f"morphtest: aborted: {exc}", file=sys.stderr)
        return 2

    s = report.summary.overall
    print(f"groups: {s.groups_total}  excluded: {s.groups_excluded}  "
          f"violated: {s.groups_violated}  indeterminate: {s.indeterminate_groups}  "
          f"failure rate: {s.failure_rate:.3f}")
    print(f"results: {results_path(config.base_dir, report.campaign_id)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
