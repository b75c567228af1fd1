#!/usr/bin/env python3
"""
sh-transfer - batch front-end for the homotopy transfer verifier.

Subcommands:
    run         run a scenario's checks and write a JSON report
    emit_table  write the golden structure constants of one arity
    selfcheck   run the built-in acceptance suite

Exit status is 0 when every check passes, 1 on a failed check or a runtime
error, and 2 on a malformed scenario or invalid options.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .core.faults import KNOWN_FAULTS, inject_fault
from .core.pipeline import run_pipeline
from .exceptions import ConfigurationError, ScenarioError, ShTransferError
from .types import Caps, Report, Scenario
from .utils.checks import SELFCHECK_CAPS, run_checks, scenario_foliation, selfcheck
from .utils.export import (
    dumps,
    operation_table,
    report_to_dict,
    write_json,
    write_report,
)
from .utils.helpers import seeded_tuples
from .utils.validation import load_scenario

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class ShTransferRunner:
    """Applies command-line overrides and runs one subcommand."""

    def __init__(
        self,
        max_arity: Optional[int] = None,
        max_order: Optional[int] = None,
        max_degree: Optional[int] = None,
        seed: Optional[int] = None,
        jobs: int = 1,
        timings: bool = False,
    ):
        if jobs < 1:
            raise ConfigurationError("--jobs must be positive")
        if seed is not None and seed < 0:
            raise ConfigurationError("--seed must be nonnegative")
        self.overrides = {"max_arity": max_arity, "max_order": max_order, "max_degree": max_degree}
        self.seed = seed
        self.jobs = jobs
        self.timings = timings

    def caps(self, base: Caps) -> Caps:
        return base.with_overrides(**self.overrides)

    def load(self, path: Path) -> Scenario:
        """Read a scenario and apply the overrides to it."""
        scenario = load_scenario(path)
        scenario.caps = self.caps(scenario.caps)
        if self.seed is not None:
            scenario.seed = self.seed
        logger.info("loaded scenario %s from %s", scenario.name, path)
        return scenario

    def _emit_report(self, report: Report, out: Optional[Path]) -> int:
        if out is None:
            sys.stdout.write(dumps(report_to_dict(report)))
        else:
            write_report(report, out, self.timings)
        failed = [record.check_id for record in report.sorted_checks() if not record.passed]
        for check_id in failed:
            print(f"FAILED {check_id}", file=sys.stderr)
        return 0 if report.passed else 1

    def run(self, scenario_path: Path, out: Optional[Path]) -> int:
        scenario = self.load(scenario_path)
        report = run_checks(scenario, scenario.caps, self.jobs)
        return self._emit_report(report, out)

    def emit_table(self, scenario_path: Path, arity: int, out: Optional[Path]) -> int:
        """Golden table of the transferred operation of one arity."""
        scenario = self.load(scenario_path)
        caps = scenario.caps
        if arity < 1:
            raise ConfigurationError("--arity must be positive")
        if arity > caps.max_arity:
            caps = replace(caps, max_arity=arity)
        result = run_pipeline(scenario_foliation(scenario), caps)
        keys = list(result.perturbed.contraction.small.basis(caps))
        tuples = seeded_tuples(keys, arity, caps.samples, scenario.seed)
        table = operation_table(result.family, arity, tuples, result.S.format_key)
        if out is None:
            sys.stdout.write(dumps(table))
        else:
            write_json(table, out)
        return 0

    def selfcheck(
        self, out: Optional[Path], fault: Optional[str] = None, mutations: bool = True
    ) -> int:
        caps = self.caps(SELFCHECK_CAPS)
        if fault is not None:
            with inject_fault(fault):
                report = selfcheck(caps, self.jobs, mutations=False)
        else:
            report = selfcheck(caps, self.jobs, mutations)
        return self._emit_report(report, out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--out", type=Path, default=None, help="Output file (default: stdout)"
    )
    common.add_argument(
        "--max-arity", type=int, default=None, help="Largest arity checked"
    )
    common.add_argument(
        "--max-order", type=int, default=None, help="Largest operator order"
    )
    common.add_argument(
        "--max-degree", type=int, default=None, help="Largest polynomial degree"
    )
    common.add_argument("--seed", type=int, default=None, help="Sampling seed override")
    common.add_argument(
        "--jobs", type=int, default=1, help="Worker threads (default: 1)"
    )
    common.add_argument(
        "--timings", action="store_true", help="Write wall times to a sidecar file"
    )
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="More logging (-v info, -vv debug)"
    )

    parser = argparse.ArgumentParser(
        prog="shtransfer",
        description="Exact verification of homotopy transfer on polynomial foliations.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="Run a scenario's checks")
    run.add_argument("--scenario", type=Path, required=True, help="Scenario JSON file")

    table = commands.add_parser(
        "emit_table", parents=[common], help="Write a golden table of structure constants"
    )
    table.add_argument(
        "--scenario", type=Path, required=True, help="Scenario JSON file"
    )
    table.add_argument(
        "--arity", type=int, required=True, help="Arity of the operation"
    )

    check = commands.add_parser(
        "selfcheck", parents=[common], help="Run the built-in acceptance suite"
    )
    check.add_argument(
        "--no-mutations", action="store_true", help="Skip the fault-injection phase"
    )
    check.add_argument(
        "--fault", choices=KNOWN_FAULTS, default=None, help=argparse.SUPPRESS
    )
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> None:
    """Main entry point for CLI."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        runner = ShTransferRunner(
            max_arity=args.max_arity,
            max_order=args.max_order,
            max_degree=args.max_degree,
            seed=args.seed,
            jobs=args.jobs,
            timings=args.timings,
        )
        if args.command == "run":
            code = runner.run(args.scenario, args.out)
        elif args.command == "emit_table":
            code = runner.emit_table(args.scenario, args.arity, args.out)
        else:
            code = runner.selfcheck(args.out, args.fault, not args.no_mutations)
    except (ScenarioError, ConfigurationError) as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(2)
    except ShTransferError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        sys.exit(1)
    except Exception as e:  # pylint: disable=broad-except
        print(f"Unexpected error: {e}", file=sys.stderr)
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
