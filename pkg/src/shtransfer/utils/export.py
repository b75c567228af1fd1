"""
Export utilities for sh-transfer.

This module renders reports and golden operation tables as JSON. Output is
byte-deterministic: keys are sorted, indentation is two spaces and every file
ends with a newline. Wall times only ever go to the timings sidecar.
"""

from __future__ import annotations

import json
import logging
import platform
from pathlib import Path
from typing import Any, Callable, Dict, Hashable, List, Sequence, Tuple, Union

from ..core.kernel import GradedElement
from ..core.structures import OperationFamily
from ..types import Report
from .helpers import format_rational

logger = logging.getLogger(__name__)

PACKAGE = "sh-transfer"

KeyFormatter = Callable[[Hashable], str]


def environment() -> Dict[str, str]:
    from .. import __version__  # pylint: disable=import-outside-toplevel

    major, minor, _ = platform.python_version_tuple()
    return {"package": PACKAGE, "version": __version__, "python": f"{major}.{minor}"}


def dumps(data: Any) -> str:
    """Canonical JSON text."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def write_json(data: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def report_to_dict(report: Report) -> Dict[str, Any]:
    """
    The report body, records ordered by check id.

    Args:
        report: Report to render

    Returns:
        JSON-able dictionary without timing information
    """
    checks = [record.to_dict() for record in report.sorted_checks()]
    return {
        "scenario": report.scenario,
        "seed": report.seed,
        "caps": report.caps.to_dict(),
        "environment": environment(),
        "checks": checks,
        "passed": report.passed,
    }


def timings_to_dict(report: Report) -> Dict[str, Any]:
    return {
        "scenario": report.scenario,
        "elapsed": {
            record.check_id: round(record.elapsed, 3) for record in report.sorted_checks()
        },
    }


def timings_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.timings.json")


def write_report(report: Report, path: Union[str, Path], timings: bool = False) -> Path:
    """Write the report and, when asked, its timings sidecar next to it."""
    out = write_json(report_to_dict(report), path)
    if timings:
        write_json(timings_to_dict(report), timings_path(out))
    return out


def element_to_dict(element: GradedElement, format_key: KeyFormatter) -> Dict[str, str]:
    return {format_key(key): format_rational(coeff) for key, coeff in element.items()}


def operation_table(
    family: OperationFamily,
    arity: int,
    tuples: Sequence[Tuple[Hashable, ...]],
    format_key: KeyFormatter,
) -> Dict[str, Any]:
    """
    Golden table of ``family`` at one arity.

    Entries with zero output are kept, so that a table lists exactly the
    enumerated input tuples.
    """
    entries: List[Dict[str, Any]] = []
    for keys in tuples:
        output = family.evaluate(arity, keys)
        entries.append(
            {
                "inputs": [format_key(key) for key in keys],
                "output": element_to_dict(output, format_key),
            }
        )
    entries.sort(key=lambda entry: entry["inputs"])
    logger.debug("table of %s at arity %d: %d entries", family.name, arity, len(entries))
    return {"flavor": family.flavor, "arity": arity, "entries": entries}
