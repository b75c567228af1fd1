"""
Scenario validation for sh-transfer.

This module reads scenario JSON files into ``Scenario`` objects. Every schema
or polynomial-syntax problem is reported as a ScenarioError naming the field.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

from ..core.faults import KNOWN_FAULTS
from ..core.kernel import PolyContext
from ..exceptions import ConfigurationError, ContractViolation, ScenarioError
from ..types import Caps, Scenario

logger = logging.getLogger(__name__)

KINDS = ("foliation", "toy", "abstract")
REQUIRED_KEYS = ("name", "kind")
OPTIONAL_KEYS = ("n", "m", "V", "caps", "checks", "seed", "faults", "description")
CAPS_KEYS = tuple(Caps.__dataclass_fields__)  # pylint: disable=no-member
MAX_DIMENSION = 4


def _integer(data: Mapping[str, Any], key: str, default: int, minimum: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{key!r} must be an integer, got {value!r}")
    if value < minimum:
        raise ScenarioError(f"{key!r} must be at least {minimum}, got {value}")
    return value


def validate_caps(raw: Any) -> Caps:
    """Read a caps object; unknown keys and non-integers are rejected."""
    if raw is None:
        return Caps()
    if not isinstance(raw, dict):
        raise ScenarioError("'caps' must be an object")
    unknown = sorted(set(raw) - set(CAPS_KEYS))
    if unknown:
        raise ScenarioError(f"unknown caps {unknown}")
    for key, value in raw.items():
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ScenarioError(f"cap {key!r} must be an integer or null")
    try:
        return Caps(**raw)
    except ConfigurationError as exc:
        raise ScenarioError(f"invalid caps: {exc}") from exc


def validate_table(n: int, m: int, raw: Any) -> List[List[str]]:
    """
    Check the shape of the V table and parse every entry.

    Args:
        n: Leaf dimension
        m: Transverse dimension
        raw: The ``V`` value of the scenario

    Returns:
        The table with every entry as polynomial text
    """
    if not isinstance(raw, list) or len(raw) != m:
        raise ScenarioError(f"'V' must be a list of {m} rows")
    context = PolyContext(n, m)
    table = []
    for a, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != n:
            raise ScenarioError(f"row {a + 1} of 'V' must have {n} entries")
        entries = []
        for i, entry in enumerate(row):
            if isinstance(entry, bool) or not isinstance(entry, (str, int)):
                raise ScenarioError(
                    f"V[{a + 1}][{i + 1}] must be a string, got {entry!r}"
                )
            text = str(entry)
            try:
                context.parse(text)
            except ContractViolation as exc:
                raise ScenarioError(f"V[{a + 1}][{i + 1}]: {exc}") from exc
            entries.append(text)
        table.append(entries)
    return table


def validate_names(raw: Any, field: str, known: Any) -> List[str]:
    if raw is None:
        return []
    if not isinstance(raw, list) or not all(isinstance(item, str) for item in raw):
        raise ScenarioError(f"{field!r} must be a list of strings")
    unknown = [item for item in raw if item not in known]
    if unknown:
        raise ScenarioError(f"unknown {field}: {unknown}")
    return list(raw)


def parse_scenario(data: Any) -> Scenario:
    """Validate a decoded scenario object."""
    from .checks import CHECKS  # pylint: disable=import-outside-toplevel

    if not isinstance(data, dict):
        raise ScenarioError("a scenario must be a JSON object")
    missing = [key for key in REQUIRED_KEYS if key not in data]
    if missing:
        raise ScenarioError(f"missing keys {missing}")
    unknown = sorted(set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ScenarioError(f"unknown keys {unknown}")

    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ScenarioError("'name' must be a non-empty string")
    kind = data["kind"]
    if kind not in KINDS:
        raise ScenarioError(f"'kind' must be one of {list(KINDS)}, got {kind!r}")

    n = _integer(data, "n", 1, 1)
    m = _integer(data, "m", 0, 0)
    if n > MAX_DIMENSION or m > MAX_DIMENSION:
        raise ScenarioError(f"n and m are limited to {MAX_DIMENSION}")
    if kind == "foliation":
        table = validate_table(n, m, data.get("V", [] if m == 0 else None))
    else:
        if m != 0 or data.get("V"):
            raise ScenarioError(f"a {kind} scenario has no transverse directions")
        table = []

    scenario = Scenario(
        name=name,
        kind=kind,
        n=n,
        m=m,
        V=table,
        caps=validate_caps(data.get("caps")),
        checks=validate_names(data.get("checks"), "checks", CHECKS),
        seed=_integer(data, "seed", 0, 0),
        faults=validate_names(data.get("faults"), "faults", KNOWN_FAULTS),
    )
    misplaced = [check for check in scenario.checks if kind not in CHECKS[check].kinds]
    if misplaced:
        raise ScenarioError(f"checks {misplaced} do not apply to a {kind} scenario")
    logger.debug("scenario %s: kind=%s n=%d m=%d", name, kind, n, m)
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Read and validate a scenario file.

    Raises:
        ScenarioError: If the file is unreadable, not JSON or not schema-valid
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ScenarioError(f"{path} is not UTF-8 text: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from exc
    return parse_scenario(data)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """The JSON object ``parse_scenario`` reads back to an equal scenario."""
    return {
        "name": scenario.name,
        "kind": scenario.kind,
        "n": scenario.n,
        "m": scenario.m,
        "V": scenario.V,
        "caps": scenario.caps.to_dict(),
        "checks": scenario.checks,
        "seed": scenario.seed,
        "faults": scenario.faults,
    }
