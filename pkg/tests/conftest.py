"""
Pytest configuration and fixtures for sh-transfer tests.

Fixtures keep the enumeration caps small so that every exact verification
finishes in seconds.
"""

import json
from pathlib import Path
from typing import Any, Dict

import pytest

from shtransfer.core.foliation import build_foliation
from shtransfer.core.kernel import FormAlgebra, PolyContext
from shtransfer.core.operators import WeylClifford
from shtransfer.core.pipeline import run_pipeline, toy_foliation
from shtransfer.types import Caps

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "docs" / "scenarios"


@pytest.fixture
def small_caps() -> Caps:
    """Caps for unit tests: arity 3, order 2, coefficients of degree <= 1."""
    return Caps(max_arity=3, max_order=2, max_degree=1, samples=20, audits=5)


@pytest.fixture
def tiny_caps() -> Caps:
    """Caps for whole-pipeline runs."""
    return Caps(max_arity=3, max_order=2, max_degree=0, samples=10, audits=3)


@pytest.fixture
def forms() -> FormAlgebra:
    """Polynomial forms in x1, x2, u1 with odd generators dx1, dx2."""
    return FormAlgebra(PolyContext(2, 1), odd=2)


@pytest.fixture
def weyl(forms: FormAlgebra) -> WeylClifford:
    return WeylClifford(forms)


@pytest.fixture(scope="session")
def flat():
    """R^2 foliated by the lines u = const."""
    return build_foliation(1, 1, [["0"]])


@pytest.fixture(scope="session")
def f1():
    """The curved foliation V_1 = d/du1 + u2 d/dx1, V_2 = d/du2."""
    return build_foliation(1, 2, [["u2"], ["0"]])


@pytest.fixture(scope="session")
def toy():
    """R^2 as a single leaf."""
    return toy_foliation(2)


@pytest.fixture(scope="session")
def f1_pipeline(f1):
    caps = Caps(max_arity=3, max_order=2, max_degree=0, samples=10, audits=3)
    return run_pipeline(f1, caps, verify=False)


@pytest.fixture(scope="session")
def flat_pipeline(flat):
    caps = Caps(max_arity=4, max_order=2, max_degree=0, samples=10, audits=3)
    return run_pipeline(flat, caps, verify=False)


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    """The scenario files shipped under docs/scenarios."""
    return SCENARIO_DIR


@pytest.fixture
def scenario_data() -> Dict[str, Any]:
    """A minimal valid foliation scenario."""
    return {
        "name": "F1",
        "kind": "foliation",
        "n": 1,
        "m": 2,
        "V": [["u2"], ["0"]],
        "caps": {"max_arity": 3, "max_order": 2, "max_degree": 0},
        "checks": ["closed_forms"],
        "seed": 7,
    }


@pytest.fixture
def scenario_file(tmp_path: Path, scenario_data: Dict[str, Any]) -> Path:
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario_data))
    return path
