"""
sh-transfer Package

Exact, property-based verification of strong-homotopy transfer: A-infinity
and L-infinity structures obtained by perturbation from contraction data,
and their application to differential operators along polynomial foliations.

Version: 0.3.0
"""

__version__ = "0.3.0"
__author__ = "sh-transfer developers"

from .core.homotopy import (
    Complex,
    ContractionData,
    GradedMap,
    perturb,
    verify_contraction,
)
from .core.kernel import FormAlgebra, GradedElement, PolyContext
from .core.pipeline import PipelineResult, run_pipeline
from .core.structures import OperationFamily
from .core.transfer import transfer_ainfty, transfer_linfty
from .exceptions import (
    CapacityError,
    ConfigurationError,
    ContractViolation,
    NonTerminationError,
    ScenarioError,
    ShTransferError,
    VerificationError,
)
from .shtransfer import ShTransferRunner  # pylint: disable=import-error
from .types import Caps, CheckRecord, Report, Scenario

__all__ = [
    "Caps",
    "CheckRecord",
    "Report",
    "Scenario",
    "GradedElement",
    "PolyContext",
    "FormAlgebra",
    "GradedMap",
    "Complex",
    "ContractionData",
    "verify_contraction",
    "perturb",
    "OperationFamily",
    "transfer_ainfty",
    "transfer_linfty",
    "PipelineResult",
    "run_pipeline",
    "ShTransferRunner",
    "ShTransferError",
    "ContractViolation",
    "CapacityError",
    "NonTerminationError",
    "VerificationError",
    "ScenarioError",
    "ConfigurationError",
]
