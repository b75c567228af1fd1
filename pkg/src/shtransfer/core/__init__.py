"""
Core modules for sh-transfer.

This package contains the exact algebra kernel, contraction data and the
perturbation lemma, operation families, the transfer engines, the envelope
and symbol calculus, and the foliation model with its pipeline.
"""

from .kernel import FormAlgebra, GradedElement, PolyContext
from .homotopy import Complex, ContractionData, GradedMap, perturb, verify_contraction
from .structures import OperationFamily
from .transfer import (
    AInfinityTransfer,
    LInfinityTransfer,
    transfer_ainfty,
    transfer_linfty,
)
from .foliation import PolyFoliation, build_foliation
from .pipeline import PipelineResult, run_pipeline

__all__ = [
    "GradedElement",
    "PolyContext",
    "FormAlgebra",
    "GradedMap",
    "Complex",
    "ContractionData",
    "perturb",
    "verify_contraction",
    "OperationFamily",
    "AInfinityTransfer",
    "LInfinityTransfer",
    "transfer_ainfty",
    "transfer_linfty",
    "PolyFoliation",
    "build_foliation",
    "PipelineResult",
    "run_pipeline",
]
