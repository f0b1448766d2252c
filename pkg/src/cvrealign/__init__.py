"""Entanglement detection for Gaussian states via realignment, with noiseless filtration."""

from .criteria import (
    CriterionId,
    CriterionResult,
    ppt,
    realignment_trace_norm_normal_form,
    weak_realignment,
    weak_realignment_normal_form,
)
from .errors import FilterDomainError, StructuralError, TruncationError, UnphysicalError
from .filtration import FilterKind, FilterSpec, Subsystem, filter_covariance, full_pipeline, sweep_t, symmetrize_t
from .gaussian import BipartiteSplit, CovarianceMatrix, NormalForm, normal_form_reduce, validate

__all__ = [
    "BipartiteSplit",
    "CovarianceMatrix",
    "CriterionId",
    "CriterionResult",
    "FilterDomainError",
    "FilterKind",
    "FilterSpec",
    "NormalForm",
    "StructuralError",
    "Subsystem",
    "TruncationError",
    "UnphysicalError",
    "filter_covariance",
    "full_pipeline",
    "normal_form_reduce",
    "ppt",
    "realignment_trace_norm_normal_form",
    "sweep_t",
    "symmetrize_t",
    "validate",
    "weak_realignment",
    "weak_realignment_normal_form",
]
