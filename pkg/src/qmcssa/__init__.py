"""Systematic sensitivity analysis of black-box numerical models with
pseudo-random and quasi-random (Halton, Sobol') sampling."""

__version__ = "0.1.0"

from .sequences import SequenceSpec, UnitPointMatrix, generate_matrix, point_at
from .distributions import InputDesign, ShockMatrix, TriangularSpec, transform_matrix
from .model import EvaluationRecord, ModelSpec, surrogate_evaluate
from .engine import ExperimentConfig, RunResult, estimate_mean, run_experiment
from .diagnostics import (
    ConvergenceSeries,
    compare_methods,
    convergence_n,
    l2_star_discrepancy,
    rate_fit,
    running_stats,
)

__all__ = [
    "SequenceSpec",
    "UnitPointMatrix",
    "generate_matrix",
    "point_at",
    "TriangularSpec",
    "InputDesign",
    "ShockMatrix",
    "transform_matrix",
    "ModelSpec",
    "EvaluationRecord",
    "surrogate_evaluate",
    "ExperimentConfig",
    "RunResult",
    "run_experiment",
    "estimate_mean",
    "ConvergenceSeries",
    "running_stats",
    "convergence_n",
    "rate_fit",
    "l2_star_discrepancy",
    "compare_methods",
]
