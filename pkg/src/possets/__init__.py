"""Positivity-preserving uncertainty sets for robust optimization.

The sets are built from the variation function ``g(t) = t - ln t - 1``
applied to the ratio of a parameter to its nominal value, so every member
is strictly positive.  The package provides the set model, its dual
reformulation, a worst-case oracle, calibration from data, two robust
linear-programming solvers and reference applications.
"""

from ._backend import BACKEND
from .calibration import CalibrationReport, LognormalSpec, calibrate, tau_guarantee
from .core import (
    EllipsoidalSet,
    NormKind,
    UncertaintySet,
    contains,
    inverse_variation_lower,
    inverse_variation_upper,
    variation,
)
from .duality import DualCertificate
from .oracle import MonotoneObjective, Monotonicity, WorstCaseCertificate, worst_case
from .solver import RobustProblem, Row, SolveResult, solve_cutting_plane, solve_dual_form
from .special import chi2_cdf, chi2_inv

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CalibrationReport",
    "LognormalSpec",
    "calibrate",
    "tau_guarantee",
    "EllipsoidalSet",
    "NormKind",
    "UncertaintySet",
    "contains",
    "inverse_variation_lower",
    "inverse_variation_upper",
    "variation",
    "DualCertificate",
    "MonotoneObjective",
    "Monotonicity",
    "WorstCaseCertificate",
    "worst_case",
    "RobustProblem",
    "Row",
    "SolveResult",
    "solve_cutting_plane",
    "solve_dual_form",
    "chi2_cdf",
    "chi2_inv",
]
