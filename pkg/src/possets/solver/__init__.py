"""Robust linear programs: problem model, barrier solver and two robust solvers.

The robust solvers build on the worst-case oracle, which itself uses the
barrier solver, so they are imported on first access.
"""

from importlib import import_module

from .barrier import INFEASIBLE, ITERATION_CAP, NUMERICAL_FAILURE, OPTIMAL, SmoothProgram, smooth_convex_solve
from .logterms import safeguarded_log
from .problem import RobustProblem, Row, SchemaError, SolveResult

_LAZY = {"solve_cutting_plane": ".cutting_plane", "solve_dual_form": ".dual_form"}

__all__ = [
    "OPTIMAL",
    "INFEASIBLE",
    "ITERATION_CAP",
    "NUMERICAL_FAILURE",
    "SmoothProgram",
    "smooth_convex_solve",
    "solve_cutting_plane",
    "solve_dual_form",
    "safeguarded_log",
    "RobustProblem",
    "Row",
    "SchemaError",
    "SolveResult",
]


def __getattr__(name):
    if name in _LAZY:
        return getattr(import_module(_LAZY[name], __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
