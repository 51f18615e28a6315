"""Row normalization, presolve and oracle verification shared by both solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..core import UncertaintySet
from ..oracle import MonotoneObjective, worst_case
from .problem import RobustProblem, Row

__all__ = [
    "VERIFY_ATOL",
    "RobustRow",
    "normalize_robust_rows",
    "certain_block",
    "implicit_equalities",
    "row_objective",
    "verify_solution",
]

#: Worst-case slack below which a robust row counts as violated.
VERIFY_ATOL = 1e-6


@dataclass(frozen=True)
class RobustRow:
    """Robust row in the form ``min_a  a^T (Ps x + qs) + cs^T x - bs >= 0``.

    The sign of ``<=`` rows is flipped so every row is a lower bound.
    ``index`` is the position of the row in the problem; ``keep`` marks the
    coordinates of the original set that were retained.
    """

    index: int
    uset: UncertaintySet
    Ps: np.ndarray
    qs: np.ndarray
    cs: np.ndarray
    bs: float
    keep: np.ndarray


def _reduce(row: Row, k: int) -> RobustRow | None:
    """Signed robust row, or None when the row is effectively certain."""
    uset = row.uncertainty
    P, q = row.multiplier_map()
    sg = row.sign
    Ps, qs = sg * P, sg * q
    keep = np.ones(uset.m, dtype=bool)
    if uset.is_diagonal and uset.V is None:
        # with a diagonal shape the coordinates decouple; a coordinate whose
        # multiplier is identically zero never affects the row
        keep = np.any(Ps != 0.0, axis=1) | (qs != 0.0)
    if uset.tau == 0.0 or not np.any(keep):
        return None
    if not np.all(keep):
        d = np.diag(uset.A)[keep]
        uset = UncertaintySet(uset.a0[keep], uset.tau, np.diag(d), uset.norm)
        Ps, qs = Ps[keep], qs[keep]
    return RobustRow(k, uset, Ps, qs, sg * row.coeffs, sg * row.rhs, keep)


def normalize_robust_rows(problem: RobustProblem) -> tuple[list[RobustRow], list[int]]:
    """Split robust rows into genuinely robust ones and nominal ones.

    Returns
    -------
    robust : list of RobustRow
    nominal : list of int
        Indices of robust rows that reduce to their nominal row (zero budget
        or no coordinate that affects the row).
    """
    robust, nominal = [], []
    for k, row in enumerate(problem.rows):
        if not row.is_robust:
            continue
        rr = _reduce(row, k)
        if rr is None:
            nominal.append(k)
        else:
            robust.append(rr)
    return robust, nominal


def certain_block(problem: RobustProblem, nominal: list[int]):
    """Linear rows as ``(G, h)`` for ``<=``/``>=`` and ``(E, f)`` for ``=``.

    Robust rows listed in ``nominal`` enter with their nominal coefficients.
    """
    G, h, E, f = [], [], [], []
    nominal = set(nominal)
    for k, row in enumerate(problem.rows):
        if row.is_robust and k not in nominal:
            continue
        coeffs, const = row.nominal_coeffs()
        rhs = row.rhs - const
        if row.sense == "=":
            E.append(coeffs)
            f.append(rhs)
        elif row.sense == "<=":
            G.append(coeffs)
            h.append(rhs)
        else:
            G.append(-coeffs)
            h.append(-rhs)
    n = problem.n
    as_mat = lambda rows: np.array(rows, dtype=float).reshape(len(rows), n)  # noqa: E731
    return as_mat(G), np.array(h, dtype=float), as_mat(E), np.array(f, dtype=float)


def implicit_equalities(G, h, E, f, lower, upper, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Inequalities that hold with equality at every feasible point.

    A barrier method needs a strictly feasible point, so rows (and bounds)
    that the linear constraints force to be tight must be moved to the
    equality block.  The detection repeatedly maximises the sum of bounded
    slacks ``0 <= s_i <= 1`` over the rows not yet known to be loose; rows
    with a positive slack are loose, and once no further row becomes loose
    the remaining ones are implicit equalities.

    Parameters
    ----------
    G, h : ndarray
        Inequalities ``G x <= h``.
    E, f : ndarray
        Equalities ``E x = f``.
    lower, upper : ndarray
        Finite variable bounds.
    tol : float, optional
        Relative slack threshold below which a row counts as tight.

    Returns
    -------
    tight_rows : ndarray of bool
        Implicit equalities among the rows of ``G``.
    fixed : ndarray
        Forced value per variable, ``nan`` for variables that can move.
        A linear system with no feasible point returns no detections.
    """
    n = lower.size
    k = G.shape[0]
    eye = np.eye(n)
    # every inequality as a row of  A x <= b:  G, then -x <= -lower, then x <= upper
    A = np.vstack([G.reshape(k, n), -eye, eye])
    b = np.concatenate([h, -lower, upper])
    r = b.size
    thresh = tol * (1.0 + np.abs(b))
    loose = np.zeros(r, dtype=bool)
    # rows with equal bounds are tight without an LP
    same = lower == upper
    while True:
        cand = np.flatnonzero(~loose)
        if cand.size == 0:
            break
        cost = np.zeros(n + r)
        cost[n + cand] = -1.0
        A_ub = np.hstack([A, np.eye(r)])
        lp = linprog(cost, A_ub=A_ub, b_ub=b,
                     A_eq=np.hstack([E, np.zeros((E.shape[0], r))]) if E.shape[0] else None,
                     b_eq=f if E.shape[0] else None,
                     bounds=[(None, None)] * n + [(0.0, 1.0)] * r, method="highs")
        if lp.status != 0:
            return np.zeros(k, dtype=bool), np.full(n, np.nan)
        newly = (lp.x[n:] > thresh) & ~loose
        if not np.any(newly):
            break
        loose |= newly
    tight = ~loose
    fixed = np.full(n, np.nan)
    at_lo = tight[k:k + n] | same
    at_up = tight[k + n:]
    fixed[at_lo] = lower[at_lo]
    fixed[at_up & ~at_lo] = upper[at_up & ~at_lo]
    return tight[:k], fixed


def row_objective(rr: RobustRow, x) -> MonotoneObjective:
    """Linear objective ``a -> a^T (Ps x + qs) + cs^T x - bs`` at fixed ``x``."""
    b = rr.bs - float(rr.cs @ x)
    return MonotoneObjective.linear(b, rr.Ps, rr.qs)


def verify_solution(problem: RobustProblem, x, tol: float = 1e-10) -> dict[int, float]:
    """Worst-case slack of every robust row at ``x`` from the oracle.

    Rows that reduce to nominal rows are evaluated at ``a0``.
    """
    robust, nominal = normalize_robust_rows(problem)
    out: dict[int, float] = {}
    for rr in robust:
        cert = worst_case(rr.uset, row_objective(rr, x), x, tol=tol)
        out[rr.index] = cert.value
    for k in nominal:
        row = problem.rows[k]
        out[k] = row.sign * (row.realized(row.uncertainty.a0, x) - row.rhs)
    return dict(sorted(out.items()))
