"""Robust linear programs through their dual reformulation.

Each robust row ``min_a a^T sigma(x) + c^T x >= b`` over the variation set is
replaced by the convex constraint

    c^T x + a0^T sigma + sum_k [u_k l(1 - w_k / u_k) + w_k]
        - tau ||s1||_* - delta ||s2||_*  >=  b,

    u = A^T s1 > 0,   w = -diag(a0) sigma - V^T s2,

where ``l`` is the safeguarded logarithm.  Since ``l <= ln`` the reformulated
row is never weaker than the exact one.  All rows are then solved together
by the barrier method.
"""

from __future__ import annotations

import time

import numpy as np

from ..duality import DualCertificate
from .barrier import (
    OPTIMAL,
    NUMERICAL_FAILURE,
    SmoothProgram,
    add_norm_epigraph,
    norm_epigraph_size,
    norm_epigraph_start,
    smooth_convex_solve,
)
from .common import VERIFY_ATOL, RobustRow, certain_block, implicit_equalities, normalize_robust_rows, verify_solution
from .logterms import DEFAULT_EPS_LOG, log_perspective, safeguarded_log
from .problem import RobustProblem, SolveResult

__all__ = ["solve_dual_form", "safeguarded_log"]


class _RowBlock:
    """Variable layout of one robust row inside the barrier program."""

    def __init__(self, rr: RobustRow, offset: int):
        m = rr.uset.m
        kind = rr.uset.norm.dual().value
        self.rr = rr
        self.kind = kind
        self.s1 = np.arange(offset, offset + m)
        self.r1 = offset + m
        k1 = norm_epigraph_size(m, kind)
        self.aux1 = np.arange(self.r1 + 1, self.r1 + 1 + k1)
        end = self.r1 + 1 + k1
        if rr.uset.V is not None:
            self.s2 = np.arange(end, end + m)
            self.r2 = end + m
            self.aux2 = np.arange(self.r2 + 1, self.r2 + 1 + k1)
            end = self.r2 + 1 + k1
        else:
            self.s2 = None
            self.r2 = None
            self.aux2 = np.zeros(0, dtype=int)
        self.end = end


def _log_constraint_fn(eps_log: float):
    def fun(v):
        m = v.size // 2
        val, g, H = log_perspective(v[:m], v[m:], eps_log)
        if not np.isfinite(val):
            return np.inf, None, None
        g = g.copy()
        g[m:] += 1.0
        return -(val + float(np.sum(v[m:]))), -g, -H
    return fun


def _start_point(problem: RobustProblem, lower, upper, fixed):
    x = np.zeros(problem.n)
    for j in range(problem.n):
        lo, hi = lower[j], upper[j]
        if not np.isnan(fixed[j]):
            x[j] = fixed[j]
        else:
            # the point of the box nearest to 0 that keeps a unit margin
            margin = min(1.0, 0.5 * (hi - lo))
            x[j] = min(max(0.0, lo + margin), hi - margin)
    return x


def _build(problem: RobustProblem, robust: list[RobustRow], nominal: list[int], eps_log: float):
    n = problem.n
    blocks = []
    offset = n
    for rr in robust:
        b = _RowBlock(rr, offset)
        blocks.append(b)
        offset = b.end
    N = offset
    prog = SmoothProgram(N)
    sgn = 1.0 if problem.sense == "min" else -1.0
    prog.add_linear_objective(np.arange(n), sgn * problem.c)

    G, h, E, f = certain_block(problem, nominal)
    lower, upper = problem.boxed_bounds()
    tight, fixed = implicit_equalities(G, h, E, f, lower, upper)
    free = np.isnan(fixed)
    # bounds of free variables
    idx = np.flatnonzero(free)
    if idx.size:
        B = np.zeros((2 * idx.size, N))
        B[np.arange(idx.size), idx] = 1.0
        B[idx.size + np.arange(idx.size), idx] = -1.0
        prog.add_linear_ineq(B, np.concatenate([upper[idx], -lower[idx]]))
    fx = np.flatnonzero(~free)
    if fx.size:
        Ef = np.zeros((fx.size, N))
        Ef[np.arange(fx.size), fx] = 1.0
        prog.add_equality(Ef, fixed[fx])
    # certain rows with the fixed variables substituted; rows touching only
    # fixed variables are dropped and implicit equalities join the equalities
    E_all = np.vstack([E, G[tight]])
    f_all = np.concatenate([f, h[tight]])
    for M, rhs, add in ((G[~tight], h[~tight], prog.add_linear_ineq), (E_all, f_all, prog.add_equality)):
        if not M.shape[0]:
            continue
        keep = np.array([np.any(row[free] != 0.0) for row in M])
        if not np.any(keep):
            continue
        Mp = np.zeros((int(keep.sum()), N))
        Mp[:, :n] = np.where(free, M[keep], 0.0)
        add(Mp, rhs[keep] - M[keep][:, ~free] @ fixed[~free])

    fun = _log_constraint_fn(eps_log)
    for b in blocks:
        rr = b.rr
        us = rr.uset
        m = us.m
        M = np.zeros((2 * m, N))
        M[:m, b.s1] = us.A.T
        M[m:, :n] = -us.a0[:, None] * rr.Ps
        off = np.concatenate([np.zeros(m), -us.a0 * rr.qs])
        if b.s2 is not None:
            M[m:, b.s2] = -us.V.T
        lin = np.zeros(N)
        lin[:n] = -(rr.cs + rr.Ps.T @ us.a0)
        lin[b.r1] = us.tau
        if b.r2 is not None:
            lin[b.r2] = us.delta
        const = -float(us.a0 @ rr.qs) + rr.bs
        prog.add_smooth_constraint(M, off, fun, lin=lin, const=const)
        # u = A^T s1 > 0 keeps the logarithm defined
        Gu = np.zeros((m, N))
        Gu[:, b.s1] = -us.A.T
        prog.add_linear_ineq(Gu, np.zeros(m), hard=True)
        add_norm_epigraph(prog, b.s1, b.r1, b.kind, b.aux1)
        if b.s2 is not None:
            add_norm_epigraph(prog, b.s2, b.r2, b.kind, b.aux2)

    x0 = np.zeros(N)
    x0[:n] = _start_point(problem, lower, upper, fixed)
    for b in blocks:
        rr = b.rr
        us = rr.uset
        w0 = -us.a0 * (rr.Ps @ x0[:n] + rr.qs)
        u0 = 1.0 + 2.0 * np.abs(w0)
        s1 = np.linalg.solve(us.A.T, u0)
        x0[b.s1] = s1
        r, aux = norm_epigraph_start(s1, b.kind)
        x0[b.r1] = r
        x0[b.aux1] = aux
        if b.s2 is not None:
            r2, aux2 = norm_epigraph_start(np.zeros(us.m), b.kind)
            x0[b.r2] = r2
            x0[b.aux2] = aux2
    return prog, blocks, x0


def _certificate(b: _RowBlock, z: np.ndarray, n: int):
    rr = b.rr
    us = rr.uset
    x = z[:n]
    sigma = rr.Ps @ x + rr.qs
    s1 = z[b.s1]
    u = us.A.T @ s1
    s2 = None if b.s2 is None else z[b.s2]
    w = -us.a0 * sigma
    if s2 is not None:
        w = w - us.V.T @ s2
    try:
        return DualCertificate(-sigma, u, w, s1, s2)
    except ValueError:
        return None


def solve_dual_form(problem: RobustProblem, tol: float = 1e-8, eps_log: float = DEFAULT_EPS_LOG,
                    max_newton: int = 4000) -> SolveResult:
    """Solve the robust program through its dual reformulation.

    Parameters
    ----------
    problem : RobustProblem
    tol : float, optional
        Duality-gap target of the barrier method.
    eps_log : float, optional
        Knot of the safeguarded logarithm.
    max_newton : int, optional
        Cap on barrier Newton steps.

    Returns
    -------
    SolveResult
        ``certificates`` maps each robust row index to its
        :class:`~possets.duality.DualCertificate` (in the coordinates of the
        retained set).  An ``optimal`` status is only reported after every
        robust row passes an independent oracle check.
    """
    start = time.perf_counter()
    robust, nominal = normalize_robust_rows(problem)
    prog, blocks, x0 = _build(problem, robust, nominal, eps_log)
    res = smooth_convex_solve(prog, tol=tol, x0=x0, max_newton=max_newton)
    n = problem.n
    x = res.x[:n].copy()
    certs = {}
    for b in blocks:
        c = _certificate(b, res.x, n)
        if c is not None:
            certs[b.rr.index] = c
    status, msg = res.status, res.message
    residuals = {}
    if status == OPTIMAL:
        residuals = verify_solution(problem, x)
        worst = min(residuals.values(), default=0.0)
        if worst < -VERIFY_ATOL:
            status = NUMERICAL_FAILURE
            msg = f"oracle check failed: worst robust slack {worst:.3e}"
    return SolveResult(x, problem.objective_value(x), status, certs, residuals, res.iterations,
                       time.perf_counter() - start, "dual", msg)
