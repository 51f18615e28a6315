"""Small dense log-barrier interior-point solver for smooth convex programs.

A program is

    minimise    c^T x + 1/2 x^T Q x + sum_j phi_j(M_j x + b_j)
    subject to  G x <= h                        (linear inequalities)
                E x  = f                        (equalities)
                ||F x + f|| <= p^T x + q        (second-order cones)
                psi_k(N_k x + d_k) + l_k^T x + e_k <= 0   (smooth convex)

Each inequality is either *soft* (relaxed by the phase-1 slack) or *hard*
(a domain condition that the supplied start point must satisfy strictly).
Hard constraints let callers keep logarithms well-defined during phase 1.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ConvexFn",
    "SmoothProgram",
    "BarrierResult",
    "smooth_convex_solve",
    "OPTIMAL",
    "INFEASIBLE",
    "ITERATION_CAP",
    "NUMERICAL_FAILURE",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_CAP = "iteration_cap"
NUMERICAL_FAILURE = "numerical_failure"

#: Callable mapping ``v`` to ``(value, gradient, hessian)``; ``value`` is
#: ``inf`` outside the function's domain.
ConvexFn = Callable[[np.ndarray], "tuple[float, np.ndarray, np.ndarray]"]


@dataclass
class _Smooth:
    M: np.ndarray
    b: np.ndarray
    fun: ConvexFn
    lin: np.ndarray
    const: float
    hard: bool


@dataclass
class _Soc:
    F: np.ndarray
    f: np.ndarray
    p: np.ndarray
    q: float
    hard: bool


@dataclass
class SmoothProgram:
    """Builder for a smooth convex program over ``n`` variables."""

    n: int
    c: np.ndarray = field(default=None)  # type: ignore[assignment]
    Q: np.ndarray | None = None
    _G: list = field(default_factory=list)
    _h: list = field(default_factory=list)
    _hard_lin: list = field(default_factory=list)
    _E: list = field(default_factory=list)
    _f: list = field(default_factory=list)
    _socs: list = field(default_factory=list)
    _smooth: list = field(default_factory=list)
    _obj_terms: list = field(default_factory=list)

    def __post_init__(self):
        if self.c is None:
            self.c = np.zeros(self.n)
        self.c = np.asarray(self.c, dtype=float).copy()

    # -- objective -----------------------------------------------------
    def add_linear_objective(self, idx, coef):
        np.add.at(self.c, np.asarray(idx, dtype=int), np.asarray(coef, dtype=float))

    def add_quadratic_objective(self, Q):
        Q = np.asarray(Q, dtype=float)
        self.Q = Q if self.Q is None else self.Q + Q

    def add_objective_term(self, M, b, fun: ConvexFn):
        """Add ``fun(M x + b)`` to the objective; ``fun`` must be convex."""
        self._obj_terms.append((np.atleast_2d(np.asarray(M, dtype=float)), np.asarray(b, dtype=float), fun))

    # -- constraints ---------------------------------------------------
    def add_linear_ineq(self, G, h, hard: bool = False):
        G = np.atleast_2d(np.asarray(G, dtype=float))
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if G.shape != (h.size, self.n):
            raise ValueError("inequality block has inconsistent shape")
        self._G.append(G)
        self._h.append(h)
        self._hard_lin.append(np.full(h.size, hard))

    def add_equality(self, E, f):
        E = np.atleast_2d(np.asarray(E, dtype=float))
        f = np.atleast_1d(np.asarray(f, dtype=float))
        if E.shape != (f.size, self.n):
            raise ValueError("equality block has inconsistent shape")
        self._E.append(E)
        self._f.append(f)

    def add_soc(self, F, f, p, q, hard: bool = False):
        """Add ``||F x + f||_2 <= p^T x + q``."""
        F = np.atleast_2d(np.asarray(F, dtype=float))
        self._socs.append(_Soc(F, np.asarray(f, dtype=float).ravel(), np.asarray(p, dtype=float).ravel(), float(q), hard))

    def add_smooth_constraint(self, M, b, fun: ConvexFn, lin=None, const: float = 0.0, hard: bool = False):
        """Add ``fun(M x + b) + lin^T x + const <= 0``."""
        lin = np.zeros(self.n) if lin is None else np.asarray(lin, dtype=float).ravel()
        self._smooth.append(_Smooth(np.atleast_2d(np.asarray(M, dtype=float)), np.asarray(b, dtype=float).ravel(),
                                    fun, lin, float(const), hard))

    # -- assembled views -----------------------------------------------
    def linear_block(self):
        if not self._G:
            return np.zeros((0, self.n)), np.zeros(0), np.zeros(0, dtype=bool)
        return np.vstack(self._G), np.concatenate(self._h), np.concatenate(self._hard_lin)

    def equality_block(self):
        if not self._E:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.vstack(self._E), np.concatenate(self._f)

    def objective(self, x) -> float:
        val = float(self.c @ x)
        if self.Q is not None:
            val += 0.5 * float(x @ self.Q @ x)
        for M, b, fun in self._obj_terms:
            val += fun(M @ x + b)[0]
        return val


@dataclass
class BarrierResult:
    """Outcome of :func:`smooth_convex_solve`."""

    x: np.ndarray
    status: str
    objective: float
    gap: float
    iterations: int
    wall_time: float
    message: str = ""


def _support(*arrays) -> np.ndarray:
    """Columns on which any of the given vectors or matrices is nonzero."""
    mask = np.zeros(arrays[0].shape[-1], dtype=bool)
    for a in arrays:
        mask |= np.any(np.atleast_2d(a) != 0.0, axis=0)
    return np.flatnonzero(mask)


class _Evaluator:
    """Barrier objective ``t * f0 + phi`` with its derivatives.

    Cone and smooth constraints are stored restricted to the columns they
    touch, so each one costs only the square of its support size.
    """

    def __init__(self, prog: SmoothProgram, soft_relax: bool, use_obj: bool):
        self.prog = prog
        n = prog.n
        self.relax = soft_relax
        self.nx = n + 1 if soft_relax else n
        G, h, hard = prog.linear_block()
        if soft_relax:
            col = np.where(hard, 0.0, -1.0)[:, None]
            G = np.hstack([G, col])
        self.G, self.h, self.hard = G, h, hard
        E, f = prog.equality_block()
        if soft_relax:
            E = np.hstack([E, np.zeros((E.shape[0], 1))])
        self.E, self.f = E, f
        self.use_obj = use_obj
        self.nu = float(h.size + 2 * len(prog._socs) + len(prog._smooth))
        self.socs = []
        for soc in prog._socs:
            F = self._pad(soc.F)
            p = self._pad(soc.p)
            if self.relax and not soc.hard:
                p[-1] = 1.0
            cols = _support(F, p)
            self.socs.append((cols, F[:, cols], soc.f, p[cols], soc.q))
        self.smooth = []
        for sm in prog._smooth:
            M = self._pad(sm.M)
            lin = self._pad(sm.lin)
            if self.relax and not sm.hard:
                lin[-1] = -1.0
            cols = _support(M, lin)
            self.smooth.append((cols, M[:, cols], sm.b, sm.fun, lin[cols], sm.const))

    def _pad(self, M):
        M = np.array(M, dtype=float)
        if not self.relax:
            return M
        if M.ndim == 1:
            return np.append(M, 0.0)
        return np.hstack([M, np.zeros((M.shape[0], 1))])

    def f0(self, x):
        if not self.use_obj:
            return x[-1], np.eye(1, self.nx, self.nx - 1).ravel(), np.zeros((self.nx, self.nx))
        p = self.prog
        val = float(p.c @ x)
        g = p.c.copy()
        H = np.zeros((self.nx, self.nx)) if p.Q is None else p.Q.copy()
        if p.Q is not None:
            val += 0.5 * float(x @ p.Q @ x)
            g = g + p.Q @ x
        for M, b, fun in p._obj_terms:
            v, gv, hv = fun(M @ x + b)
            if not math.isfinite(v):
                return math.inf, None, None
            val += v
            g = g + M.T @ gv
            H = H + M.T @ np.atleast_2d(hv) @ M
        return val, g, H

    def phi(self, x, derivs: bool = True):
        """Barrier value (and derivatives); ``inf`` outside the domain."""
        nx = self.nx
        val = 0.0
        g = np.zeros(nx) if derivs else None
        H = np.zeros((nx, nx)) if derivs else None
        if self.h.size:
            slack = self.h - self.G @ x
            if np.any(~(slack > 0.0)):
                return math.inf, None, None
            val -= float(np.sum(np.log(slack)))
            if derivs:
                inv = 1.0 / slack
                g += self.G.T @ inv
                H += (self.G.T * inv**2) @ self.G
        for cols, F, f, p, q in self.socs:
            xc = x[cols]
            r = F @ xc + f
            top = float(p @ xc + q)
            s = top * top - float(r @ r)
            if not (top > 0.0 and s > 0.0):
                return math.inf, None, None
            val -= math.log(s)
            if derivs:
                ds = 2.0 * top * p - 2.0 * F.T @ r
                g[cols] -= ds / s
                H[np.ix_(cols, cols)] += np.outer(ds, ds) / s**2 - (2.0 * np.outer(p, p) - 2.0 * F.T @ F) / s
        for cols, M, b, fun, lin, const in self.smooth:
            xc = x[cols]
            v, gv, hv = fun(M @ xc + b)
            if not math.isfinite(v):
                return math.inf, None, None
            hval = v + float(lin @ xc) + const
            if not hval < 0.0:
                return math.inf, None, None
            val -= math.log(-hval)
            if derivs:
                gh = M.T @ gv + lin
                g[cols] += gh / (-hval)
                H[np.ix_(cols, cols)] += np.outer(gh, gh) / hval**2 + (M.T @ np.atleast_2d(hv) @ M) / (-hval)
        return val, g, H

    def total(self, x, t, derivs=True):
        f, gf, Hf = self.f0(x) if derivs else (self.f0(x)[0], None, None)
        if not math.isfinite(f):
            return math.inf, None, None
        p, gp, Hp = self.phi(x, derivs)
        if not math.isfinite(p):
            return math.inf, None, None
        if not derivs:
            return t * f + p, None, None
        return t * f + p, t * gf + gp, t * Hf + Hp


def _newton_direction(H, g, E, r=None):
    """Newton step; ``r = E x - f`` pulls the step back onto the equalities.

    The KKT matrix is equilibrated symmetrically by its row maxima and the
    solution refined once, since late barrier stages mix curvatures many
    orders of magnitude apart.
    """
    n = H.shape[0]
    k = E.shape[0]
    scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    for reg in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
        Hr = H + reg * scale * np.eye(n)
        if k:
            K = np.block([[Hr, E.T], [E, np.zeros((k, k))]])
            rhs = np.concatenate([-g, np.zeros(k) if r is None else -r])
        else:
            K, rhs = Hr, -g
        rowmax = np.max(np.abs(K), axis=1)
        d = 1.0 / np.sqrt(np.where(rowmax > 0.0, rowmax, 1.0))
        Ks = K * d[:, None] * d[None, :]
        try:
            y = np.linalg.solve(Ks, d * rhs)
            sol = d * y
            sol = sol + d * np.linalg.solve(Ks, d * (rhs - K @ sol))
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(sol)):
            return sol[:n]
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n]


def _center(ev: _Evaluator, x, t, max_steps, stop_when=None):
    """Damped Newton centering.  Returns (x, steps, ok)."""
    steps = 0
    for _ in range(max_steps):
        F, g, H = ev.total(x, t)
        if not math.isfinite(F):
            return x, steps, False
        # round-off in ill-conditioned late solves lets x drift off E x = f;
        # each step removes the current residual
        r = ev.E @ x - ev.f if ev.E.shape[0] else None
        dx = _newton_direction(H, g, ev.E, r)
        lam2 = float(-g @ dx)
        if lam2 < 0.0:
            if abs(lam2) <= 1e-10 * max(1.0, abs(F)) or ev.E.shape[0]:
                return x, steps, True
            # an indefinite solve from round-off; fall back to steepest descent
            dx = -g / max(1.0, float(np.linalg.norm(g)))
            lam2 = float(-g @ dx)
        # below this the decrement is dominated by round-off in F
        if lam2 / 2.0 <= max(1e-10, 1e-13 * abs(F)):
            return x, steps, True
        alpha = 1.0
        accepted = False
        while alpha > 1e-14:
            xn = x + alpha * dx
            Fn = ev.total(xn, t, derivs=False)[0]
            if math.isfinite(Fn) and Fn <= F - 0.25 * alpha * lam2:
                accepted = True
                break
            alpha *= 0.5
        steps += 1
        if not accepted:
            # no further progress is representable
            return x, steps, lam2 < 1e-6 * max(1.0, abs(F))
        x = xn
        if stop_when is not None and stop_when(x):
            return x, steps, True
    return x, steps, False


def _project_equalities(x, E, f):
    if E.shape[0] == 0:
        return x
    r = E @ x - f
    if np.max(np.abs(r), initial=0.0) <= 1e-12 * max(1.0, float(np.max(np.abs(f), initial=0.0))):
        return x
    corr = np.linalg.lstsq(E, r, rcond=None)[0]
    return x - corr


def _soft_violation(prog: SmoothProgram, x) -> tuple[float, bool]:
    """Max soft-constraint value and whether hard constraints hold strictly."""
    worst = -math.inf
    hard_ok = True
    G, h, hard = prog.linear_block()
    if h.size:
        v = G @ x - h
        if np.any(hard) and np.any(~(v[hard] < 0.0)):
            hard_ok = False
        if np.any(~hard):
            worst = max(worst, float(np.max(v[~hard])))
    for soc in prog._socs:
        v = float(np.linalg.norm(soc.F @ x + soc.f) - (soc.p @ x + soc.q))
        if soc.hard:
            hard_ok &= v < 0.0
        else:
            worst = max(worst, v)
    for sm in prog._smooth:
        fv = sm.fun(sm.M @ x + sm.b)[0]
        v = fv + float(sm.lin @ x) + sm.const
        if sm.hard:
            hard_ok &= bool(v < 0.0)
        elif not math.isfinite(v):
            hard_ok = False
        else:
            worst = max(worst, v)
    return worst, hard_ok


def smooth_convex_solve(
    prog: SmoothProgram,
    tol: float = 1e-8,
    x0=None,
    max_newton: int = 2000,
    t0: float = 1.0,
    mu: float = 10.0,
) -> BarrierResult:
    """Solve a :class:`SmoothProgram` with a two-phase log-barrier method.

    Parameters
    ----------
    prog : SmoothProgram
    tol : float, optional
        Target bound on the duality gap ``nu / t``.
    x0 : array_like, optional
        Start point.  Hard constraints must hold strictly there (after the
        projection onto the equality constraints).  Defaults to zeros.
    max_newton : int, optional
        Cap on the total number of Newton steps over both phases.
    t0, mu : float, optional
        Initial barrier weight and its growth factor per outer stage.

    Returns
    -------
    BarrierResult
        ``status`` is one of ``optimal``, ``infeasible``, ``iteration_cap`` or
        ``numerical_failure``.  The result is deterministic given the inputs.
    """
    start = time.perf_counter()
    n = prog.n
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    E, f = prog.equality_block()
    x = _project_equalities(x, E, f)
    total_steps = 0

    def done(status, xx, gap, msg=""):
        obj = prog.objective(xx) if status != INFEASIBLE else math.nan
        return BarrierResult(xx, status, obj, gap, total_steps, time.perf_counter() - start, msg)

    worst, hard_ok = _soft_violation(prog, x)
    if not hard_ok:
        return done(NUMERICAL_FAILURE, x, math.inf, "start point violates a domain constraint")

    if worst >= 0.0:
        # phase 1: minimise the common slack sigma of all soft constraints
        ev1 = _Evaluator(prog, soft_relax=True, use_obj=False)
        floor = np.zeros((1, n + 1))
        floor[0, -1] = -1.0
        ev1.G = np.vstack([ev1.G, floor])
        ev1.h = np.append(ev1.h, 1.0)
        ev1.nu += 1.0
        xs = np.append(x, worst + 1.0)
        t = t0
        feasible = False
        while True:
            xs, steps, ok = _center(ev1, xs, t, max_newton - total_steps, stop_when=lambda z: z[-1] < 0.0)
            total_steps += steps
            if xs[-1] < 0.0:
                # finish centering so the point is well inside the soft constraints
                xs2, steps, _ = _center(ev1, xs, t, max(0, min(50, max_newton - total_steps)))
                total_steps += steps
                if xs2[-1] < xs[-1]:
                    xs = xs2
                feasible = True
                break
            if total_steps >= max_newton:
                return done(ITERATION_CAP, xs[:-1], math.inf, "phase 1 hit the Newton step cap")
            if ev1.nu / t <= tol * 1e-2:
                break
            t *= mu
        if not feasible:
            return done(INFEASIBLE, xs[:-1], math.inf, f"phase 1 slack stays at {xs[-1]:.3e}")
        x = xs[:-1]
        xp = _project_equalities(x, E, f)
        worst_p, hard_p = _soft_violation(prog, xp)
        if worst_p < 0.0 and hard_p:
            x = xp

    ev = _Evaluator(prog, soft_relax=False, use_obj=True)
    if not math.isfinite(ev.phi(x, derivs=False)[0]):
        return done(NUMERICAL_FAILURE, x, math.inf, "start point left the barrier domain")
    if ev.nu == 0.0:
        # no inequalities: a single Newton solve on the equality-constrained objective
        ev.nu = 1.0
    t = t0
    while True:
        x, steps, ok = _center(ev, x, t, max_newton - total_steps)
        total_steps += steps
        gap = ev.nu / t
        if gap <= tol:
            return done(OPTIMAL, x, gap, "" if ok else "final centering stopped early")
        if total_steps >= max_newton:
            return done(ITERATION_CAP, x, gap, "phase 2 hit the Newton step cap")
        if not math.isfinite(prog.objective(x)):
            return done(NUMERICAL_FAILURE, x, gap, "objective is not finite")
        t *= mu


def norm_epigraph_size(m: int, kind: str) -> int:
    """Number of auxiliary variables :func:`add_norm_epigraph` needs."""
    return m if kind == "l1" else 0


def add_norm_epigraph(prog: SmoothProgram, idx_s, idx_r: int, kind: str, idx_aux=None):
    """Constrain ``||x[idx_s]|| <= x[idx_r]`` for the norm ``kind``.

    ``kind`` is one of ``"l1"``, ``"l2"``, ``"linf"``.  The L1 case needs
    ``len(idx_s)`` auxiliary variables at ``idx_aux``.
    """
    idx_s = np.asarray(idx_s, dtype=int)
    m = idx_s.size
    n = prog.n
    rows = np.arange(m)
    if kind == "l2":
        F = np.zeros((m, n))
        F[rows, idx_s] = 1.0
        p = np.zeros(n)
        p[idx_r] = 1.0
        prog.add_soc(F, np.zeros(m), p, 0.0)
    elif kind == "linf":
        G = np.zeros((2 * m, n))
        G[rows, idx_s] = 1.0
        G[m + rows, idx_s] = -1.0
        G[:, idx_r] = -1.0
        prog.add_linear_ineq(G, np.zeros(2 * m))
    elif kind == "l1":
        idx_aux = np.asarray(idx_aux, dtype=int)
        G = np.zeros((2 * m + 1, n))
        G[rows, idx_s] = 1.0
        G[m + rows, idx_s] = -1.0
        G[rows, idx_aux] = -1.0
        G[m + rows, idx_aux] = -1.0
        G[2 * m, idx_aux] = 1.0
        G[2 * m, idx_r] = -1.0
        prog.add_linear_ineq(G, np.zeros(2 * m + 1))
    else:
        raise ValueError(f"unknown norm kind {kind!r}")


def norm_epigraph_start(s, kind: str):
    """Strictly feasible ``(r, aux)`` for a given ``s``."""
    s = np.asarray(s, dtype=float)
    if kind == "l1":
        aux = np.abs(s) + 1.0
        return float(aux.sum() + 1.0), aux
    return float(np.linalg.norm(s, 2 if kind == "l2" else np.inf) + 1.0), np.zeros(0)
