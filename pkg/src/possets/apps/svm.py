"""Support vector classifiers with positivity-preserving feature sets.

The robust classifier minimises the total hinge slack ``sum_i zeta_i``
subject to

    min_{x in Omega_i}  y_i (w^T x + b) >= 1 - zeta_i,   zeta >= 0,

where ``Omega_i`` is the variation set centred at the training sample
``xbar_i`` with shape ``shape * I``.  No explicit ``||w||^2`` term is used;
the weights and the intercept are confined to the box ``[-W, W]`` so that
the program stays bounded on separable data.  The nominal soft-margin
classifier (``1/2 ||w||^2 + C sum zeta``) and its unregularized limit
(``sum zeta`` on the same box) serve as references.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..core import NormKind, UncertaintySet
from ..solver.barrier import OPTIMAL, SmoothProgram, smooth_convex_solve
from ..solver.cutting_plane import solve_cutting_plane
from ..solver.dual_form import solve_dual_form
from ..solver.problem import RobustProblem, Row

__all__ = [
    "DEFAULT_WEIGHT_BOUND",
    "SvmInstance",
    "SvmModel",
    "build_robust_svm_problem",
    "train_robust_svm",
    "train_nominal_svm",
    "svm_predict",
    "svm_accuracy",
    "svm_tau_sweep",
    "svm_c_sweep",
]

#: Default bound ``W`` on ``|w_k|`` and ``|b|``.
DEFAULT_WEIGHT_BOUND = 10.0


@dataclass(frozen=True)
class SvmInstance:
    """Training data and model parameters.

    Attributes
    ----------
    X : ndarray, shape (N, n)
        Strictly positive features.
    y : ndarray, shape (N,)
        Labels in ``{-1, +1}``.
    tau : float
        Uncertainty level of every per-sample set.
    shape : float
        Per-sample shape matrix ``shape * I``.
    weight_bound : float
        Box ``[-W, W]`` on the weights and the intercept.
    norm : NormKind
        Norm of the per-sample sets.
    """

    X: np.ndarray
    y: np.ndarray
    tau: float = 0.0
    shape: float = 1.0
    weight_bound: float = DEFAULT_WEIGHT_BOUND
    norm: NormKind = NormKind.L2

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError("X and y have different numbers of samples")
        if not np.all(np.isfinite(X)) or np.any(X <= 0.0):
            raise ValueError("features must be finite and strictly positive")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not self.tau >= 0.0:
            raise ValueError("tau must be nonnegative")
        if not self.shape > 0.0 or not self.weight_bound > 0.0:
            raise ValueError("shape and weight_bound must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "norm", NormKind.parse(self.norm))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def sample_set(self, i: int) -> UncertaintySet:
        """Variation set around sample ``i``."""
        n = self.n_features
        return UncertaintySet(self.X[i], self.tau, self.shape * np.eye(n), self.norm)


@dataclass
class SvmModel:
    """Trained linear classifier ``sign(w^T x + b)``."""

    w: np.ndarray
    b: float
    zeta: np.ndarray
    objective: float
    status: str
    method: str
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "b": self.b,
            "zeta": self.zeta.tolist(),
            "objective": self.objective,
            "status": self.status,
            "method": self.method,
            "message": self.message,
        }


def _layout(n: int, N: int):
    """Index slices of ``(w, b, zeta)`` in the stacked variable."""
    return slice(0, n), n, slice(n + 1, n + 1 + N)


def _bounds(n: int, N: int, W: float):
    lower = np.concatenate([np.full(n + 1, -W), np.zeros(N)])
    upper = np.concatenate([np.full(n + 1, W), np.full(N, np.inf)])
    return lower, upper


def build_robust_svm_problem(inst: SvmInstance) -> RobustProblem:
    """Robust program over ``(w, b, zeta)`` minimising ``sum zeta``.

    Row ``i`` reads ``y_i b + zeta_i + x^T (y_i w) >= 1`` with ``x`` in the
    set around sample ``i``.
    """
    N, n = inst.n_samples, inst.n_features
    dim = n + 1 + N
    iw, ib, iz = _layout(n, N)
    c = np.zeros(dim)
    c[iz] = 1.0
    rows = []
    for i in range(N):
        g = np.zeros(dim)
        g[ib] = inst.y[i]
        g[n + 1 + i] = 1.0
        P = np.zeros((n, dim))
        P[:, iw] = inst.y[i] * np.eye(n)
        rows.append(Row(g, ">=", 1.0, inst.sample_set(i), "general", P, np.zeros(n), name=f"margin[{i}]"))
    lower, upper = _bounds(n, N, inst.weight_bound)
    return RobustProblem(c, tuple(rows), lower, upper, "min")


def _split_solution(x, n: int, N: int):
    iw, ib, iz = _layout(n, N)
    return x[iw].copy(), float(x[ib]), np.maximum(x[iz], 0.0)


def train_robust_svm(inst: SvmInstance, tol: float = 1e-8, method: str = "dual") -> SvmModel:
    """Train the robust classifier.

    Parameters
    ----------
    inst : SvmInstance
    tol : float, optional
        Solver tolerance.
    method : {"dual", "cuts"}
        Dual reformulation or cutting planes.

    Returns
    -------
    SvmModel
        The solver status is passed through unchanged.
    """
    prob = build_robust_svm_problem(inst)
    if method == "dual":
        res = solve_dual_form(prob, tol=tol)
    elif method == "cuts":
        res = solve_cutting_plane(prob, tol=max(tol, 1e-7))
    else:
        raise ValueError(f"unknown method {method!r}")
    w, b, zeta = _split_solution(res.x_star, inst.n_features, inst.n_samples)
    return SvmModel(w, b, zeta, float(res.objective_value), res.status, method, res.message,
                    {"iterations": res.iterations, "wall_time": res.wall_time})


def train_nominal_svm(X, y, C: float | None = None, weight_bound: float = DEFAULT_WEIGHT_BOUND,
                      tol: float = 1e-9) -> SvmModel:
    """Nominal soft-margin classifier.

    Parameters
    ----------
    X, y : array_like
        Training data as for :class:`SvmInstance`.
    C : float or None, optional
        Slack weight of ``1/2 ||w||^2 + C sum zeta``.  ``None`` drops the
        quadratic term and minimises ``sum zeta`` (solved as a linear program).
    weight_bound : float, optional
        Box on ``w`` and ``b``.
    tol : float, optional
        Duality-gap target of the barrier method (quadratic case).

    Returns
    -------
    SvmModel
        ``objective`` is the value of the model that was solved.
    """
    inst = SvmInstance(X, y, 0.0, 1.0, weight_bound)
    N, n = inst.n_samples, inst.n_features
    dim = n + 1 + N
    iw, ib, iz = _layout(n, N)
    # margin rows as  G v <= h:  -y_i (w^T x_i + b) - zeta_i <= -1
    G = np.zeros((N, dim))
    G[:, iw] = -inst.y[:, None] * inst.X
    G[:, ib] = -inst.y
    G[np.arange(N), n + 1 + np.arange(N)] = -1.0
    h = -np.ones(N)
    lower, upper = _bounds(n, N, weight_bound)
    if C is None:
        c = np.zeros(dim)
        c[iz] = 1.0
        lp = linprog(c, A_ub=G, b_ub=h, bounds=list(zip(lower, upper)), method="highs")
        status = OPTIMAL if lp.status == 0 else "numerical_failure"
        x = np.asarray(lp.x if lp.x is not None else np.zeros(dim), dtype=float)
        w, b, zeta = _split_solution(x, n, N)
        return SvmModel(w, b, zeta, float(zeta.sum()), status, "nominal-lp", "" if lp.status == 0 else lp.message)
    if not C > 0.0:
        raise ValueError("C must be positive")
    prog = SmoothProgram(dim)
    Q = np.zeros((dim, dim))
    Q[iw, iw] = np.eye(n)
    prog.add_quadratic_objective(Q)
    c = np.zeros(dim)
    c[iz] = C
    prog.add_linear_objective(np.arange(dim), c)
    prog.add_linear_ineq(G, h)
    box = np.vstack([np.eye(dim), -np.eye(dim)])
    rhs = np.concatenate([upper, -lower])
    finite = np.isfinite(rhs)
    prog.add_linear_ineq(box[finite], rhs[finite])
    x0 = np.zeros(dim)
    x0[iz] = 2.0
    res = smooth_convex_solve(prog, tol=tol, x0=x0)
    w, b, zeta = _split_solution(res.x, n, N)
    return SvmModel(w, b, zeta, float(res.objective), res.status, "nominal-qp", res.message)


def svm_predict(w, b: float, X) -> np.ndarray:
    """Labels ``sign(w^T x + b)`` with ``sign(0) = +1``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    score = X @ np.asarray(w, dtype=float) + float(b)
    return np.where(score >= 0.0, 1.0, -1.0)


def svm_accuracy(labels, y) -> float:
    """Percentage of ``labels`` equal to ``y``."""
    labels = np.asarray(labels, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if labels.size != y.size:
        raise ValueError("label vectors differ in length")
    if y.size == 0:
        raise ValueError("no labels to compare")
    return float(np.mean(labels == y) * 100.0)


def svm_tau_sweep(X_train, y_train, X_test, y_test, taus, shape: float = 1.0,
                  weight_bound: float = DEFAULT_WEIGHT_BOUND, tol: float = 1e-8) -> list[tuple[float, str, float]]:
    """Robust training objective and test accuracy per ``tau``.

    Returns rows ``(tau, metric, value)`` with metrics ``objective`` and
    ``accuracy``; an unsolved point reports ``nan``.
    """
    out = []
    for tau in taus:
        model = train_robust_svm(SvmInstance(X_train, y_train, float(tau), shape, weight_bound), tol=tol)
        ok = model.status == OPTIMAL
        acc = svm_accuracy(svm_predict(model.w, model.b, X_test), y_test) if ok else float("nan")
        out.append((float(tau), "objective", model.objective if ok else float("nan")))
        out.append((float(tau), "accuracy", acc))
    return out


def svm_c_sweep(X_train, y_train, X_test, y_test, Cs, weight_bound: float = DEFAULT_WEIGHT_BOUND,
                tol: float = 1e-9) -> list[tuple[float, str, float]]:
    """Nominal soft-margin objective and test accuracy per ``C``.

    Returns rows ``(C, metric, value)`` in the same layout as
    :func:`svm_tau_sweep`.
    """
    out = []
    for C in Cs:
        model = train_nominal_svm(X_train, y_train, float(C), weight_bound, tol)
        ok = model.status == OPTIMAL
        acc = svm_accuracy(svm_predict(model.w, model.b, X_test), y_test) if ok else float("nan")
        out.append((float(C), "objective", model.objective if ok else float("nan")))
        out.append((float(C), "accuracy", acc))
    return out
