"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input or schema error, 3 solver
failure.  Errors are also written to stderr as one JSON object with the
fields ``error``, ``message`` and ``exit_code``.  Every option can be set
through an environment variable ``POSSETS_<COMMAND>_<OPTION>`` (upper case,
dashes as underscores), for example ``POSSETS_SOLVE_METHOD=cuts`` or
``POSSETS_PV_PLAN_SEED=3``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path

import click

from ._io import read_text
from .calibration import (
    calibrate as calibrate_samples,
    guarantee_radius,
    lognormal_from_samples,
    read_samples_csv,
    tau_guarantee,
)
from .core import UncertaintySet, as_vector
from .oracle import MonotoneObjective, worst_case
from .solver import OPTIMAL, RobustProblem, SchemaError, solve_cutting_plane, solve_dual_form

__all__ = ["main", "cli", "SolverFailure"]

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class SolverFailure(RuntimeError):
    """A solve ended without an optimal status."""


def _float_list(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        click.echo(text)
    else:
        Path(out).write_text(text + ("" if text.endswith("\n") else "\n"))


def _finite(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json(obj) -> str:
    return json.dumps(_finite(obj), indent=2, allow_nan=False)


def _table(rows, header=("tau", "metric", "value")) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for a, metric, value in rows:
        w.writerow([repr(float(a)), metric, repr(float(value))])
    return buf.getvalue()


def _load_json(path: str) -> dict:
    try:
        return json.loads(read_text(Path(path)))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


@click.group(context_settings={"auto_envvar_prefix": "POSSETS", "help_option_names": ["-h", "--help"]})
def cli():
    """Robust optimization with positivity-preserving uncertainty sets."""


@cli.command()
@click.argument("samples", type=click.Path(dir_okay=False))
@click.option("--norm", type=click.Choice(["l1", "l2", "linf"]), default="l2", show_default=True)
@click.option("--beta", type=float, default=None, help="Target fraction for the worst-case-bound budget.")
@click.option("--gamma", type=float, default=None, help="Allowed value loss for the value-bound budget.")
@click.option("--t", "t", type=float, default=1.0, show_default=True, help="Nominal value scale for --gamma.")
@click.option("--x0", type=str, default=None, help="Comma-separated decision for --gamma.")
@click.option("--epsilon", type=float, default=None, help="Violation level of the lognormal guarantee.")
@click.option("-o", "--out", type=str, default=None, help="Output file (default stdout).")
def calibrate(samples, norm, beta, gamma, t, x0, epsilon, out):
    """Fit a set to CSV SAMPLES and report candidate budgets as JSON."""
    S = read_samples_csv(Path(samples))
    rep = calibrate_samples(S, norm, beta, gamma, t, _float_list(x0), epsilon)
    _emit(_json(rep.to_dict()), out)


def _solve(problem: RobustProblem, method: str, tol: float | None):
    if method == "dual":
        return solve_dual_form(problem, **({} if tol is None else {"tol": tol}))
    return solve_cutting_plane(problem, **({} if tol is None else {"tol": tol}))


@cli.command()
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(["dual", "cuts"]), default="dual", show_default=True)
@click.option("--tol", type=float, default=None, help="Solver tolerance (method default if omitted).")
@click.option("--tau-override", type=float, default=None, help="Replace the budget of every robust row.")
@click.option("-o", "--out", type=str, default=None, help="Output file (default stdout).")
def solve(problem, method, tol, tau_override, out):
    """Solve a robust program given as JSON and print the result as JSON."""
    prob = RobustProblem.from_dict(_load_json(problem))
    if tau_override is not None:
        prob = prob.with_tau(tau_override)
    res = _solve(prob, method, tol)
    _emit(_json(res.to_dict()), out)
    if res.status != OPTIMAL:
        raise SolverFailure(f"{method} solver ended with status {res.status}: {res.message}")


@cli.command()
@click.option("--set", "set_path", type=click.Path(dir_okay=False), required=True, envvar="POSSETS_PESSIMIZE_SET",
              help="Uncertainty set JSON.")
@click.option("--x", "x", type=str, required=True, help="Comma-separated multiplier of the parameter.")
@click.option("--offset", type=float, default=0.0, show_default=True, help="Constant b in a^T x - b.")
@click.option("--monotone", type=click.Choice(["increasing", "decreasing", "general"]), default="general",
              show_default=True)
@click.option("--tau", type=float, default=None, help="Replace the budget of the set.")
@click.option("-o", "--out", type=str, default=None, help="Output file (default stdout).")
def pessimize(set_path, x, offset, monotone, tau, out):
    """Worst case of the linear objective a^T x - b over the set, as JSON."""
    uset = UncertaintySet.from_dict(_load_json(set_path))
    if tau is not None:
        uset = uset.with_tau(tau)
    xv = as_vector(_float_list(x))
    if xv.size != uset.m:
        raise SchemaError(f"--x has {xv.size} entries, the set has dimension {uset.m}")
    cert = worst_case(uset, MonotoneObjective.linear(offset, monotonicity=monotone), xv)
    _emit(_json(cert.to_dict()), out)


@cli.command()
@click.option("--eps", "epsilon", type=float, required=True, envvar="POSSETS_GUARANTEE_EPS",
              help="Violation probability.")
@click.option("--m", "m", type=int, default=None, help="Parameter dimension.")
@click.option("--lambda", "lam", type=float, default=None, envvar="POSSETS_GUARANTEE_LAMBDA",
              help="Largest log-space variance.")
@click.option("--samples", type=click.Path(dir_okay=False), default=None,
              help="CSV samples to fit m and lambda from instead.")
def guarantee(epsilon, m, lam, samples):
    """Budget with coverage probability at least 1 - eps under a lognormal model."""
    if samples is not None:
        spec = lognormal_from_samples(read_samples_csv(Path(samples)))
        m, lam = spec.m, spec.lam
    if m is None or lam is None:
        raise click.UsageError("give --m and --lambda, or --samples")
    tau = tau_guarantee(epsilon, m, lam)
    click.echo(_json({"epsilon": epsilon, "m": m, "lambda": lam,
                      "delta_eps": guarantee_radius(epsilon, m), "tau": tau}))


def _load_pv(path: str | None):
    from .apps.data import bundled_pv_instance
    from .apps.pv import instance_from_json, read_pv_csv

    if path is None:
        return bundled_pv_instance()
    if path.lower().endswith(".json"):
        return instance_from_json(read_text(Path(path)))
    return read_pv_csv(Path(path))


@cli.command("pv-plan")
@click.argument("instance", type=click.Path(dir_okay=False), required=False)
@click.option("--tau", type=float, default=0.0, show_default=True, help="Budget of the robust plan.")
@click.option("--method", type=click.Choice(["dual", "cuts"]), default="dual", show_default=True)
@click.option("--draws", type=int, default=100, show_default=True, help="Held-out irradiance draws.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cv", type=float, default=None, help="Irradiance coefficient of variation.")
@click.option("--sweep", type=str, default=None, help="Comma-separated budgets for a sweep table.")
@click.option("--sweep-out", type=str, default=None, help="Sweep CSV file (default stdout after the plan).")
@click.option("-o", "--out", type=str, default=None, help="Plan JSON file (default stdout).")
def pv_plan(instance, tau, method, draws, seed, cv, sweep, sweep_out, out):
    """Plan a PV and battery day (CSV or JSON INSTANCE, bundled day if omitted).

    The nominal plan uses the expected irradiance.  The robust plan uses the
    instance's own set when the JSON carries one, otherwise the set of the
    lognormal irradiance model centred at its median.  Both are scored on
    seeded held-out draws.
    """
    from .apps.data import DEFAULT_IRRADIANCE_CV, calibrated_pv_instance, irradiance_draws
    from .apps.experiments import pv_tau_sweep, solve_pv_plan, summarize_draws
    from .apps.pv import evaluate_actual_cost

    inst = _load_pv(instance)
    cv = DEFAULT_IRRADIANCE_CV if cv is None else cv
    E = irradiance_draws(inst, draws, seed, cv)
    nom_plan, nom_res = solve_pv_plan(inst.with_set(None), method)
    if nom_res.status != OPTIMAL:
        raise SolverFailure(f"nominal plan: status {nom_res.status}: {nom_res.message}")
    ref = [evaluate_actual_cost(nom_plan, e, inst).actual_cost for e in E]
    robust_inst = (inst.with_set(inst.irradiance_set.with_tau(tau)) if inst.irradiance_set is not None
                   else calibrated_pv_instance(inst, tau, cv))
    plan, res = solve_pv_plan(robust_inst, method)
    report = {
        "tau": tau,
        "method": method,
        "seed": seed,
        "draws": draws,
        "nominal": {"plan": nom_plan.to_dict(), **summarize_draws(nom_plan, inst, E, status=nom_res.status).to_dict()},
        "robust": {"plan": plan.to_dict(), "residuals": {str(k): v for k, v in res.residuals.items()},
                   **summarize_draws(plan, inst, E, ref, res.status).to_dict()},
    }
    _emit(_json(report), out)
    if res.status != OPTIMAL:
        raise SolverFailure(f"robust plan: status {res.status}: {res.message}")
    if sweep is not None:
        sw = pv_tau_sweep(inst, _float_list(sweep), draws, seed, cv, method)
        _emit(_table(sw.rows()), sweep_out)
        failed = [t for t, s in zip(sw.taus, sw.robust) if s.status != OPTIMAL]
        if failed:
            raise SolverFailure(f"sweep points without an optimal plan: {failed}")


@cli.command()
@click.argument("data", type=click.Path(dir_okay=False), required=False)
@click.option("--synthetic", type=int, default=None, help="Use N seeded synthetic samples instead of DATA.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-train", type=int, default=None, help="Training rows (default 70%).")
@click.option("--tau", type=float, default=0.01, show_default=True, help="Budget of the robust classifier.")
@click.option("--shape", type=float, default=1.0, show_default=True, help="Per-sample shape matrix scale.")
@click.option("--weight-bound", type=float, default=None, help="Box on the weights and the intercept.")
@click.option("--C", "C", type=float, default=1.0, show_default=True, help="Slack weight of the nominal model.")
@click.option("--tau-sweep", type=str, default=None, help="Comma-separated budgets.")
@click.option("--c-sweep", type=str, default=None, help="Comma-separated slack weights.")
@click.option("--tau-sweep-out", type=str, default=None, help="tau sweep CSV file (default stdout).")
@click.option("--c-sweep-out", type=str, default=None, help="C sweep CSV file (default stdout).")
@click.option("-o", "--out", type=str, default=None, help="Model JSON file (default stdout).")
def svm(data, synthetic, seed, n_train, tau, shape, weight_bound, C, tau_sweep, c_sweep, tau_sweep_out,
        c_sweep_out, out):
    """Train robust and nominal classifiers on label-first CSV DATA."""
    from .apps.data import bundled_svm_data, read_svm_csv, synthetic_svm_data, train_test_split
    from .apps.svm import (
        DEFAULT_WEIGHT_BOUND,
        SvmInstance,
        svm_accuracy,
        svm_c_sweep,
        svm_predict,
        svm_tau_sweep,
        train_nominal_svm,
        train_robust_svm,
    )

    if synthetic is not None:
        X, y = synthetic_svm_data(synthetic, seed=seed)
    elif data is not None:
        X, y = read_svm_csv(Path(data))
    else:
        X, y = bundled_svm_data()
    W = DEFAULT_WEIGHT_BOUND if weight_bound is None else weight_bound
    k = int(round(0.7 * len(y))) if n_train is None else n_train
    if not 0 < k < len(y):
        raise click.UsageError("--n-train must leave both a training and a test part")
    Xtr, ytr, Xte, yte = train_test_split(X, y, k)
    robust = train_robust_svm(SvmInstance(Xtr, ytr, tau, shape, W))
    nominal = train_nominal_svm(Xtr, ytr, C, W)
    unreg = train_nominal_svm(Xtr, ytr, None, W)
    report = {}
    for name, model in (("robust", robust), ("nominal", nominal), ("unregularized", unreg)):
        acc = svm_accuracy(svm_predict(model.w, model.b, Xte), yte) if model.status == OPTIMAL else None
        report[name] = {**model.to_dict(), "test_accuracy": acc}
    report["robust"]["tau"] = tau
    report["nominal"]["C"] = C
    _emit(_json(report), out)
    if robust.status != OPTIMAL:
        raise SolverFailure(f"robust classifier: status {robust.status}: {robust.message}")
    if tau_sweep is not None:
        _emit(_table(svm_tau_sweep(Xtr, ytr, Xte, yte, _float_list(tau_sweep), shape, W)), tau_sweep_out)
    if c_sweep is not None:
        _emit(_table(svm_c_sweep(Xtr, ytr, Xte, yte, _float_list(c_sweep), W), ("C", "metric", "value")),
              c_sweep_out)


@cli.command("demo-infeasible")
@click.option("--radius-factor", type=float, default=1.1, show_default=True,
              help="Ellipsoid radius relative to the zero-inclusion threshold.")
def demo_infeasible(radius_factor):
    """Ellipsoid (infeasible) versus variation set (feasible) on a covering row."""
    from .apps.demo import infeasibility_demo

    click.echo(_json(infeasibility_demo(radius_factor).to_dict()))


def _error(kind: str, message: str, code: int) -> int:
    click.echo(json.dumps({"error": kind, "message": message, "exit_code": code}), err=True)
    return code


def main(argv=None) -> int:
    """Run the CLI and return its exit code."""
    args = sys.argv[1:] if argv is None else list(argv)
    try:
        cli.main(args=args, prog_name="possets", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        return _error("aborted", "aborted", EXIT_USAGE)
    except click.UsageError as exc:
        return _error("usage", exc.format_message(), EXIT_USAGE)
    except click.ClickException as exc:
        return _error("input", exc.format_message(), EXIT_INPUT)
    except SolverFailure as exc:
        return _error("solver", str(exc), EXIT_SOLVER)
    except (SchemaError, ValueError, KeyError, TypeError, OSError) as exc:
        return _error("input", f"{type(exc).__name__}: {exc}", EXIT_INPUT)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
