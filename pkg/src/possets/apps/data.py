"""Seeded synthetic data and bundled sample files.

The PV day uses a smooth household demand profile, a bell-shaped irradiance
profile between 06:00 and 18:00 and the two-level tariff.  Realized
irradiance is drawn from independent lognormal marginals whose arithmetic
means equal the nominal profile.  Classification data are two classes of
lognormal (hence strictly positive) feature vectors.
"""

from __future__ import annotations

import io
import json
from importlib import resources

import numpy as np

from .._io import read_text
from ..calibration import LognormalSpec, lognormal_params, lognormal_set, sample_lognormal
from .pv import DEFAULT_PANEL_AREA, PvInstance, read_pv_csv, step_tariff

__all__ = [
    "DEFAULT_IRRADIANCE_CV",
    "synthetic_pv_instance",
    "irradiance_spec",
    "irradiance_draws",
    "calibrated_pv_instance",
    "synthetic_svm_data",
    "train_test_split",
    "bundled_pv_instance",
    "read_svm_csv",
    "bundled_svm_data",
    "bundled_knapsack",
    "data_path",
]

#: Coefficient of variation of hourly irradiance in the synthetic model.
DEFAULT_IRRADIANCE_CV = 0.35


def synthetic_pv_instance(T: int = 24, z: float = DEFAULT_PANEL_AREA, Q: float = 10.0, gamma: float = 0.8) -> PvInstance:
    """Deterministic planning day.

    Demand [kWh] has a morning and an evening peak; the nominal irradiance
    [kWh/m^2] is a half-sine between hours 6 and 18 with a 0.55 peak.  With
    the default panel area the midday surplus is charged into the battery
    and the evening peak can absorb all of it, so every unit of panel output
    is worth using and the panel rows bind in the optimal plan.
    """
    h = np.arange(T, dtype=float) % 24
    D = (0.45 + 0.35 * np.exp(-0.5 * ((h - 7.5) / 1.5) ** 2)
         + 0.75 * np.exp(-0.5 * ((h - 19.0) / 2.0) ** 2))
    E0 = np.where((h > 6.0) & (h < 18.0), 0.55 * np.sin(np.pi * (h - 6.0) / 12.0), 0.0)
    return PvInstance(np.round(D, 4), np.round(E0, 4), step_tariff(T), gamma, z, Q,
                      meta={"source": "synthetic"})


def irradiance_spec(inst: PvInstance, cv: float = DEFAULT_IRRADIANCE_CV) -> LognormalSpec:
    """Lognormal model of daylight irradiance with mean ``E0`` and the given CV."""
    mu = inst.E0[inst.daylight]
    return lognormal_params(mu, (cv * mu) ** 2)


def irradiance_draws(inst: PvInstance, n: int, seed: int = 0, cv: float = DEFAULT_IRRADIANCE_CV) -> np.ndarray:
    """``n x T`` realized irradiance profiles (zero at night)."""
    rng = np.random.default_rng(seed)
    day = sample_lognormal(irradiance_spec(inst, cv), n, rng)
    out = np.zeros((n, inst.T))
    out[:, inst.daylight] = day
    return out


def calibrated_pv_instance(inst: PvInstance, tau: float, cv: float = DEFAULT_IRRADIANCE_CV) -> PvInstance:
    """Instance whose set is centred at the lognormal median with the log-space shape."""
    return inst.with_set(lognormal_set(irradiance_spec(inst, cv), tau))


def synthetic_svm_data(n_samples: int = 100, n_features: int = 2, seed: int = 0, separation: float = 0.6,
                       spread: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Two lognormal classes with log-means ``+-separation/2`` on every feature.

    Returns
    -------
    X : ndarray, shape (n_samples, n_features)
        Strictly positive features.
    y : ndarray
        Labels in ``{-1, +1}``, alternating so both classes are balanced.
    """
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n_samples) % 2 == 0, 1.0, -1.0)
    logx = 1.0 + 0.5 * separation * y[:, None] + spread * rng.standard_normal((n_samples, n_features))
    return np.exp(logx), y


def train_test_split(X, y, n_train: int):
    """First ``n_train`` rows for training and the rest for testing."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return X[:n_train], y[:n_train], X[n_train:], y[n_train:]


def data_path(name: str):
    """Path-like handle to a bundled data file."""
    return resources.files("possets.data").joinpath(name)


def bundled_pv_instance() -> PvInstance:
    """PV day from the bundled ``pv_instance.csv``."""
    return read_pv_csv(data_path("pv_instance.csv").read_text(), gamma=0.8, z=DEFAULT_PANEL_AREA, Q=10.0)


def read_svm_csv(source) -> tuple[np.ndarray, np.ndarray]:
    """Label-first rows ``label,x1,...,xn`` with an optional header line.

    ``source`` is a path, an open text file or the CSV text itself.
    """
    lines = [ln for ln in read_text(source).splitlines() if ln.strip()]
    if not lines:
        raise ValueError("no samples found")
    try:
        [float(v) for v in lines[0].split(",")]
    except ValueError:
        lines = lines[1:]
    rows = np.loadtxt(io.StringIO("\n".join(lines)), delimiter=",", ndmin=2)
    if rows.shape[1] < 2:
        raise ValueError("each row needs a label and at least one feature")
    return rows[:, 1:], rows[:, 0]


def bundled_svm_data() -> tuple[np.ndarray, np.ndarray]:
    """Label-first rows from the bundled ``svm_sample.csv``."""
    return read_svm_csv(data_path("svm_sample.csv").read_text())


def bundled_knapsack() -> dict:
    """The bundled single-item knapsack problem as a JSON dictionary."""
    return json.loads(data_path("knapsack.json").read_text())
