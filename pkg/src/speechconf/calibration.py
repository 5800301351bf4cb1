"""Post-hoc temperature scaling of classifier logits.

One scalar T > 0 divides the logits before softmax; fitted by minimizing
validation NLL with a golden-section search over log T. Argmax is invariant
under any T, so calibration never changes hard predictions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from speechconf.errors import DegenerateLabels, NonPositiveTemperature
from speechconf.neural.losses import log_softmax

T_BOUNDS = (0.05, 20.0)
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class CalibrationModel:
    temperature: float
    fitted_nll_before: float  # NLL at T = 1
    fitted_nll_after: float


def nll(logits: np.ndarray, labels: np.ndarray, temperature: float = 1.0) -> float:
    """Mean negative log-likelihood of the labels under softmax(z / T)."""
    if temperature <= 0:
        raise NonPositiveTemperature(f"T must be positive, got {temperature}")
    logp = log_softmax(np.asarray(logits, dtype=np.float64) / temperature)
    n = len(labels)
    return float(-logp[np.arange(n), np.asarray(labels, dtype=np.int64)].mean())


def apply_temperature(logits: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(z / T); rows sum to 1."""
    if temperature <= 0:
        raise NonPositiveTemperature(f"T must be positive, got {temperature}")
    return np.exp(log_softmax(np.asarray(logits, dtype=np.float64) / temperature))


def fit_temperature(logits: np.ndarray, labels: np.ndarray, tol: float = 1e-6) -> CalibrationModel:
    """Golden-section search for argmin_T NLL on log T in [log 0.05, log 20].

    The NLL at T = 1 is always a candidate, so calibration can only improve
    (or match) the uncalibrated NLL. Hitting a search bound warns but is not
    an error.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(logits) < 2:
        raise DegenerateLabels("need at least 2 rows to fit a temperature")
    if len(np.unique(labels)) < 2:
        raise DegenerateLabels("need at least 2 distinct labels to fit a temperature")

    def f(log_t: float) -> float:
        return nll(logits, labels, float(np.exp(log_t)))

    lo, hi = np.log(T_BOUNDS[0]), np.log(T_BOUNDS[1])
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    log_t = (a + b) / 2.0

    before = nll(logits, labels, 1.0)
    candidates = [(f(log_t), float(np.exp(log_t))), (before, 1.0),
                  (f(lo), T_BOUNDS[0]), (f(hi), T_BOUNDS[1])]
    after, t = min(candidates, key=lambda p: p[0])
    if t in T_BOUNDS:
        warnings.warn(f"fitted temperature hit search bound {t}", stacklevel=2)
    return CalibrationModel(temperature=t, fitted_nll_before=before, fitted_nll_after=after)
