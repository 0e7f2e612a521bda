"""Estimator-style wrappers around the experiment runners.

``predict(X)`` simulates the experiment's observable at the sweep values in
``X``; ``fit(X, y)`` stores the simulation and, for experiments with a free
model parameter, adjusts it to the measured ``y``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ValidationError
from .fitting import FitProblem, fit_least_squares
from .pulses import DriveRatio
from .sequences import (
    SequenceConfig,
    run_pump,
    run_rabi,
    run_raman_rabi,
    run_raman_ramsey,
    run_ramsey_optical,
)


def _sweep(X) -> np.ndarray:
    arr = check_array(X, ensure_2d=False, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValidationError("sweep input must have a single feature column")
        arr = arr[:, 0]
    return arr


class _Experiment(RegressorMixin, BaseEstimator):
    def _run(self, x):
        raise NotImplementedError

    def fit(self, X, y=None):
        x = _sweep(X)
        if y is not None:
            y = check_array(y, ensure_2d=False, dtype=float)
            if y.shape != x.shape:
                raise ValidationError("X and y lengths differ")
            self._fit_free(x, y)
        self.result_ = self._run(x)
        return self

    def _fit_free(self, x, y):
        pass

    def predict(self, X):
        return self._run(_sweep(X)).observable

    def transform(self, X):
        return self.predict(X).reshape(-1, 1)

    def derived(self) -> dict:
        check_is_fitted(self, "result_")
        return dict(self.result_.derived)


class RabiExperiment(_Experiment):
    """Counts per repetition versus average power (W) of a resonant pulse."""

    def __init__(self, transition="C", params=None, sequence=None, steady_state=None, tol=1e-9):
        self.transition = transition
        self.params = params
        self.sequence = sequence
        self.steady_state = steady_state
        self.tol = tol

    def _run(self, x):
        return run_rabi(self.transition, x, self.params, self.sequence, steady_state=self.steady_state, tol=self.tol)


class OpticalRamseyExperiment(_Experiment):
    """Ramsey visibility versus pulse separation (s)."""

    def __init__(self, transition="C", params=None, sequence=None, tol=1e-9):
        self.transition = transition
        self.params = params
        self.sequence = sequence
        self.tol = tol

    def _run(self, x):
        return run_ramsey_optical(self.transition, x, self.params, self.sequence, tol=self.tol)


class PumpExperiment(_Experiment):
    """Upper-ground population versus time (s) during the pump."""

    def __init__(self, params=None, sequence=None):
        self.params = params
        self.sequence = sequence

    def _run(self, x):
        if np.any(np.diff(x) < 0) or x[0] != 0:
            raise ValidationError("pump sample times must start at 0 and increase")
        res = run_pump(self.params, self.sequence, duration=float(x[-1]), n_points=len(x))
        if not np.allclose(res.sweep_values, x, rtol=0, atol=1e-15):
            raise ValidationError("pump sample times must be evenly spaced")
        return res


class RamanRabiExperiment(_Experiment):
    """Upper-ground population versus Raman beam power (W).

    With ``fit_ratio=True``, ``fit(X, y)`` adjusts the C:D drive ratio to
    the data and stores it as ``ratio_``.
    """

    def __init__(self, ratio=0.7, params=None, sequence=None, fit_ratio=False, tol=1e-9):
        self.ratio = ratio
        self.params = params
        self.sequence = sequence
        self.fit_ratio = fit_ratio
        self.tol = tol

    def _current_ratio(self):
        return getattr(self, "ratio_", self.ratio)

    def _run(self, x):
        return run_raman_rabi(x, DriveRatio(self._current_ratio()), self.params, self.sequence, tol=self.tol)

    def _fit_free(self, x, y):
        if not self.fit_ratio:
            return
        self.ratio_ = fit_drive_ratio(x, y, self.params, self.sequence, initial=self.ratio, tol=self.tol)


class RamanRamseyExperiment(_Experiment):
    """Upper-ground population versus Raman pulse separation (s)."""

    def __init__(self, ratio=0.7, params=None, sequence=None, power=None, tol=1e-9):
        self.ratio = ratio
        self.params = params
        self.sequence = sequence
        self.power = power
        self.tol = tol

    def _run(self, x):
        return run_raman_ramsey(x, DriveRatio(self.ratio), self.params, self.sequence, power=self.power, tol=self.tol)


def fit_drive_ratio(powers, population, params=None, sequence=None, *, initial=0.5, tol=1e-9,
                    n_starts=1, seed=None) -> float:
    """C:D drive ratio that best reproduces a Raman Rabi power sweep."""
    powers = np.asarray(powers, dtype=float)
    population = np.asarray(population, dtype=float)
    sequence = sequence or SequenceConfig()
    initial = min(max(float(initial), 0.06), 0.99)

    def residual(v):
        return run_raman_rabi(powers, DriveRatio(float(v[0])), params, sequence, tol=tol).observable - population

    res = fit_least_squares(
        FitProblem(residual, [(0.05, 1.0)], [initial], max_evals=200, tolerance=1e-8),
        method="gauss-newton",
        n_starts=n_starts,
        seed=seed,
    )
    return float(res.parameters[0])


__all__ = [
    "OpticalRamseyExperiment",
    "PumpExperiment",
    "RabiExperiment",
    "RamanRabiExperiment",
    "RamanRamseyExperiment",
    "fit_drive_ratio",
]
