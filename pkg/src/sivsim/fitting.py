"""Bounded least-squares fits and curve-shape extractors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .exceptions import FitDiagnosticError, UndefinedVisibilityError, ValidationError


@dataclass
class FitProblem:
    residual: Callable[[np.ndarray], np.ndarray]
    bounds: list
    initial: np.ndarray
    max_evals: int = 2000
    tolerance: float = 1e-10

    def __post_init__(self):
        self.initial = np.atleast_1d(np.asarray(self.initial, dtype=float))
        self.bounds = [(float(lo), float(hi)) for lo, hi in self.bounds]
        if len(self.bounds) != self.initial.size:
            raise ValidationError("one (low, high) bound pair is required per parameter")
        for (lo, hi), x in zip(self.bounds, self.initial):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValidationError("bounds must be finite with low < high")
            if not lo <= x <= hi:
                raise ValidationError("initial guess must lie within the bounds")


@dataclass
class FitResult:
    parameters: np.ndarray
    residual_norm: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", False))


def _clamp(x, bounds):
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return np.clip(x, lo, hi)


def _nelder_mead(p: FitProblem, x0):
    best = {"x": x0.copy(), "f": np.inf}
    evals = {"n": 0}

    def objective(x):
        x = _clamp(x, p.bounds)
        r = np.asarray(p.residual(x), dtype=float)
        f = float(r @ r)
        evals["n"] += 1
        if f < best["f"]:
            best["x"], best["f"] = x.copy(), f
        return f

    f0 = objective(x0)
    width = np.array([hi - lo for lo, hi in p.bounds])
    # Simplex edges of 5 % of each bound width, pointing into the box.
    simplex = [x0]
    for i in range(x0.size):
        step = np.zeros_like(x0)
        step[i] = 0.05 * width[i]
        vertex = x0 + step
        if vertex[i] > p.bounds[i][1]:
            vertex = x0 - step
        simplex.append(vertex)
    res = optimize.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        bounds=p.bounds,
        options={
            "initial_simplex": np.array(simplex),
            "xatol": p.tolerance * max(1.0, float(np.max(np.abs(x0)))),
            "fatol": p.tolerance * f0,
            "maxfev": p.max_evals,
            "maxiter": 100 * p.max_evals,
        },
    )
    converged = bool(res.success)
    reason = res.message if converged else f"max_evals ({p.max_evals}) exceeded: {res.message}"
    return best["x"], best["f"], {"iterations": int(res.nit), "evaluations": evals["n"], "converged": converged, "reason": reason}


def _gauss_newton(p: FitProblem, x0):
    lo = np.array([b[0] for b in p.bounds])
    width = np.array([b[1] - b[0] for b in p.bounds])
    # Unit-box variables; the start is nudged off the faces, where trf cannot begin.
    u0 = np.clip((x0 - lo) / width, 1e-9, 1.0 - 1e-9)
    res = optimize.least_squares(
        lambda u: np.asarray(p.residual(lo + u * width), dtype=float),
        u0,
        bounds=(0.0, 1.0),
        jac="2-point",
        method="trf",
        xtol=p.tolerance,
        ftol=p.tolerance,
        gtol=p.tolerance,
        max_nfev=p.max_evals,
    )
    converged = res.status > 0
    return lo + res.x * width, float(2.0 * res.cost), {
        "iterations": int(res.nfev),
        "evaluations": int(res.nfev),
        "converged": converged,
        "reason": res.message if converged else f"max_evals ({p.max_evals}) exceeded",
    }


def fit_least_squares(p: FitProblem, *, method: str = "simplex", n_starts: int = 1, seed: int | None = None) -> FitResult:
    """Minimize ``sum(residual(x)**2)`` within the bounds.

    ``method`` is ``"simplex"`` (bounded Nelder-Mead) or ``"gauss-newton"``
    (trust-region with finite-difference Jacobian). With ``n_starts > 1``,
    additional starting points are drawn uniformly inside the bounds from a
    generator seeded with ``seed``; the best local minimum is returned.
    Exceeding ``max_evals`` does not raise: the best point so far is
    returned with ``diagnostics["converged"] = False``.
    """
    solvers = {"simplex": _nelder_mead, "gauss-newton": _gauss_newton}
    if method not in solvers:
        raise ValidationError(f"unknown fit method {method!r}")
    starts = [p.initial]
    if n_starts > 1:
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in p.bounds])
        hi = np.array([b[1] for b in p.bounds])
        starts += [rng.uniform(lo, hi) for _ in range(n_starts - 1)]
    best = None
    for i, x0 in enumerate(starts):
        x, f, diag = solvers[method](p, x0)
        diag["start"] = i
        if best is None or f < best[1]:
            best = (x, f, diag)
    x, f, diag = best
    diag["method"] = method
    return FitResult(parameters=np.asarray(x, dtype=float), residual_norm=float(np.sqrt(f)), diagnostics=diag)


def extract_visibility(upper, lower) -> np.ndarray:
    """Fringe visibility ``(upper - lower) / (upper + lower)`` per point."""
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    if upper.shape != lower.shape:
        raise ValidationError("upper and lower envelopes must have equal lengths")
    total = upper + lower
    zero = np.flatnonzero(total == 0)
    if zero.size:
        raise UndefinedVisibilityError(int(zero[0]))
    return (upper - lower) / total


def fit_exponential_decay(x, y, *, tolerance: float = 1e-12) -> tuple[float, float]:
    """Fit ``y = amplitude * exp(-x / tau)``; returns ``(amplitude, tau)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    good = y > 0
    if good.sum() < 2 or np.ptp(x[good]) == 0:
        raise FitDiagnosticError("exponential fit needs at least two positive samples at distinct x")
    slope, intercept = np.polyfit(x[good], np.log(y[good]), 1)
    if slope >= 0:
        raise FitDiagnosticError("data are not decaying; no exponential time constant")
    tau0 = -1.0 / slope
    a0 = float(np.exp(intercept))
    scale_x = np.ptp(x)

    def residual(v):
        return v[0] * a0 * np.exp(-x / (v[1] * tau0)) - y

    res = fit_least_squares(
        FitProblem(residual, [(0.1, 10.0), (0.1, 10.0)], [1.0, 1.0], max_evals=4000, tolerance=tolerance)
    )
    amp, tau = res.parameters[0] * a0, res.parameters[1] * tau0
    if not 0 < tau < 100 * scale_x:
        raise FitDiagnosticError(f"fitted decay time {tau:.3e} is outside the sampled range")
    return float(amp), float(tau)


def fit_damped_sinusoid(x, y, *, tolerance: float = 1e-10) -> dict:
    """Fit ``offset + amp * exp(-x / tau) * cos(2 pi f x + phase)``.

    The frequency is seeded from the periodogram peak. Returns a dict with
    ``offset, amplitude, frequency, phase, tau`` (``tau`` may be ``inf``).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 6:
        raise FitDiagnosticError("sinusoid fit needs at least six samples")
    dx = np.diff(x)
    if np.any(dx <= 0):
        raise FitDiagnosticError("sinusoid fit needs strictly increasing x")
    span = x[-1] - x[0]
    freqs = np.linspace(1.0 / span, 0.5 / np.min(dx), 4000)
    yc = y - y.mean()
    power = np.abs(np.exp(-2j * np.pi * np.outer(freqs, x)) @ yc)
    f0 = freqs[np.argmax(power)]
    amp0 = 0.5 * np.ptp(y)
    if amp0 == 0:
        raise FitDiagnosticError("flat data; no oscillation to fit")
    # Linear least squares for quadrature amplitudes at the seed frequency.
    basis = np.column_stack([np.ones_like(x), np.cos(2 * np.pi * f0 * x), np.sin(2 * np.pi * f0 * x)])
    c, *_ = np.linalg.lstsq(basis, y, rcond=None)
    phase0 = float(np.arctan2(-c[2], c[1]))

    def model(v):
        offset, amp, f, phase, rate = v
        return offset + amp * np.exp(-rate * (x - x[0])) * np.cos(2 * np.pi * f * x + phase)

    lo_f, hi_f = 0.8 * f0, 1.2 * f0
    v0 = [c[0], max(np.hypot(c[1], c[2]), 1e-3 * amp0), f0, phase0, 0.0]
    bounds = [
        (y.min() - amp0, y.max() + amp0),
        (0.0, 4.0 * amp0),
        (lo_f, hi_f),
        (phase0 - 2 * np.pi, phase0 + 2 * np.pi),
        (0.0, 10.0 / span),
    ]
    res = fit_least_squares(
        FitProblem(lambda v: model(v) - y, bounds, v0, max_evals=3000, tolerance=tolerance),
        method="gauss-newton",
    )
    offset, amp, f, phase, rate = res.parameters
    return {
        "offset": float(offset),
        "amplitude": float(amp),
        "frequency": float(f),
        "phase": float(phase),
        "tau": float(np.inf if rate * span < 1e-9 else 1.0 / rate),
        "residual_norm": res.residual_norm,
    }
