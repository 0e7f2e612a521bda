"""Lindblad time evolution of the 4x4 density matrix.

States are propagated as row-major vectorized density matrices, so that
``vec(A @ rho @ B) == kron(A, B.T) @ vec(rho)``. Driven segments use an
adaptive Dormand-Prince 5(4) integrator; drive-free segments use the exact
exponential of the Lindblad generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .exceptions import IntegrationAccuracyError, StiffnessError, ValidationError
from .model import N_LEVELS, TWO_PI, DriveCoefficient, SivParameters, dissipators, drive_terms, frame_diagonal

_EYE = np.eye(N_LEVELS, dtype=complex)
TRACE_DRIFT_LIMIT = 1e-9


@dataclass(frozen=True)
class RotatingFrame:
    """Frame rotating the excited manifold at ``laser_frequency`` (Hz)."""

    laser_frequency: float
    segment_id: int = 0

    def __post_init__(self):
        if not self.laser_frequency > 0:
            raise ValidationError("laser_frequency must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    frames: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.states))


class TimeDependentHamiltonian:
    """``H(t) = H0 + sum_k (c_k(t) G_k + conj(c_k(t)) G_k^dagger)``.

    Keeping the operator structure separate from the scalar envelopes lets
    the integrator precompute every superoperator once per segment.
    """

    def __init__(self, h0, terms=()):
        self.h0 = np.asarray(h0, dtype=complex)
        self.terms = list(terms)

    @classmethod
    def from_drives(cls, params: SivParameters, drives, frame) -> "TimeDependentHamiltonian":
        h0 = np.diag(frame_diagonal(params, frame)).astype(complex)
        return cls(h0, drive_terms(params, drives, frame))

    def __call__(self, t: float) -> np.ndarray:
        h = self.h0.copy()
        for g, coeff in self.terms:
            c = coeff(t)
            h += c * g + np.conj(c) * g.conj().T
        return h


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> -i [h, rho]``."""
    return -1j * (np.kron(h, _EYE) - np.kron(_EYE, h.T))


def dissipator_superop(diss) -> np.ndarray:
    out = np.zeros((N_LEVELS**2, N_LEVELS**2), dtype=complex)
    for op, rate in diss:
        n = op.conj().T @ op
        out += rate * (np.kron(op, op.conj()) - 0.5 * np.kron(n, _EYE) - 0.5 * np.kron(_EYE, n.T))
    return out


def liouvillian(h: np.ndarray, diss) -> np.ndarray:
    return commutator_superop(np.asarray(h, dtype=complex)) + dissipator_superop(diss)


def emission_row(params: SivParameters) -> np.ndarray:
    """Row vector ``w`` with ``w @ vec(rho) = gamma_rad * (rho_33 + rho_44)``."""
    w = np.zeros(N_LEVELS**2, dtype=complex)
    for k in (2, 3):
        w[k * N_LEVELS + k] = params.gamma_rad
    return w


class Generator:
    """Compiled right-hand side ``dy/dt = (L0 + sum c(t) S + conj(c(t)) S') y``.

    With ``extra_rows`` the state is augmented by accumulators whose time
    derivative is ``row @ vec(rho)``.
    """

    def __init__(self, h, diss, extra_rows=()):
        if isinstance(h, TimeDependentHamiltonian):
            h0, terms = h.h0, h.terms
            self._general = None
        elif callable(h):
            h0, terms = np.zeros((N_LEVELS, N_LEVELS), dtype=complex), []
            self._general = h
        else:
            h0, terms = np.asarray(h, dtype=complex), []
            self._general = None
        n = N_LEVELS**2
        m = n + len(extra_rows)
        self.size = m
        self.static = np.zeros((m, m), dtype=complex)
        self.static[:n, :n] = liouvillian(h0, diss)
        for k, row in enumerate(extra_rows):
            self.static[n + k, :n] = row
        self.drives = []
        for g, coeff in terms:
            s_plus = np.zeros((m, m), dtype=complex)
            s_minus = np.zeros((m, m), dtype=complex)
            s_plus[:n, :n] = commutator_superop(g)
            s_minus[:n, :n] = commutator_superop(g.conj().T)
            self.drives.append((coeff, s_plus, s_minus))
        self.time_dependent = bool(self.drives) or self._general is not None

    def matrix(self, t: float) -> np.ndarray:
        out = self.static
        if self.drives:
            out = out.copy()
            for coeff, s_plus, s_minus in self.drives:
                c = coeff(t)
                if c != 0:
                    out += c * s_plus + np.conj(c) * s_minus
        if self._general is not None:
            out = out.copy()
            n = N_LEVELS**2
            out[:n, :n] += commutator_superop(np.asarray(self._general(t), dtype=complex))
        return out

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.matrix(t) @ y

    def compiled(self):
        """Array form for the compiled stepper, or None if a drive is opaque."""
        if self._general is not None:
            return None
        m, k = self.size, len(self.drives)
        sp = np.zeros((k, m, m), dtype=complex)
        sm = np.zeros((k, m, m), dtype=complex)
        codes = np.zeros(k, dtype=np.int64)
        taus, centers, peaks, offsets = (np.zeros(k) for _ in range(4))
        for i, (coeff, s_plus, s_minus) in enumerate(self.drives):
            drive = getattr(coeff, "drive", None)
            shape = getattr(getattr(drive, "shape", None), "value", None)
            if not isinstance(coeff, DriveCoefficient) or shape not in _kernels.SHAPE_CODES:
                return None
            sp[i], sm[i] = s_plus, s_minus
            codes[i] = _kernels.SHAPE_CODES[shape]
            taus[i], centers[i], peaks[i] = drive.duration_fwhm, drive.t_center, drive.peak_rabi
            offsets[i] = coeff.offset
        return (np.ascontiguousarray(self.static), sp, sm, codes, taus, centers, peaks, offsets)

    def solve(self, y0, t0, targets, tol, *, max_step=None, label="segment"):
        """States at each of the increasing ``targets`` (last one is the end time)."""
        y0 = np.asarray(y0, dtype=complex)
        vector = y0.ndim == 1
        y2 = y0.reshape(-1, 1) if vector else y0
        targets = np.asarray(targets, dtype=float)
        span = targets[-1] - t0
        arrays = self.compiled()
        if arrays is None:
            _, ys = dopri5(self, y2, t0, targets[-1], tol=tol, max_step=max_step,
                           stops=targets[:-1], label=label)
        else:
            ms = span if max_step is None else min(max_step, span)
            out, status, steps, t_fail = _kernels.dopri5_kernel(
                *arrays, np.ascontiguousarray(y2), float(t0), targets, float(tol), float(ms), 0.0, 2_000_000
            )
            if status != 0:
                raise StiffnessError(f"step size underflow in {label} at t={t_fail:.6e} s ({steps} steps)")
            ys = list(out)
        return [y[:, 0] if vector else y for y in ys]


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def dopri5(f, y0, t0, t1, *, tol=1e-9, max_step=None, first_step=None, stops=(), max_steps=2_000_000, label="segment"):
    """Adaptive Dormand-Prince 5(4) from ``t0`` to ``t1``.

    The local error estimate (max-abs norm) of every accepted step is at most
    ``tol``. Returns ``(times, states)`` at every time in ``stops`` (which are
    hit exactly) plus ``t1``. ``y`` may be a vector or a matrix of columns.
    """
    span = t1 - t0
    if not span > 0:
        raise ValidationError("t1 must be greater than t0")
    max_step = span if max_step is None else min(max_step, span)
    targets = sorted(s for s in stops if t0 < s < t1) + [t1]
    y = np.array(y0, dtype=complex)
    t = t0
    k1 = f(t, y)
    if first_step is None:
        scale = np.max(np.abs(k1))
        h = 0.01 * tol ** 0.2 / scale if scale > 0 else max_step
    else:
        h = first_step
    h = min(h, max_step)
    out_t, out_y = [], []
    steps = 0
    target_idx = 0
    while True:
        target = targets[target_idx]
        h_min = 16 * np.finfo(float).eps * max(abs(t), span)
        if h < h_min or steps > max_steps:
            raise StiffnessError(
                f"step size underflow in {label} at t={t:.6e} s (h={h:.3e} s, {steps} steps)"
            )
        hit = t + h >= target - h_min
        if hit:
            h = target - t
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            ks.append(f(t + _C[i] * h, yi))
        y_new = y + h * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
        err = np.max(np.abs(h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)))
        steps += 1
        if err <= tol:
            t = target if hit else t + h
            y = y_new
            k1 = ks[6]
            if hit:
                out_t.append(t)
                out_y.append(y)
                target_idx += 1
                if target_idx == len(targets):
                    return np.array(out_t), out_y
        factor = 0.9 * (tol / err) ** 0.2 if err > 0 else 5.0
        h = min(h * min(5.0, max(0.2, factor)), max_step)


def _check_trace(rho: np.ndarray, label: str) -> np.ndarray:
    tr = np.trace(rho).real
    drift = abs(tr - 1.0)
    if drift > TRACE_DRIFT_LIMIT:
        raise IntegrationAccuracyError(f"trace drift {drift:.3e} in {label} exceeds {TRACE_DRIFT_LIMIT}")
    return rho / tr


def integrate_segment(
    rho0,
    h,
    diss,
    t0: float,
    t1: float,
    tol: float = 1e-9,
    *,
    t_eval=None,
    max_step=None,
    label="segment",
    frame=None,
) -> Trajectory:
    """Integrate ``drho/dt = -i[H, rho] + sum rate (L rho L^+ - {L^+L, rho}/2)``.

    ``h`` is a constant 4x4 matrix, a :class:`TimeDependentHamiltonian`, or
    any callable ``t -> H(t)``. The returned trajectory holds the initial
    state, every time in ``t_eval`` and the final state.
    """
    if not 1e-12 <= tol <= 1e-4:
        raise ValidationError("tol must lie in [1e-12, 1e-4]")
    rho0 = np.asarray(rho0, dtype=complex)
    gen = Generator(h, diss)
    stops = [] if t_eval is None else [float(s) for s in t_eval]
    if not t1 > t0:
        raise ValidationError("t1 must be greater than t0")
    if gen.time_dependent:
        times = np.array(sorted(s for s in stops if t0 < s < t1) + [t1])
        ys = gen.solve(rho0.reshape(-1), t0, times, tol, max_step=max_step, label=label)
    else:
        # Constant generator: exact exponential, identical contract.
        targets = sorted(s for s in stops if t0 < s < t1) + [t1]
        times = np.array(targets)
        ys = [expm(gen.static * (s - t0)) @ rho0.reshape(-1) for s in targets]
    states = [y.reshape(N_LEVELS, N_LEVELS) for y in ys]
    states = [0.5 * (s + s.conj().T) for s in states]
    states[-1] = _check_trace(states[-1], label)
    return Trajectory(
        times=np.concatenate([[t0], times]),
        states=np.array([rho0] + states),
        frames=[frame],
    )


def propagator(gen: Generator, t0: float, t1: float, tol: float = 1e-9, *, columns=None, max_step=None, label="segment") -> np.ndarray:
    """Linear map of the (augmented) state vector from ``t0`` to ``t1``.

    ``columns`` restricts the computation to the images of selected basis
    vectors; undriven optical coherences rotate fast in most frames, so
    leaving them out keeps step sizes set by the drive.
    """
    eye = np.eye(gen.size, dtype=complex)
    if columns is not None:
        eye = np.ascontiguousarray(eye[:, list(columns)])
    if t1 == t0:
        return eye
    if not gen.time_dependent:
        return expm(gen.static * (t1 - t0)) @ eye
    return gen.solve(eye, t0, [t1], tol, max_step=max_step, label=label)[-1]


class ExactPropagator:
    """``y -> exp(M dt) y`` for a constant generator ``M``.

    ``M`` is diagonalized once; defective or ill-conditioned generators fall
    back to a scaling-and-squaring matrix exponential.
    """

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=complex)
        vals, vecs = np.linalg.eig(self.matrix)
        if np.linalg.cond(vecs) > 1e8:
            self._eig = None
        else:
            self._eig = (vals, vecs, np.linalg.inv(vecs))

    def __call__(self, y, dt: float) -> np.ndarray:
        if dt == 0:
            return np.array(y, dtype=complex)
        if self._eig is None:
            return expm(self.matrix * dt) @ y
        vals, vecs, inv = self._eig
        if np.ndim(y) == 1:
            return vecs @ (np.exp(vals * dt) * (inv @ y))
        return vecs @ (np.exp(vals * dt)[:, None] * (inv @ y))


@lru_cache(maxsize=64)
def _free_propagator(params: SivParameters, laser_frequency) -> ExactPropagator:
    frame = None if laser_frequency is None else RotatingFrame(laser_frequency)
    return ExactPropagator(liouvillian(np.diag(frame_diagonal(params, frame)), dissipators(params)))


def free_propagate(rho0, diss, params: SivParameters, dt: float, frame=None) -> np.ndarray:
    """Exact drive-free evolution over ``dt``.

    The generator for ``params`` (and ``frame``) is diagonalized once and
    cached; a ``diss`` list other than ``dissipators(params)`` is handled
    with a direct matrix exponential.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if dt == 0:
        return rho0.copy()
    if dt < 0:
        raise ValidationError("dt must be non-negative")
    freq = None if frame is None else frame.laser_frequency
    if diss is None or _same_dissipators(diss, params):
        prop = _free_propagator(params, freq)
        y = prop(rho0.reshape(-1), dt)
    else:
        gen = liouvillian(np.diag(frame_diagonal(params, frame)), diss)
        y = expm(gen * dt) @ rho0.reshape(-1)
    rho = y.reshape(N_LEVELS, N_LEVELS)
    return 0.5 * (rho + rho.conj().T)


def _same_dissipators(diss, params) -> bool:
    ref = dissipators(params)
    if len(ref) != len(diss):
        return False
    return all(r1 == r2 and np.array_equal(o1, o2) for (o1, r1), (o2, r2) in zip(ref, diss))


def change_frame(rho, frm: RotatingFrame, to: RotatingFrame, t: float) -> np.ndarray:
    """Re-express ``rho`` from frame ``frm`` into frame ``to`` at time ``t``."""
    rho = np.asarray(rho, dtype=complex)
    dphi = TWO_PI * (to.laser_frequency - frm.laser_frequency) * t
    if dphi == 0:
        return rho.copy()
    dphi = math.remainder(dphi, TWO_PI)
    u = np.array([1.0, 1.0, np.exp(1j * dphi), np.exp(1j * dphi)])
    return (u[:, None] * rho) * u.conj()[None, :]
