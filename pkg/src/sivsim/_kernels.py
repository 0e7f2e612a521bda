"""Compiled Dormand-Prince 5(4) stepper for envelope-driven Lindblad generators."""

import numpy as np
from numba import njit

SHAPE_CODES = {"sech": 0, "double_exp": 1, "square": 2}

_ACOSH2 = np.arccosh(2.0)
_LN2 = np.log(2.0)

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1 = B1 - 5179 / 57600
E3 = B3 - 7571 / 16695
E4 = B4 - 393 / 640
E5 = B5 + 92097 / 339200
E6 = B6 - 187 / 2100
E7 = -1 / 40


@njit(cache=True)
def _envelope(code, tau, center, peak, t):
    x = t - center
    if code == 0:
        return peak / np.cosh(2.0 * _ACOSH2 * x / tau)
    if code == 1:
        return peak * np.exp(-2.0 * _LN2 * abs(x) / tau)
    if abs(x) <= 0.5 * tau:
        return peak
    return 0.0


@njit(cache=True)
def _apply(t, s0, sp, sm, codes, taus, centers, peaks, offsets, y, mat):
    mat[:, :] = s0
    for k in range(codes.shape[0]):
        env = _envelope(codes[k], taus[k], centers[k], peaks[k], t)
        if env == 0.0:
            continue
        c = env * np.exp(1j * offsets[k] * t)
        cc = np.conj(c)
        mat += c * sp[k] + cc * sm[k]
    return mat @ y


@njit(cache=True)
def dopri5_kernel(s0, sp, sm, codes, taus, centers, peaks, offsets, y0, t0, targets, tol, max_step, first_step, max_steps):
    """Integrate ``dY/dt = M(t) Y``; returns ``(states at targets, status, steps, t)``.

    status 0: success, 1: step-size underflow or step budget exhausted.
    """
    m = s0.shape[0]
    mat = np.empty((m, m), dtype=np.complex128)
    nt = targets.shape[0]
    out = np.zeros((nt, y0.shape[0], y0.shape[1]), dtype=np.complex128)
    y = y0.copy()
    t = t0
    span = targets[nt - 1] - t0
    eps = np.finfo(np.float64).eps
    k1 = _apply(t, s0, sp, sm, codes, taus, centers, peaks, offsets, y, mat)
    if first_step > 0:
        h = first_step
    else:
        scale = np.max(np.abs(k1))
        h = 0.01 * tol**0.2 / scale if scale > 0 else max_step
    h = min(h, max_step)
    steps = 0
    idx = 0
    while True:
        target = targets[idx]
        h_min = 16.0 * eps * max(abs(t), span)
        if h < h_min or steps > max_steps:
            return out, 1, steps, t
        hit = t + h >= target - h_min
        if hit:
            h = target - t
        k2 = _apply(t + C2 * h, s0, sp, sm, codes, taus, centers, peaks, offsets, y + h * (A21 * k1), mat)
        k3 = _apply(t + C3 * h, s0, sp, sm, codes, taus, centers, peaks, offsets, y + h * (A31 * k1 + A32 * k2), mat)
        k4 = _apply(t + C4 * h, s0, sp, sm, codes, taus, centers, peaks, offsets, y + h * (A41 * k1 + A42 * k2 + A43 * k3), mat)
        k5 = _apply(
            t + C5 * h, s0, sp, sm, codes, taus, centers, peaks, offsets,
            y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), mat,
        )
        k6 = _apply(
            t + h, s0, sp, sm, codes, taus, centers, peaks, offsets,
            y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), mat,
        )
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = _apply(t + h, s0, sp, sm, codes, taus, centers, peaks, offsets, y_new, mat)
        err = np.max(np.abs(h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)))
        steps += 1
        if err <= tol:
            t = target if hit else t + h
            y = y_new
            k1 = k7
            if hit:
                out[idx] = y
                idx += 1
                if idx == nt:
                    return out, 0, steps, t
        if err > 0:
            factor = 0.9 * (tol / err) ** 0.2
        else:
            factor = 5.0
        h = min(h * min(5.0, max(0.2, factor)), max_step)
