"""Pulse sequences for the one-photon and Raman experiments.

Every sweep point is an independent simulation. Timing of the Raman
sequences is absolute inside the repetition frame: the pump starts at t=0,
Raman pulses follow the pump, and the readout pulse starts a fixed delay
after the last Raman pulse.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .engine import (
    ExactPropagator,
    Generator,
    RotatingFrame,
    TimeDependentHamiltonian,
    change_frame,
    emission_row,
    free_propagate,
    liouvillian,
    propagator,
)
from .exceptions import FitDiagnosticError, NumericalError, SivSimError, ValidationError
from .fitting import (
    FitProblem,
    extract_visibility,
    fit_damped_sinusoid,
    fit_exponential_decay,
    fit_least_squares,
)
from .model import (
    TWO_PI,
    SivParameters,
    Transition,
    default_parameters,
    dissipators,
    frame_diagonal,
    thermal_state,
    transition_frequency,
)
from .pulses import (
    DriveRatio,
    PulseEnvelope,
    PulseShape,
    amplitude_fwhm,
    calib_for_pi_power,
    peak_rabi_for_area,
    power_to_area,
    shape_energy_factor,
)

DIAGONAL = (0, 5, 10, 15)
EMISSION = 16

# pump_rabi (rad/s) solved with fit_pump_rabi for the default parameters so
# that the upper-ground population after a 200 ns pump is 0.22.
DEFAULT_PUMP_RABI = 3.908840e8


@dataclass(frozen=True)
class SequenceConfig:
    """Timing, drive strengths and detection constants of the experiments.

    Pulse lengths are intensity FWHM. ``rabi_pi_power_c``/``_b`` place a
    one-photon pi pulse on C/B at that average power; ``raman_pi_power``
    places two-photon area pi (adiabatic-elimination estimate, at
    ``RAMAN_REFERENCE_RATIO``) at that average power.
    """

    rep_rate: float = 80e6
    raman_rep_rate: float = 1e6
    pump_duration: float = 200e-9
    readout_duration: float = 200e-9
    pump_rabi: float = DEFAULT_PUMP_RABI
    raman_delay: float = 50e-12
    readout_delay: float = 2e-9
    one_photon_length: float = 12e-12
    raman_length: float = 1e-12
    raman_detuning: float = TWO_PI * 500e9
    rabi_pi_power_c: float = 0.5e-6
    rabi_pi_power_b: float = 50e-6 / 36
    raman_pi_power: float = 2e-6
    background_slope: float = 0.0
    collection_scale: float = 1.0
    steady_state: bool = True
    pulse_picker_leakage: bool = False
    etalon_finesse: float = 50.0
    etalon_fsr: float = 1000e9
    etalon_bandwidth: float = 20e9

    def __post_init__(self):
        for name in ("rep_rate", "raman_rep_rate", "one_photon_length", "raman_length",
                     "rabi_pi_power_c", "rabi_pi_power_b", "raman_pi_power", "collection_scale"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("pump_duration", "readout_duration", "raman_delay", "readout_delay",
                     "pump_rabi", "background_slope", "raman_detuning"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.raman_span() >= 1.0 / self.raman_rep_rate:
            raise ValidationError("Raman sequence does not fit into one repetition period")

    def raman_span(self, ramsey_delay: float = 0.0) -> float:
        return self.pump_duration + self.raman_delay + ramsey_delay + self.readout_delay + self.readout_duration

    def replace(self, **changes) -> "SequenceConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


RAMAN_REFERENCE_RATIO = 0.7
RAMAN_FIT_SEPARATION = 3.0  # amplitude FWHMs between pulse centres


@dataclass
class ExperimentResult:
    """Sweep axis, simulated observable and derived scalars of one experiment.

    ``columns`` holds every per-point series with unit-suffixed names in CSV
    order; ``extras`` holds auxiliary data that is not tabulated.
    """

    kind: str
    sweep_name: str
    sweep_values: np.ndarray
    observable_name: str
    observable: np.ndarray
    columns: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sweep_values = np.asarray(self.sweep_values, dtype=float)
        self.observable = np.asarray(self.observable, dtype=float)
        if self.sweep_values.shape != self.observable.shape:
            raise ValidationError("sweep and observable lengths differ")
        for name, col in self.columns.items():
            if len(col) != len(self.sweep_values):
                raise ValidationError(f"column {name} length differs from the sweep")


def sweep_map(fn, values, n_jobs: int = 1) -> list:
    """Apply ``fn`` to each sweep value; results are ordered by sweep index."""
    values = list(values)
    if n_jobs <= 1 or len(values) < 2:
        out = []
        for i, v in enumerate(values):
            out.append(_indexed(fn, i, v))
        return out
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda iv: _indexed(fn, *iv), enumerate(values)))


def _indexed(fn, i, v):
    try:
        return fn(v)
    except NumericalError as exc:
        raise type(exc)(f"sweep point {i} ({v!r}): {exc}") from exc


def _augmented(rho) -> np.ndarray:
    y = np.zeros(17, dtype=complex)
    y[:16] = np.asarray(rho).reshape(-1)
    return y


@lru_cache(maxsize=32)
def _free_augmented(params: SivParameters, laser_frequency: float, dt: float) -> np.ndarray:
    frame = RotatingFrame(laser_frequency)
    gen = Generator(np.diag(frame_diagonal(params, frame)), dissipators(params), [emission_row(params)])
    return expm(gen.static * dt)


# ---------------------------------------------------------------- one-photon


def rabi_calibration(seq: SequenceConfig, transition) -> float:
    t = Transition.coerce(transition)
    pi_power = seq.rabi_pi_power_c if t is Transition.C else seq.rabi_pi_power_b
    return calib_for_pi_power(pi_power, seq.rep_rate, PulseShape.DOUBLE_EXP, amplitude_fwhm("double_exp", seq.one_photon_length))


def one_photon_area(powers, seq: SequenceConfig, transition) -> np.ndarray:
    tau = amplitude_fwhm("double_exp", seq.one_photon_length)
    return np.asarray(
        power_to_area(powers, seq.rep_rate, PulseShape.DOUBLE_EXP, tau, rabi_calibration(seq, transition))
    )


def one_photon_pulse(seq: SequenceConfig, transition, area: float, *, phase: float = 0.0, t_center: float | None = None) -> PulseEnvelope:
    """Resonant double-exponential pulse of the given area on one transition."""
    t = Transition.coerce(transition)
    tau = amplitude_fwhm("double_exp", seq.one_photon_length)
    pulse = PulseEnvelope(
        PulseShape.DOUBLE_EXP,
        tau,
        peak_rabi_for_area(PulseShape.DOUBLE_EXP, tau, area),
        {t: 1.0},
        reference=t,
        phase=phase,
    )
    if t_center is None:
        t_center = pulse.truncation * tau
    return pulse.replace(t_center=t_center)


def _check_one_photon(transition) -> Transition:
    t = Transition.coerce(transition)
    if t not in (Transition.B, Transition.C):
        raise ValidationError("one-photon experiments drive transition B or C")
    return t


def rabi_period_map(params: SivParameters, seq: SequenceConfig, transition, area: float, tol: float = 1e-9):
    """Population map and emission of one repetition period.

    Returns ``(P, e)`` where ``P[i, j]`` is the population of level ``i`` at
    the end of the period that starts in level ``j``, and ``e[j]`` the
    emitted photon number (``gamma_rad`` times time-integrated excited
    population). Optical coherences at the period end are below
    ``exp(-T / T2*)`` and are dropped.
    """
    t = _check_one_photon(transition)
    frame = RotatingFrame(transition_frequency(params, t))
    pulse = one_photon_pulse(seq, t, area)
    gen = Generator(TimeDependentHamiltonian.from_drives(params, [pulse], frame), dissipators(params), [emission_row(params)])
    _, t_end = pulse.support
    period = 1.0 / seq.rep_rate
    if t_end >= period:
        raise ValidationError("pulse support exceeds the repetition period")
    u = propagator(gen, 0.0, t_end, tol, columns=DIAGONAL, label=f"{t.value} pulse")
    m = _free_augmented(params, frame.laser_frequency, period - t_end) @ u
    return m[list(DIAGONAL), :].real, m[EMISSION, :].real


def periodic_steady_state(pop_map: np.ndarray, start: np.ndarray, *, threshold: float = 1e-12, max_periods: int = 1_000_000) -> np.ndarray:
    """Repeat the period map until the period-to-period change is below ``threshold``."""
    p = np.asarray(start, dtype=float)
    for _ in range(max_periods):
        nxt = pop_map @ p
        if np.max(np.abs(nxt - p)) < threshold:
            return nxt
        p = nxt
    raise NumericalError("periodic steady state did not converge")


def rabi_signal(params, seq, transition, area, *, steady_state=None, tol=1e-9) -> float:
    """Emitted photon number per repetition for one pulse area."""
    steady = seq.steady_state if steady_state is None else steady_state
    pop_map, emission = rabi_period_map(params, seq, transition, area, tol)
    p0 = np.real(np.diag(thermal_state(params)))
    if steady:
        p0 = periodic_steady_state(pop_map, p0)
    return float(emission @ p0)


def oscillation_extrema(x, y) -> list:
    """Interior local extrema as ``(kind, x_refined, y)`` using parabolic refinement."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []
    for i in range(1, len(y) - 1):
        kind = None
        if y[i] > y[i - 1] and y[i] >= y[i + 1]:
            kind = "max"
        elif y[i] < y[i - 1] and y[i] <= y[i + 1]:
            kind = "min"
        if kind is None:
            continue
        xs, ys = x[i - 1 : i + 2], y[i - 1 : i + 2]
        a, b, c = np.polyfit(xs, ys, 2)
        xv = -b / (2 * a) if a != 0 else x[i]
        if not xs[0] <= xv <= xs[2]:
            xv = x[i]
        out.append((kind, float(xv), float(np.polyval([a, b, c], xv))))
    return out


def cycle_visibilities(extrema) -> list:
    """(max - min) / (max + min) for each maximum and the minimum following it."""
    vis = []
    for (k1, _, y1), (k2, _, y2) in zip(extrema, extrema[1:]):
        if k1 == "max" and k2 == "min" and y1 + y2 > 0:
            vis.append((y1 - y2) / (y1 + y2))
    return vis


def run_rabi(transition, powers, params: SivParameters | None = None, seq: SequenceConfig | None = None, *,
             steady_state: bool | None = None, tol: float = 1e-9, n_jobs: int = 1) -> ExperimentResult:
    """Emission versus average power of a resonant 12 ps pulse on B or C."""
    params = params or default_parameters()
    seq = seq or SequenceConfig()
    t = _check_one_photon(transition)
    powers = np.asarray(powers, dtype=float)
    areas = one_photon_area(powers, seq, t)
    counts = np.array(sweep_map(lambda a: rabi_signal(params, seq, t, a, steady_state=steady_state, tol=tol), areas, n_jobs))
    signal = seq.collection_scale * counts + seq.background_slope * powers
    derived = {"transition": t.value, "steady_state": bool(seq.steady_state if steady_state is None else steady_state)}
    extrema = oscillation_extrema(areas, counts)
    maxima = [x for k, x, _ in extrema if k == "max"]
    if maxima:
        scale = math.pi / maxima[0]
        derived["area_scale"] = scale
        derived["extrema_area_pi"] = [x * scale / math.pi for _, x, _ in extrema]
        derived["extrema_kind"] = [k for k, _, _ in extrema]
        vis = cycle_visibilities(extrema)
        if vis:
            derived["cycle_visibility"] = vis
            derived["visibility_min"] = float(min(vis))
    return ExperimentResult(
        kind="rabi",
        sweep_name="power_uw",
        sweep_values=powers,
        observable_name="counts",
        observable=signal,
        columns={"power_uw": powers * 1e6, "area_rad": areas, "counts": signal},
        derived=derived,
    )


def ramsey_signal(params, seq, transition, delay: float, phase: float, *, tol: float = 1e-9) -> float:
    """Emitted photons per repetition after two pi/2 pulses separated by ``delay``.

    Single repetition from the thermal state.
    """
    t = _check_one_photon(transition)
    frame = RotatingFrame(transition_frequency(params, t))
    p1 = one_photon_pulse(seq, t, math.pi / 2)
    p2 = one_photon_pulse(seq, t, math.pi / 2, phase=phase, t_center=p1.t_center + delay)
    diss = dissipators(params)
    rows = [emission_row(params)]
    y = _augmented(thermal_state(params))
    segments = [[p1], [p2]] if p2.support[0] >= p1.support[1] else [[p1, p2]]
    now = 0.0
    for pulses in segments:
        start = min(p.support[0] for p in pulses)
        end = max(p.support[1] for p in pulses)
        if start > now:
            y = _free_augmented(params, frame.laser_frequency, start - now) @ y
        gen = Generator(TimeDependentHamiltonian.from_drives(params, pulses, frame), diss, rows)
        y = gen.solve(y, start, [end], tol, label=f"Ramsey {t.value}")[-1]
        now = end
    period = 1.0 / seq.rep_rate
    y = _free_augmented(params, frame.laser_frequency, period - now) @ y
    return float(y[EMISSION].real)


def run_ramsey_optical(transition, coarse_delays, params: SivParameters | None = None, seq: SequenceConfig | None = None, *,
                       tol: float = 1e-9, n_jobs: int = 1) -> ExperimentResult:
    """Upper/lower Ramsey envelopes, visibilities and the fitted T2*.

    The fine delay scan over an optical period is replaced by the second
    pulse's phase: 0 gives the upper and pi the lower envelope. T2* is the
    decay time of the fringe amplitude ``upper - lower``; the decay time of
    the visibility itself is reported as ``visibility_decay_ps``.
    """
    params = params or default_parameters()
    seq = seq or SequenceConfig()
    t = _check_one_photon(transition)
    delays = np.asarray(coarse_delays, dtype=float)
    fwhm = amplitude_fwhm("double_exp", seq.one_photon_length)
    if np.any(delays < fwhm):
        raise ValidationError("every Ramsey delay must be at least the pulse FWHM")

    def point(d):
        return (ramsey_signal(params, seq, t, d, 0.0, tol=tol), ramsey_signal(params, seq, t, d, math.pi, tol=tol))

    pairs = np.array(sweep_map(point, delays, n_jobs))
    upper = seq.collection_scale * pairs[:, 0]
    lower = seq.collection_scale * pairs[:, 1]
    vis = extract_visibility(upper, lower)
    derived = {"transition": t.value}
    try:
        _, t2 = fit_exponential_decay(delays, upper - lower)
        _, tv = fit_exponential_decay(delays, vis)
    except FitDiagnosticError as exc:
        raise FitDiagnosticError(f"Ramsey {t.value}: {exc}") from exc
    derived["t2_star_ps"] = t2 * 1e12
    derived["visibility_decay_ps"] = tv * 1e12
    derived["linewidth_mhz"] = 1.0 / (TWO_PI * t2) / 1e6
    return ExperimentResult(
        kind="ramsey",
        sweep_name="delay_ps",
        sweep_values=delays,
        observable_name="visibility",
        observable=vis,
        columns={"delay_ps": delays * 1e12, "upper_counts": upper, "lower_counts": lower, "visibility": vis},
        derived=derived,
    )


# ------------------------------------------------------------ pump / Raman


def pump_frame(params: SivParameters) -> RotatingFrame:
    return RotatingFrame(transition_frequency(params, Transition.D), segment_id=0)


@lru_cache(maxsize=32)
def _pump_propagator(params: SivParameters, pump_rabi: float) -> ExactPropagator:
    frame = pump_frame(params)
    h = np.diag(frame_diagonal(params, frame)).astype(complex)
    g, e = Transition.D.ground, Transition.D.excited
    h[g, e] = h[e, g] = 0.5 * pump_rabi
    return ExactPropagator(liouvillian(h, dissipators(params)))


def run_pump(params: SivParameters | None = None, seq: SequenceConfig | None = None, duration: float | None = None,
             *, n_points: int = 201) -> ExperimentResult:
    """Upper-ground population during a CW pump on D, starting thermal."""
    params = params or default_parameters()
    seq = seq or SequenceConfig()
    duration = seq.pump_duration if duration is None else duration
    if duration <= 0:
        raise ValidationError("pump duration must be positive")
    times = np.linspace(0.0, duration, n_points)
    prop = _pump_propagator(params, seq.pump_rabi)
    y0 = thermal_state(params).reshape(-1)
    states = np.array([prop(y0, t) for t in times])
    rho22 = states[:, 5].real
    derived = {
        "floor_population": float(rho22[-1]),
        "monotone": bool(np.all(np.diff(rho22) <= 1e-12)),
        "pump_rabi_rad_per_s": seq.pump_rabi,
    }
    return ExperimentResult(
        kind="pump",
        sweep_name="time_ns",
        sweep_values=times,
        observable_name="rho22",
        observable=rho22,
        columns={"time_ns": times * 1e9, "rho22": rho22},
        derived=derived,
    )


def pump_floor(params: SivParameters, seq: SequenceConfig, pump_rabi: float | None = None) -> float:
    rabi = seq.pump_rabi if pump_rabi is None else pump_rabi
    y = _pump_propagator(params, rabi)(thermal_state(params).reshape(-1), seq.pump_duration)
    return float(y[5].real)


def fit_pump_rabi(params: SivParameters | None = None, seq: SequenceConfig | None = None, target: float = 0.22) -> float:
    """CW pump Rabi frequency whose 200 ns pump leaves ``target`` in |2>."""
    params = params or default_parameters()
    seq = seq or SequenceConfig()

    def residual(x):
        return np.array([pump_floor(params, seq, 10.0 ** x[0]) - target])

    res = fit_least_squares(FitProblem(residual, [(5.0, 11.0)], [8.0], tolerance=1e-12))
    if res.residual_norm > 1e-6:
        raise FitDiagnosticError(f"pump floor {target} is not reachable (residual {res.residual_norm:.2e})")
    return float(10.0 ** res.parameters[0])


def raman_frame(params: SivParameters, seq: SequenceConfig) -> RotatingFrame:
    """Frame at the Raman carrier.

    The carrier sits midway between the two Lambda legs, so both legs are
    ``raman_detuning`` below |3> once the pulse bandwidth supplies the
    two-photon difference frequency.
    """
    offset = seq.raman_detuning + 0.5 * params.delta_g
    return RotatingFrame(transition_frequency(params, Transition.C) - offset / TWO_PI, segment_id=1)


def raman_coupling_sum(params: SivParameters, seq: SequenceConfig) -> float:
    """Sum over both Lambda channels of ``1 / (2 * detuning)`` (s/rad)."""
    d = seq.raman_detuning
    return 0.5 / d + 0.5 / (d + params.delta_e)


def raman_calibration(params: SivParameters, seq: SequenceConfig) -> float:
    """(rad/s)^2 per W of peak power for the Raman beam's C coupling."""
    return math.pi * seq.raman_rep_rate / (seq.raman_pi_power * RAMAN_REFERENCE_RATIO * raman_coupling_sum(params, seq))


def raman_peak_rabi(power, params: SivParameters, seq: SequenceConfig):
    tau = amplitude_fwhm("sech", seq.raman_length)
    peak_power = np.asarray(power, dtype=float) / (seq.raman_rep_rate * tau * shape_energy_factor("sech"))
    return np.sqrt(raman_calibration(params, seq) * peak_power)


def raman_oracle_area(power, ratio, params: SivParameters, seq: SequenceConfig):
    """Two-photon area from adiabatic elimination, summed over both Lambda channels."""
    r = _ratio(ratio)
    omega = raman_peak_rabi(power, params, seq)
    tau = amplitude_fwhm("sech", seq.raman_length)
    return omega**2 * r * tau * shape_energy_factor("sech") * raman_coupling_sum(params, seq)


def fit_area_scale(area, population) -> float:
    """Ratio of the observed oscillation rate to the nominal pulse area.

    Fits ``offset + amplitude * sin^2(kappa * area / 2)``; ``kappa = 1``
    means the trace oscillates exactly as the nominal area predicts.
    """
    area = np.asarray(area, dtype=float)
    population = np.asarray(population, dtype=float)
    span = np.ptp(population)

    def residual(v):
        return v[0] + v[1] * np.sin(0.5 * v[2] * area) ** 2 - population

    problem = FitProblem(
        residual,
        [(population.min() - span, population.max()), (0.0, 2.0), (0.2, 3.0)],
        [float(population[0]), float(span), 1.0],
        max_evals=4000,
        tolerance=1e-12,
    )
    res = fit_least_squares(problem, method="gauss-newton", n_starts=4, seed=0)
    return float(res.parameters[2])


def raman_pulse(params: SivParameters, seq: SequenceConfig, peak_rabi: float, ratio, t_center: float) -> PulseEnvelope:
    r = _ratio(ratio)
    return PulseEnvelope(
        PulseShape.SECH,
        amplitude_fwhm("sech", seq.raman_length),
        peak_rabi,
        {Transition.C: 1.0, Transition.D: r, Transition.A: 1.0, Transition.B: r},
        carrier_detuning=-(seq.raman_detuning + 0.5 * params.delta_g),
        reference=Transition.C,
        t_center=t_center,
    )


def _ratio(ratio) -> float:
    if isinstance(ratio, DriveRatio):
        return ratio.r
    return DriveRatio(float(ratio)).r


@dataclass
class RamanShot:
    population: float
    excited_after_pulses: float
    readout_times: np.ndarray
    readout_fluorescence: np.ndarray

    @property
    def readout_peak(self) -> float:
        return float(np.max(self.readout_fluorescence))


def raman_shot(params: SivParameters, seq: SequenceConfig, ratio, peak_rabi: float, ramsey_delay: float | None = None,
               *, tol: float = 1e-9, readout_points: int = 401) -> RamanShot:
    """Pump, one or two Raman pulses, free evolution, readout."""
    diss = dissipators(params)
    pump = _pump_propagator(params, seq.pump_rabi)
    d_frame = pump_frame(params)
    r_frame = raman_frame(params, seq)
    t = seq.pump_duration
    y = pump(thermal_state(params).reshape(-1), t)
    rho = change_frame(y.reshape(4, 4), d_frame, r_frame, t)

    first = t + seq.raman_delay
    centers = [first] if ramsey_delay is None else [first, first + ramsey_delay]
    pulses = [raman_pulse(params, seq, peak_rabi, ratio, c) for c in centers]
    groups = [[pulses[0]]]
    for p in pulses[1:]:
        if p.support[0] < groups[-1][-1].support[1]:
            groups[-1].append(p)
        else:
            groups.append([p])
    excited = 0.0
    if peak_rabi > 0:
        for group in groups:
            start = group[0].support[0]
            end = max(p.support[1] for p in group)
            rho = free_propagate(rho, diss, params, start - t, r_frame)
            gen = Generator(TimeDependentHamiltonian.from_drives(params, group, r_frame), diss)
            y = gen.solve(rho.reshape(-1), start, [end], tol, label="Raman pulse")[-1]
            rho = y.reshape(4, 4)
            t = end
        excited = float(rho[2, 2].real + rho[3, 3].real)
    readout_start = centers[-1] + seq.readout_delay
    rho = free_propagate(rho, diss, params, readout_start - t, r_frame)
    population = float(rho[1, 1].real)

    rho = change_frame(rho, r_frame, d_frame, readout_start)
    times = np.linspace(0.0, seq.readout_duration, readout_points)
    y0 = rho.reshape(-1)
    w = emission_row(params)
    fluorescence = np.array([(w @ pump(y0, s)).real for s in times]) * seq.collection_scale
    return RamanShot(population, excited, times, fluorescence)


def run_raman_rabi(powers, ratio=DriveRatio(), params: SivParameters | None = None, seq: SequenceConfig | None = None,
                   *, tol: float = 1e-9, n_jobs: int = 1) -> ExperimentResult:
    """Upper-ground population at readout versus Raman beam power."""
    params = params or default_parameters()
    seq = seq or SequenceConfig()
    powers = np.asarray(powers, dtype=float)
    omegas = raman_peak_rabi(powers, params, seq)
    shots = sweep_map(lambda om: raman_shot(params, seq, ratio, float(om), tol=tol), omegas, n_jobs)
    population = np.array([s.population for s in shots])
    oracle = raman_oracle_area(powers, ratio, params, seq)
    derived = {
        "ratio": _ratio(ratio),
        "pump_floor": float(raman_shot(params, seq, ratio, 0.0).population),
        "oracle_pi_power_uw": float(seq.raman_pi_power * RAMAN_REFERENCE_RATIO / _ratio(ratio) * 1e6) if _ratio(ratio) > 0 else math.inf,
    }
    extrema = oscillation_extrema(oracle, population)
    maxima = [x for k, x, _ in extrema if k == "max"]
    if maxima:
        derived["first_max_oracle_area_pi"] = maxima[0] / math.pi
    if len(powers) >= 4 and np.ptp(population) > 0:
        derived["oracle_rate_ratio"] = fit_area_scale(oracle, population)
    return ExperimentResult(
        kind="raman-rabi",
        sweep_name="power_uw",
        sweep_values=powers,
        observable_name="population",
        observable=population,
        columns={
            "power_uw": powers * 1e6,
            "oracle_area_rad": oracle,
            "population": population,
            "excited_after_pulse": np.array([s.excited_after_pulses for s in shots]),
            "readout_peak_counts": np.array([s.readout_peak for s in shots]),
        },
        derived=derived,
        extras={"readout_times_s": shots[0].readout_times if shots else None,
                "readout_traces": [s.readout_fluorescence for s in shots]},
    )


def run_raman_ramsey(delays, ratio=DriveRatio(), params: SivParameters | None = None, seq: SequenceConfig | None = None,
                     *, power: float | None = None, tol: float = 1e-9, n_jobs: int = 1) -> ExperimentResult:
    """Population after two identical Raman pulses versus their separation.

    ``power`` defaults to the two-photon pi/2 power of the adiabatic estimate.
    """
    params = params or default_parameters()
    seq = seq or SequenceConfig()
    delays = np.asarray(delays, dtype=float)
    if np.any(delays < 0):
        raise ValidationError("Raman Ramsey delays must be non-negative")
    if seq.raman_span(float(delays.max(initial=0.0))) >= 1.0 / seq.raman_rep_rate:
        raise ValidationError("longest Raman Ramsey delay does not fit into the repetition period")
    if power is None:
        power = 0.5 * seq.raman_pi_power * RAMAN_REFERENCE_RATIO / _ratio(ratio)
    omega = float(raman_peak_rabi(power, params, seq))
    shots = sweep_map(lambda d: raman_shot(params, seq, ratio, omega, float(d), tol=tol), delays, n_jobs)
    population = np.array([s.population for s in shots])
    floor = raman_shot(params, seq, ratio, 0.0).population
    derived = {"ratio": _ratio(ratio), "power_uw": power * 1e6, "pump_floor": float(floor),
               "min_population": float(population.min())}
    # overlapping pulses act as one stronger pulse; keep them out of the fringe fit
    fit_from = RAMAN_FIT_SEPARATION * amplitude_fwhm("sech", seq.raman_length)
    use = delays >= fit_from
    derived["fit_from_delay_ps"] = fit_from * 1e12
    if np.count_nonzero(use) >= 6:
        try:
            fit = fit_damped_sinusoid(delays[use], population[use])
        except FitDiagnosticError as exc:
            raise FitDiagnosticError(f"Raman Ramsey: {exc}") from exc
        derived["fringe_frequency_ghz"] = fit["frequency"] / 1e9
        derived["fringe_amplitude"] = fit["amplitude"]
        derived["envelope_decay_ps"] = fit["tau"] * 1e12 if math.isfinite(fit["tau"]) else None
    return ExperimentResult(
        kind="raman-ramsey",
        sweep_name="delay_ps",
        sweep_values=delays,
        observable_name="population",
        observable=population,
        columns={"delay_ps": delays * 1e12, "population": population},
        derived=derived,
    )


__all__ = [
    "DEFAULT_PUMP_RABI",
    "ExperimentResult",
    "RamanShot",
    "SequenceConfig",
    "SivSimError",
    "fit_pump_rabi",
    "oscillation_extrema",
    "cycle_visibilities",
    "periodic_steady_state",
    "pump_floor",
    "raman_oracle_area",
    "raman_peak_rabi",
    "raman_shot",
    "rabi_period_map",
    "rabi_signal",
    "ramsey_signal",
    "run_pump",
    "run_rabi",
    "run_ramsey_optical",
    "run_raman_rabi",
    "run_raman_ramsey",
    "sweep_map",
]
