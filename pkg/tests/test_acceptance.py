"""Acceptance gate: one test per criterion, each with its own runtime limit.

A summary line per criterion is printed at the end of the session.
"""

import math
import time

import numpy as np
import pytest
from scipy.constants import h as PLANCK, k as BOLTZMANN

from sivsim.cli import main
from sivsim.engine import Generator, RotatingFrame, TimeDependentHamiltonian, dopri5, free_propagate
from sivsim.estimators import fit_drive_ratio
from sivsim.fitting import fit_exponential_decay
from sivsim.model import Transition, basis_state, default_parameters, dissipators, thermal_state, transition_frequency
from sivsim.pulses import DriveRatio, PulseEnvelope, amplitude_fwhm, area_to_power, peak_rabi_for_area
from sivsim.sequences import (
    SequenceConfig,
    fit_pump_rabi,
    rabi_calibration,
    raman_calibration,
    raman_coupling_sum,
    run_pump,
    run_rabi,
    run_raman_rabi,
    run_raman_ramsey,
    run_ramsey_optical,
)

pytestmark = pytest.mark.slow

P = default_parameters()
S = SequenceConfig()


class Clock:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _timed(clock, criterion, detail):
    criterion["detail"] = f"{detail} [{clock.elapsed:.1f} s, limit {clock.limit:.0f} s]"


def test_criterion_1_physics_oracles(criterion):
    worst_rabi = worst_trace = 0.0
    floor = math.inf
    with Clock(10) as clock:
        p0 = P.without_dissipation()
        for tr in (Transition.B, Transition.C):
            frame = RotatingFrame(transition_frequency(p0, tr))
            for area in (math.pi / 2, math.pi, 1.5 * math.pi, 2 * math.pi, 5 * math.pi):
                om = peak_rabi_for_area("sech", 10e-12, area)
                pulse = PulseEnvelope("sech", 10e-12, om, {tr: 1.0}, reference=tr)
                gen = Generator(TimeDependentHamiltonian.from_drives(p0, [pulse], frame), [])
                y0 = basis_state(tr.ground).reshape(-1)
                y = gen.solve(y0, pulse.support[0], [pulse.support[1]], 1e-12)[-1].reshape(4, 4)
                worst_rabi = max(worst_rabi, abs(y[tr.excited, tr.excited].real - math.sin(area / 2) ** 2))
        # golden runs with dissipation: raw stepper output, before any renormalization
        for tr, area in ((Transition.C, math.pi), (Transition.B, 3 * math.pi), (Transition.C, 10 * math.pi)):
            frame = RotatingFrame(transition_frequency(P, tr))
            pulse = PulseEnvelope("double_exp", 24e-12, peak_rabi_for_area("double_exp", 24e-12, area), {tr: 1.0},
                                  reference=tr)
            gen = Generator(TimeDependentHamiltonian.from_drives(P, [pulse], frame), dissipators(P))
            _, ys = dopri5(gen, thermal_state(P).reshape(-1, 1).astype(complex), pulse.support[0], pulse.support[1] + 1e-9,
                           tol=1e-9)
            for y in ys:
                rho = y[:, 0].reshape(4, 4)
                worst_trace = max(worst_trace, abs(np.trace(rho).real - 1.0))
                floor = min(floor, np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    _timed(clock, criterion, f"rabi err {worst_rabi:.1e}, trace drift {worst_trace:.1e}, eig floor {floor:.1e}")
    assert worst_rabi <= 1e-6
    assert worst_trace <= 1e-9
    assert floor >= -1e-8
    assert clock.elapsed < clock.limit


def test_criterion_2_thermalization(criterion):
    with Clock(10) as clock:
        target = math.exp(-PLANCK * 48e9 / (BOLTZMANN * 5.0))
        rho = free_propagate(basis_state(0), dissipators(P), P, 10 * 35e-9)
        ratio = rho[1, 1].real / rho[0, 0].real
        eq = thermal_state(P)[1, 1].real
        t = np.linspace(1e-9, 150e-9, 60)
        dev = np.array([eq - free_propagate(basis_state(0), dissipators(P), P, ti)[1, 1].real for ti in t])
        _, tau = fit_exponential_decay(t, dev)
    _timed(clock, criterion, f"p2/p1 {ratio:.6f} (target {target:.6f}), tau {tau * 1e9:.3f} ns")
    assert ratio == pytest.approx(target, abs=1e-4)
    assert tau == pytest.approx(35e-9, rel=0.01)
    assert clock.elapsed < clock.limit


@pytest.mark.parametrize("tr, top, n", [("C", 10, 106), ("B", 6, 66)])
def test_criterion_3_one_photon_rabi(criterion, tr, top, n):
    with Clock(60) as clock:
        areas = np.linspace(0, (top + 0.5) * math.pi, n)
        tau = amplitude_fwhm("double_exp", S.one_photon_length)
        powers = area_to_power(areas, S.rep_rate, "double_exp", tau, rabi_calibration(S, tr))
        d = run_rabi(tr, np.asarray(powers)).derived
    ext = np.array(d["extrema_area_pi"])
    nearest = np.round(ext)
    err = float(np.max(np.abs(ext - nearest) / nearest))
    vis = d["visibility_min"]
    _timed(clock, criterion, f"{tr}: min cycle visibility {vis:.3f}, extrema reach {ext[-1]:.2f} pi, max extremum error {err:.2%}")
    assert nearest[-1] >= top
    assert vis > 0.9
    assert err <= 0.02
    assert clock.elapsed < clock.limit


def test_criterion_4_optical_ramsey(criterion):
    with Clock(120) as clock:
        c = run_ramsey_optical("C", np.linspace(50e-12, 1500e-12, 30)).derived
        b = run_ramsey_optical("B", np.linspace(50e-12, 1000e-12, 30)).derived
    _timed(clock, criterion, (f"T2* C {c['t2_star_ps']:.1f} ps, B {b['t2_star_ps']:.1f} ps; "
                           f"linewidth C {c['linewidth_mhz']:.1f} MHz, B {b['linewidth_mhz']:.1f} MHz"))
    assert c["t2_star_ps"] == pytest.approx(578, rel=0.05)
    assert b["t2_star_ps"] == pytest.approx(279, rel=0.05)
    assert c["linewidth_mhz"] == pytest.approx(275, rel=0.05)
    assert b["linewidth_mhz"] == pytest.approx(570, rel=0.05)
    assert c["linewidth_mhz"] == pytest.approx(270, rel=0.03)
    assert b["linewidth_mhz"] == pytest.approx(574, rel=0.03)
    assert clock.elapsed < clock.limit


def test_criterion_5_pumping(criterion):
    with Clock(30) as clock:
        rabi = fit_pump_rabi(target=0.22)
        d = run_pump(seq=S.replace(pump_rabi=rabi)).derived
    _timed(clock, criterion, f"floor {d['floor_population']:.4f}, monotone {d['monotone']}")
    assert d["floor_population"] == pytest.approx(0.22, abs=0.02)
    assert d["monotone"]
    assert clock.elapsed < clock.limit


def test_criterion_6_raman_rabi(criterion):
    with Clock(300) as clock:
        r = DriveRatio(0.7)
        oracle = np.linspace(0, 2 * math.pi, 33)
        powers = oracle * S.raman_rep_rate / (raman_calibration(P, S) * r.r * raman_coupling_sum(P, S))
        d = run_raman_rabi(powers, r).derived
        synth_powers = np.linspace(0, 4e-6, 17)
        synth = run_raman_rabi(synth_powers, r).observable
        fitted = fit_drive_ratio(synth_powers, synth, initial=0.5)
    kappa = d["oracle_rate_ratio"]
    _timed(clock, criterion, (f"rate / oracle {kappa:.3f}, first max at {d.get('first_max_oracle_area_pi', float('nan')):.2f} pi "
                           f"(oracle), fitted ratio {fitted:.4f}"))
    assert fitted == pytest.approx(0.7, rel=0.02)
    assert kappa == pytest.approx(1.0, abs=0.05)
    assert clock.elapsed < clock.limit


def test_criterion_7_raman_ramsey(criterion):
    with Clock(300) as clock:
        d = run_raman_ramsey(np.linspace(0, 120e-12, 121)).derived
    _timed(clock, criterion, f"fringe {d['fringe_frequency_ghz']:.3f} GHz, min population {d['min_population']:.4f}")
    assert d["fringe_frequency_ghz"] == pytest.approx(48.0, rel=0.01)
    assert d["min_population"] > 0.22
    assert clock.elapsed < clock.limit


def test_criterion_8_determinism(criterion, tmp_path):
    outputs = {}
    for run in ("a", "b"):
        for argv in (["rabi", "--transition", "B", "--sweep", "0:3pi:13"],
                     ["raman-ramsey", "--sweep", "0:40:21"],
                     ["fit", "--target", "raman-rabi", "--param", "ratio"]):
            out = tmp_path / run / argv[0]
            assert main(argv + ["--seed", "7", "--out", str(out)]) == 0
            for f in sorted(out.glob("*")):
                if f.suffix in (".csv", ".json") and f.name != "resolved_config.json":
                    outputs.setdefault(f"{argv[0]}/{f.name}", []).append(f.read_bytes())
    differing = [k for k, v in outputs.items() if v[0] != v[1]]
    criterion["detail"] = f"{len(outputs)} files compared, {len(differing)} differ"
    assert not differing
