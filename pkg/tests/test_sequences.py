import math

import numpy as np
import pytest

from sivsim.engine import Generator, RotatingFrame, TimeDependentHamiltonian, change_frame, free_propagate
from sivsim.exceptions import ValidationError
from sivsim.model import Transition, default_parameters, dissipators, thermal_state, transition_frequency
from sivsim.sequences import (
    ExperimentResult,
    SequenceConfig,
    cycle_visibilities,
    fit_pump_rabi,
    one_photon_pulse,
    oscillation_extrema,
    periodic_steady_state,
    pump_floor,
    pump_frame,
    raman_frame,
    raman_peak_rabi,
    raman_pulse,
    raman_shot,
    ramsey_signal,
    run_pump,
    run_rabi,
    run_raman_rabi,
    run_raman_ramsey,
    run_ramsey_optical,
    sweep_map,
    _pump_propagator,
)

P = default_parameters()
S = SequenceConfig()


def test_zero_power_gives_no_emission():
    res = run_rabi("C", [0.0, S.rabi_pi_power_c])
    assert res.observable[0] == pytest.approx(0.0, abs=1e-12)
    assert res.observable[1] > 0.1


def test_background_slope_adds_linearly():
    seq = S.replace(background_slope=1e4)
    a = run_rabi("C", [0.0, 1e-6], seq=seq).observable
    b = run_rabi("C", [0.0, 1e-6]).observable
    np.testing.assert_allclose(a - b, [0.0, 1e-2], atol=1e-12)


@pytest.mark.parametrize("tr", ["B", "C"])
def test_pi_pulse_inverts_without_decay(tr):
    p = P.without_dissipation()
    t = Transition.coerce(tr)
    pulse = one_photon_pulse(S, t, math.pi)
    frame = RotatingFrame(transition_frequency(p, t))
    gen = Generator(TimeDependentHamiltonian.from_drives(p, [pulse], frame), [])
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[t.ground, t.ground] = 1.0
    y = gen.solve(rho0.reshape(-1), 0.0, [pulse.support[1]], 1e-11)[-1].reshape(4, 4)
    assert y[t.excited, t.excited].real == pytest.approx(1.0, abs=1e-6)


def test_one_photon_transition_validated():
    with pytest.raises(ValidationError):
        run_rabi("D", [1e-6])


def test_steady_state_iteration():
    m = np.array([[0.9, 0.3], [0.1, 0.7]])
    p = periodic_steady_state(m, np.array([1.0, 0.0]))
    np.testing.assert_allclose(p, [0.75, 0.25], atol=1e-11)


def test_extrema_and_cycle_visibility():
    x = np.linspace(0.1, 4.2 * np.pi, 400)
    y = 0.55 - 0.45 * np.cos(x)
    ext = oscillation_extrema(x, y)
    assert [k for k, _, _ in ext] == ["max", "min", "max", "min"]
    np.testing.assert_allclose([v for _, v, _ in ext], np.pi * np.arange(1, 5), rtol=1e-4)
    np.testing.assert_allclose(cycle_visibilities(ext), 0.9 / 1.1, rtol=1e-4)


def test_ramsey_short_delay_is_near_pi_pulse():
    p1 = ramsey_signal(P, S, "C", 24e-12, 0.0)
    single = run_rabi("C", [S.rabi_pi_power_c], steady_state=False).observable[0]
    assert p1 == pytest.approx(single, rel=0.03)
    assert p1 > ramsey_signal(P, S, "C", 200e-12, 0.0)


def test_ramsey_delay_must_exceed_pulse_width():
    with pytest.raises(ValidationError):
        run_ramsey_optical("C", [1e-12, 100e-12])


def test_ramsey_t2_for_c():
    res = run_ramsey_optical("C", np.linspace(50e-12, 1500e-12, 30))
    assert res.derived["t2_star_ps"] == pytest.approx(578, rel=0.05)
    assert list(res.columns) == ["delay_ps", "upper_counts", "lower_counts", "visibility"]


def test_ramsey_linewidth_for_b():
    res = run_ramsey_optical("B", np.linspace(50e-12, 1000e-12, 30))
    assert res.derived["linewidth_mhz"] == pytest.approx(570, rel=0.05)
    assert res.derived["linewidth_mhz"] == pytest.approx(574, rel=0.05)


def test_pump_off_keeps_thermal_population():
    res = run_pump(seq=S.replace(pump_rabi=0.0))
    np.testing.assert_allclose(res.observable, 0.38681329396084957, atol=1e-9)


def test_pump_without_thermalization_empties_upper_ground():
    p = P.replace(gamma_g_up=0.0, gamma_g_down=0.0)
    assert run_pump(p, S, duration=3e-6).derived["floor_population"] < 1e-12


def test_fitted_pump_floor():
    rabi = fit_pump_rabi(target=0.22)
    assert pump_floor(P, S, rabi) == pytest.approx(0.22, abs=1e-6)
    res = run_pump(seq=S.replace(pump_rabi=rabi))
    assert res.derived["monotone"]
    assert res.derived["floor_population"] == pytest.approx(0.22, abs=0.02)


def test_default_pump_rabi_is_the_fitted_value():
    assert S.pump_rabi == pytest.approx(fit_pump_rabi(), rel=1e-5)


def test_raman_zero_power_gives_relaxed_pump_floor():
    res = run_raman_rabi([0.0, 1e-6])
    # pumped state relaxing freely until the readout starts
    y = _pump_propagator(P, S.pump_rabi)(thermal_state(P).reshape(-1), S.pump_duration).reshape(4, 4)
    rho = free_propagate(y, dissipators(P), P, S.raman_delay + S.readout_delay, pump_frame(P))
    assert res.observable[0] == pytest.approx(rho[1, 1].real, abs=1e-10)
    assert res.observable[0] == pytest.approx(0.22, abs=0.02)
    assert res.observable[1] > res.observable[0]


def test_raman_ramsey_zero_delay_is_one_pulse_of_double_amplitude():
    om = float(raman_peak_rabi(1e-6, P, S))
    assert raman_shot(P, S, 0.7, om, 0.0).population == pytest.approx(raman_shot(P, S, 0.7, 2 * om).population, abs=1e-9)


def test_raman_loss_is_not_ground_decoherence():
    """Across the Raman window, removing ground relaxation barely changes the transfer."""
    om = float(raman_peak_rabi(4e-6, P, S))
    rframe = raman_frame(P, S)
    y = _pump_propagator(P, S.pump_rabi)(thermal_state(P).reshape(-1), S.pump_duration).reshape(4, 4)
    start = change_frame(y, pump_frame(P), rframe, S.pump_duration)
    pulse = raman_pulse(P, S, om, 0.7, S.pump_duration + S.raman_delay)
    out = {}
    for name, p in (("full", P), ("no_ground", P.replace(gamma_g_up=0.0, gamma_g_down=0.0))):
        rho = free_propagate(start, dissipators(p), p, pulse.support[0] - S.pump_duration, rframe)
        gen = Generator(TimeDependentHamiltonian.from_drives(p, [pulse], rframe), dissipators(p))
        rho = gen.solve(rho.reshape(-1), pulse.support[0], [pulse.support[1]], 1e-9)[-1].reshape(4, 4)
        out[name] = rho
    excited = out["full"][2, 2].real + out["full"][3, 3].real
    ground_effect = abs(out["full"][1, 1] - out["no_ground"][1, 1])
    assert excited > 1e-3
    assert ground_effect < 0.1 * excited


def test_raman_ramsey_fringe_frequency():
    res = run_raman_ramsey(np.linspace(0, 120e-12, 121))
    assert res.derived["fringe_frequency_ghz"] == pytest.approx(48.0, rel=0.01)
    assert res.derived["min_population"] > res.derived["pump_floor"]


def test_raman_ramsey_delay_must_fit_period():
    with pytest.raises(ValidationError):
        run_raman_ramsey([0.0, 1e-6])


def test_sequence_config_validation():
    with pytest.raises(ValidationError):
        SequenceConfig(raman_rep_rate=5e6)
    with pytest.raises(ValidationError):
        SequenceConfig(rep_rate=0.0)


def test_sweep_map_is_ordered():
    vals = list(range(20))
    assert sweep_map(lambda v: v * v, vals, n_jobs=4) == [v * v for v in vals]


def test_parallel_sweep_matches_serial():
    powers = np.linspace(0, 4e-6, 5)
    a = run_raman_rabi(powers, n_jobs=1).observable
    b = run_raman_rabi(powers, n_jobs=3).observable
    np.testing.assert_array_equal(a, b)


def test_result_column_lengths_checked():
    with pytest.raises(ValidationError):
        ExperimentResult("x", "a", [1, 2], "b", [1, 2], columns={"a": [1]})


def test_collection_scale_is_linear_and_keeps_extrema():
    x = np.linspace(0, 3e-6, 13)
    base = run_rabi("C", x)
    scaled = run_rabi("C", x, seq=S.replace(collection_scale=2.0, background_slope=5e3))
    np.testing.assert_array_equal(run_rabi("C", x, seq=S.replace(collection_scale=2.0)).observable, 2 * base.observable)
    assert np.argmax(scaled.observable) == np.argmax(base.observable)


def test_ramsey_visibility_never_exceeds_short_delay_value():
    vis = run_ramsey_optical("C", np.linspace(30e-12, 1500e-12, 25)).columns["visibility"]
    assert np.all(vis[1:] <= vis[0])


def test_raman_fringe_frequency_independent_of_power():
    d = np.linspace(0, 60e-12, 61)
    f = [run_raman_ramsey(d, power=pw).derived["fringe_frequency_ghz"] for pw in (0.5e-6, 1.5e-6)]
    assert f[0] == pytest.approx(48.0, rel=1e-3)
    assert f[0] == pytest.approx(f[1], rel=0.01)
