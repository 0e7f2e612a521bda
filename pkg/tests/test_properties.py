import json
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from sivsim import config as cfgmod
from sivsim.engine import Generator, RotatingFrame, TimeDependentHamiltonian, change_frame
from sivsim.fitting import extract_visibility
from sivsim.model import TWO_PI, Transition, default_parameters, dissipators, transition_frequency
from sivsim.pulses import PulseEnvelope, power_to_area

P = default_parameters()
SLOW = settings(max_examples=15, deadline=None)
FAST = settings(max_examples=60, deadline=None)


@st.composite
def density_matrices(draw):
    re = draw(st.lists(st.floats(-1, 1), min_size=16, max_size=16))
    im = draw(st.lists(st.floats(-1, 1), min_size=16, max_size=16))
    a = (np.array(re) + 1j * np.array(im)).reshape(4, 4)
    rho = a @ a.conj().T + 1e-3 * np.eye(4)
    return rho / np.trace(rho).real


@SLOW
@given(
    rho=density_matrices(),
    tr=st.sampled_from(["B", "C"]),
    area=st.floats(0.0, 4 * math.pi),
    shape=st.sampled_from(["sech", "double_exp", "square"]),
)
def test_evolution_keeps_trace_and_positivity(rho, tr, area, shape):
    t = Transition.coerce(tr)
    peak = area / 12e-12
    pulse = PulseEnvelope(shape, 12e-12, peak, {t: 1.0}, reference=t, t_center=0.0)
    frame = RotatingFrame(transition_frequency(P, t))
    gen = Generator(TimeDependentHamiltonian.from_drives(P, [pulse], frame), dissipators(P))
    lo, hi = pulse.support
    out = gen.solve(rho.reshape(-1), lo, [hi + 50e-12], 1e-9)[-1].reshape(4, 4)
    assert abs(np.trace(out) - 1.0) <= 1e-9
    assert np.linalg.eigvalsh(0.5 * (out + out.conj().T)).min() >= -1e-8


@FAST
@given(rho=density_matrices(), f1=st.floats(1e12, 1e15), f2=st.floats(1e12, 1e15), t=st.floats(0, 1e-6))
def test_frame_change_preserves_populations(rho, f1, f2, t):
    out = change_frame(rho, RotatingFrame(f1), RotatingFrame(f2), t)
    np.testing.assert_allclose(np.diag(out).real, np.diag(rho).real, atol=1e-14)
    np.testing.assert_allclose(np.abs(out), np.abs(rho), atol=1e-14)


@FAST
@given(p=st.floats(1e-12, 1e-3), k=st.floats(1.01, 100.0))
def test_power_to_area_scales_as_sqrt(p, k):
    args = (80e6, "double_exp", 24e-12, 1e20)
    a1, a2 = power_to_area(p, *args), power_to_area(k * p, *args)
    assert a2 > a1
    assert math.isclose(a2 / a1, math.sqrt(k), rel_tol=1e-12)


@FAST
@given(
    upper=st.lists(st.floats(0, 1e6), min_size=1, max_size=20),
    lower=st.lists(st.floats(0, 1e6), min_size=1, max_size=20),
)
def test_visibility_is_bounded(upper, lower):
    n = min(len(upper), len(lower))
    u, lo = np.array(upper[:n]), np.array(lower[:n])
    keep = (u + lo) > 0
    if not keep.any():
        return
    v = extract_visibility(u[keep], lo[keep])
    assert np.all(np.abs(v) <= 1.0)


@FAST
@given(
    dg=st.floats(20.0, 80.0),
    temp=st.floats(1.0, 20.0),
    seed=st.integers(0, 2**31 - 1),
    tol=st.floats(1e-12, 1e-6),
)
def test_resolved_config_round_trips_through_json(dg, temp, seed, tol):
    resolved = cfgmod.resolve({"delta_g_ghz": dg, "temperature_k": temp, "seed": seed, "tol": tol})
    again = cfgmod.resolve(json.loads(cfgmod.canonical_json(resolved)))
    assert again == resolved
    assert cfgmod.config_hash(again) == cfgmod.config_hash(resolved)
