import numpy as np
import pytest
from sklearn.base import clone

from sivsim.estimators import (
    OpticalRamseyExperiment,
    PumpExperiment,
    RabiExperiment,
    RamanRabiExperiment,
    RamanRamseyExperiment,
)
from sivsim.exceptions import ValidationError
from sivsim.sequences import run_raman_rabi


def test_get_params_and_clone():
    est = RabiExperiment(transition="B", tol=1e-8)
    assert est.get_params()["transition"] == "B"
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    twin.set_params(transition="C")
    assert est.transition == "B"


def test_rabi_predict_matches_runner():
    x = np.array([0.0, 0.5e-6, 2e-6])
    est = RabiExperiment().fit(x)
    np.testing.assert_array_equal(est.predict(x.reshape(-1, 1)), est.result_.observable)
    assert est.transform(x).shape == (3, 1)


def test_sweep_must_be_one_column():
    with pytest.raises(ValidationError):
        RabiExperiment().predict(np.ones((3, 2)))


def test_ramsey_estimator_reports_t2():
    est = OpticalRamseyExperiment().fit(np.linspace(50e-12, 1500e-12, 20))
    assert est.derived()["t2_star_ps"] == pytest.approx(578, rel=0.05)


def test_pump_estimator_needs_even_grid():
    t = np.linspace(0, 200e-9, 11)
    assert PumpExperiment().predict(t)[0] == pytest.approx(0.3868, abs=1e-4)
    with pytest.raises(ValidationError):
        PumpExperiment().predict(np.array([0.0, 1e-9, 5e-9]))


def test_raman_rabi_fit_recovers_ratio():
    powers = np.linspace(0, 4e-6, 9)
    y = run_raman_rabi(powers, 0.7).observable
    est = RamanRabiExperiment(ratio=0.5, fit_ratio=True).fit(powers, y)
    assert est.ratio_ == pytest.approx(0.7, rel=0.02)
    assert est.score(powers, y) > 0.999


def test_raman_ramsey_estimator():
    d = np.linspace(0, 60e-12, 13)
    pop = RamanRamseyExperiment().predict(d)
    assert pop.shape == d.shape
    assert np.all(pop > 0.2)
