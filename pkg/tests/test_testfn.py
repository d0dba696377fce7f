from __future__ import annotations

import json
import math

import mpmath as mp
import numpy as np
import pytest

from lowlying import testfn
from lowlying.testfn import REFERENCE_WEIGHT, WeightFunction, make_fejer, make_smoothed_bump


def _h0(t):
    return mp.exp(-1 / (1 - (2 * t - 3) ** 2)) if 1 < t < 2 else mp.mpf(0)


def test_reference_weight_integrals_match_mpmath():
    assert REFERENCE_WEIGHT.integral == pytest.approx(float(mp.quad(_h0, [1, 1.5, 2])), rel=1e-13)
    assert REFERENCE_WEIGHT.log_integral == pytest.approx(
        float(mp.quad(lambda t: _h0(t) * mp.log(t), [1, 1.5, 2])), rel=1e-13)
    assert REFERENCE_WEIGHT.negative_moment(3) == pytest.approx(
        float(mp.quad(lambda t: _h0(t) / t**3, [1, 1.5, 2])), rel=1e-13)


def test_weight_derivatives_by_finite_differences():
    t, eps = 1.37, 1e-5
    for order in (1, 2, 3):
        fd = (REFERENCE_WEIGHT.derivative(t + eps, order - 1) - REFERENCE_WEIGHT.derivative(t - eps, order - 1)) / (2 * eps)
        assert REFERENCE_WEIGHT.derivative(t, order) == pytest.approx(fd, rel=1e-6)


def test_weight_validation_and_zero():
    with pytest.raises(ValueError):
        WeightFunction((2.0, 1.0))
    with pytest.raises(ValueError):
        WeightFunction(scale=-1)
    zero = WeightFunction(scale=0)
    assert zero.integral == 0
    with pytest.raises(ZeroDivisionError):
        zero.log_mean


def test_mellin_h_matches_quadrature():
    s = 0.3 + 0.7j
    ref = complex(mp.quad(lambda t: t ** (s - 1) * mp.log(t) * _h0(t), [1, 1.5, 2]))
    assert abs(testfn.mellin_h(REFERENCE_WEIGHT, s, deriv=1) - ref) < 1e-13
    assert testfn.mellin_h(REFERENCE_WEIGHT, 1.0) == pytest.approx(REFERENCE_WEIGHT.integral, rel=1e-14)


def test_fejer_closed_forms():
    phi = make_fejer(1.5)
    assert phi.phihat0 == 1
    assert phi.phi0 == pytest.approx(1.5)
    assert phi.phihat(2.0) == 0
    assert phi.phihat_integral(-1, 1) == pytest.approx(2 - 1 / 1.5)
    with pytest.raises(ValueError):
        phi.phihat(0.0, order=1)
    assert not phi.schwartz


def test_bump_is_normalised_and_fourier_pair():
    phi = make_smoothed_bump(1.4)
    assert phi.schwartz
    assert phi.phihat0 == pytest.approx(1.0, rel=1e-13)
    # phi(0) is the integral of phihat
    assert phi.phi0 == pytest.approx(phi.phihat_integral(-2, 2), rel=1e-12)
    # phihat(xi) is the integral of phi(x) cos(2 pi x xi)
    x = np.linspace(0, 40, 40001)
    w = np.full_like(x, x[1] - x[0])
    w[0] = w[-1] = w[0] / 2
    for xi in (0.2, 0.9):
        ft = 2 * np.sum(w * phi.phi(x) * np.cos(2 * np.pi * x * xi))
        assert ft == pytest.approx(phi.phihat(xi), abs=1e-9)
    assert phi.phihat(1.41) == 0


def test_bump_phihat_derivatives_by_finite_differences():
    phi = make_smoothed_bump(1.4)
    eps = 1e-5
    for xi in (0.0, 0.3, 1.1):
        for order in (1, 2):
            fd = (phi.phihat(xi + eps, order - 1) - phi.phihat(xi - eps, order - 1)) / (2 * eps)
            assert phi.phihat(xi, order) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_bump_phi_decays_at_large_x():
    phi = make_smoothed_bump(1.4)
    vals = phi.phi(np.array([100.0, 320.0, 1000.0, 5000.0]))
    assert np.all(vals >= 0)
    assert np.all(vals < 1e-20)


def test_amplitude_is_linear():
    a, b = make_smoothed_bump(0.8), make_smoothed_bump(0.8, amplitude=2.5)
    assert b.phihat(0.3) == pytest.approx(2.5 * a.phihat(0.3), rel=1e-14)
    assert b.phi(1.7) == pytest.approx(2.5 * a.phi(1.7), rel=1e-14)


def test_ks_prediction_for_fejer_closed_form():
    s = 1.5
    phi = make_fejer(s)
    eta_int = 2 - 1 / s
    assert testfn.ks_prediction(phi, "+") == pytest.approx(1 + eta_int / 2)
    assert testfn.ks_prediction(phi, "-") == pytest.approx(1 - eta_int / 2 + s)
    assert testfn.ks_prediction(phi, "mixed") == pytest.approx(1 + s / 2)
    with pytest.raises(ValueError):
        testfn.ks_prediction(phi, "x")


def test_eta_values():
    assert testfn.eta(0.2) == 1 and testfn.eta(1.0) == 0.5 and testfn.eta(-3) == 0


def test_config_loading(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"test_function": {"family": "fejer", "sigma": 0.5},
                                "weight": {"support": [1, 3], "scale": 2}}))
    phi, h = testfn.load_functions(path)
    assert phi == make_fejer(0.5)
    assert h == WeightFunction((1.0, 3.0), 2.0)
    with pytest.raises(ValueError):
        testfn.test_function_from_config({"sigma": 1, "bogus": 2})
    with pytest.raises(ValueError):
        testfn.make_test_function("gauss", 1.0)
