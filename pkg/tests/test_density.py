from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
import sympy

from lowlying import density
from lowlying.arith import kloosterman_sum_float
from lowlying.testfn import REFERENCE_WEIGHT, WeightFunction, make_fejer, make_smoothed_bump


def _gamma_oracle(k, X, phi, span=60):
    # t-domain integral of the digamma pair against phi
    L = math.log(X)

    def f(t):
        z = 2j * mp.pi * t / L
        return mp.re(mp.digamma(0.25 + (k + 1) / 4 + z) + mp.digamma(0.25 + (k - 1) / 4 + z)) * phi.phi(float(t))

    return 2 * float(mp.quad(f, np.linspace(0, span, 61).tolist())) / L


@pytest.mark.parametrize("k,X,phi", [(12, 144.0, make_smoothed_bump(0.8)), (40, 1600.0, make_smoothed_bump(1.5))])
def test_gamma_integral_against_time_domain(k, X, phi):
    gi = density.gamma_integral(k, X, phi)
    assert gi.value == pytest.approx(_gamma_oracle(k, X, phi), abs=1e-11)
    assert gi.error_estimate < 1e-12


def test_gamma_surrogate_close_for_large_k():
    phi = make_smoothed_bump(0.8)
    gi = density.gamma_integral(400, 400.0**2, phi)
    assert abs(gi.value - gi.surrogate) < 5 / 400


def test_prime_square_sum_against_sympy():
    phi = make_fejer(1.0)
    X = 1e6
    L = math.log(X)
    ref = math.fsum(2 / p * phi.phihat(2 * math.log(p) / L) * math.log(p) / L for p in sympy.primerange(2, 1001))
    assert density.prime_square_sum(X, phi) == pytest.approx(ref, rel=1e-13)
    with pytest.raises(ValueError):
        density.prime_square_sum(X, phi, limit=10)


def test_density_routes_agree():
    phi = make_smoothed_bump(0.8)
    hecke = density.density_eigenform_route(24, 576.0, phi, prime_power_method="hecke")
    newton = density.density_eigenform_route(24, 576.0, phi, prime_power_method="newton", geometric=False)
    assert hecke.prime_power_term == pytest.approx(newton.prime_power_term, abs=1e-25)
    assert hecke.prime_term_geometric == pytest.approx(hecke.prime_term, abs=1e-10)
    assert hecke.total == pytest.approx(hecke.gamma_term + hecke.pi_term + hecke.prime_square_term
                                        + hecke.prime_term + hecke.prime_power_term)
    assert hecke.omega_total == pytest.approx(1.0, abs=1e-3)


def test_density_empty_space_and_validation():
    rep = density.density_eigenform_route(14, 196.0, make_smoothed_bump(0.8))
    assert rep.total == 0 and rep.tail_bounds["note"] == "empty space"
    with pytest.raises(ValueError):
        density.density_eigenform_route(12, 144.0, make_smoothed_bump(0.8), prime_power_method="other")


def test_density_report_json():
    rep = density.density_eigenform_route(12, 144.0, make_smoothed_bump(0.8), geometric=False)
    assert '"route": "eigenform"' in rep.to_json()


def test_poisson_sums_match_models():
    # the steep reference bump is pre-asymptotic at K = 50
    for K, tol in ((50, 5e-3), (100, 1e-5), (200, 1e-7), (400, 1e-10)):
        s = density.h_poisson_sums(K, REFERENCE_WEIGHT)
        assert abs(s.H_plus - s.H_model) < tol
        assert abs(s.H_minus - s.H_model) < tol
        assert abs(s.log_plus - s.log_model) < 1e3 * tol
        assert abs(s.log_minus - s.log_model) < 1e3 * tol
    with pytest.raises(ValueError):
        density.h_poisson_sums(1, REFERENCE_WEIGHT)


def test_kloosterman_prime_sum_against_brute_force():
    K, h, phi = 12.0, REFERENCE_WEIGHT, make_smoothed_bump(1.4)
    L2 = 2 * math.log(K)
    top = K ** 2.8
    total = []
    for p in sympy.primerange(2, int(top) + 1):
        w = math.log(p) / math.sqrt(p) * phi.phihat(math.log(p) / L2)
        for c in range(1, int(4 * math.pi * math.sqrt(p) / K) + 1):
            hv = h(4 * math.pi * math.sqrt(p) / (c * K))
            if hv:
                total.append(w * kloosterman_sum_float(p, 1, c) / c * hv)
    value, pairs, _ = density.kloosterman_prime_sum(K, h, phi)
    assert value == pytest.approx(math.fsum(total), abs=1e-12)
    assert pairs > 0


def test_averaged_density_signs_and_budget():
    h, phi = REFERENCE_WEIGHT, make_smoothed_bump(1.4)
    plus = density.averaged_density_kloosterman(30.0, "+", h, phi)
    minus = density.averaged_density_kloosterman(30.0, "-", h, phi)
    mixed = density.averaged_density_kloosterman(30.0, "mixed", h, phi)
    assert plus.H_pm * plus.breakdown["kloosterman_term"] == pytest.approx(
        -minus.H_pm * minus.breakdown["kloosterman_term"], rel=1e-12)
    assert mixed.breakdown["s_cancellation_residual"] < 1e-6
    with pytest.raises(ValueError):
        density.averaged_density_kloosterman(30.0, "x", h, phi)
    with pytest.raises(ValueError):
        density.averaged_density_kloosterman(30.0, "+", h, make_smoothed_bump(2.0))
    with pytest.raises(density.BudgetExceeded):
        density.averaged_density_kloosterman(1000.0, "+", h, phi, budget=10**6)


def test_averaged_density_linear_in_amplitude():
    h = REFERENCE_WEIGHT
    a = density.averaged_density_kloosterman(30.0, "+", h, make_smoothed_bump(1.4))
    b = density.averaged_density_kloosterman(30.0, "+", h, make_smoothed_bump(1.4, amplitude=2.0))
    assert b.value == pytest.approx(2 * a.value, rel=1e-12)
    zero = WeightFunction(scale=0)
    assert zero.integral == 0
