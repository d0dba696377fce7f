from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
import sympy
from scipy.integrate import quad

from lowlying import expansion as ex
from lowlying.testfn import REFERENCE_WEIGHT, WeightFunction, make_fejer, make_smoothed_bump


@pytest.fixture(scope="module")
def coeffs():
    return ex.expansion_coefficients(REFERENCE_WEIGHT, 3)


def test_z_against_direct_sums():
    z1, err1 = ex.Z_of_s(1.0)
    assert isinstance(z1, float) and err1 < 1e-9
    # the Dirichlet series tail beyond 10^6 is about 1 / 10^6
    assert z1 == pytest.approx(ex.z_direct_sum(1.0, 10**6), abs=3e-6)
    z2, _ = ex.Z_of_s(2.0)
    assert z2 == pytest.approx(ex.z_direct_sum(2.0, 10**6), abs=1e-11)


def test_z_residue_and_domain():
    Z = ex.euler_product_z()
    assert Z.s_times_z(0) == 1
    assert abs(Z.s_times_z(1e-6) - 1) < 1e-5
    with pytest.raises(ZeroDivisionError):
        Z(0)
    with pytest.raises(ValueError):
        Z(-0.5)
    with pytest.raises(ValueError):
        ex.EulerProductZ(10)


def test_z_conjugate_symmetry():
    Z = ex.euler_product_z()
    a, _ = Z(0.2 + 0.1j)
    b, _ = Z(0.2 - 0.1j)
    assert b == pytest.approx(a.conjugate(), abs=1e-15)


def test_taylor_coefficients_of_known_function():
    derivs, err = ex.taylor_coefficients(lambda s: np.exp(2 * s), 4)
    assert derivs == pytest.approx([2.0**n for n in range(5)], rel=1e-12)
    with pytest.raises(ValueError):
        ex.taylor_coefficients(np.exp, 2, max_nodes=1000)


def test_C_surrogate_closed_form():
    # F(s) = c (4 pi)^{s-1} has F'(0) = c log(4 pi) / (4 pi) and F''(0) = c log(4 pi)^2 / (4 pi)
    c = 4.0
    C, err = ex.C_coefficients(REFERENCE_WEIGHT, 2, F=lambda s: c * np.exp((s - 1) * math.log(4 * math.pi)))
    lg = math.log(4 * math.pi)
    assert C[0] == pytest.approx(c * lg / (4 * math.pi), rel=1e-13)
    assert C[1] == pytest.approx(-c * lg**2 / (2 * 4 * math.pi), rel=1e-13)
    with pytest.raises(ValueError):
        ex.C_coefficients(REFERENCE_WEIGHT, 0)


def test_C_stable_under_node_doubling(coeffs):
    F = ex._default_F(REFERENCE_WEIGHT, ex.EULER_CUTOFF)
    a, _ = ex.taylor_coefficients(F, 3, nodes=64)
    b, _ = ex.taylor_coefficients(F, 3, nodes=128)
    assert np.max(np.abs(a - b)) < 1e-11
    assert coeffs.error_bars["C"][0] < 1e-10


def test_S1_two_routes(coeffs):
    assert coeffs.S[0] == pytest.approx(ex.S1_closed_form(REFERENCE_WEIGHT), abs=1e-6)


def test_mertens_constant_from_theta():
    val = ex.theta_kernel_integral({0: 1.0}, 1e7)
    # tail bar is heuristic; the truncation at 10^7 costs about 1e-3
    assert val == pytest.approx(ex.mertens_theta_constant(), abs=2e-3)
    assert ex.theta_tail_bar({0: 1.0}, 1e7) == pytest.approx(2 / math.sqrt(1e7), rel=1e-8)


def test_log_power_antiderivative():
    t = np.array([2.0, 7.5])
    for m in range(4):
        ref = [float(mp.quad(lambda u: mp.log(u) ** m / u**2, [1, x])) for x in t]
        got = ex._log_power_antiderivative(m, t) - ex._log_power_antiderivative(m, np.array([1.0]))
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_R_and_c_relations(coeffs):
    R2, _ = ex.R_j_coefficient(WeightFunction((1.0, 3.0)), 2)
    assert R2 == pytest.approx(coeffs.R[1], rel=1e-14)
    assert coeffs.R[1] == pytest.approx(coeffs.c[1] / 4, rel=1e-12)
    assert coeffs.R[2] == pytest.approx(coeffs.c[2] / 8, rel=1e-12)
    assert coeffs.R[0] == pytest.approx(REFERENCE_WEIGHT.log_mean - math.log(4 * math.pi) + coeffs.c[0] / 2, rel=1e-12)
    with pytest.raises(ValueError):
        ex.c_j_coefficient(0)


def test_coefficients_json_round_trip(coeffs):
    again = ex.ExpansionCoefficients.from_json(coeffs.to_json())
    assert again == coeffs
    with pytest.raises(ValueError):
        ex.ExpansionCoefficients(2, {}, [1.0], [1.0], [1.0], [1.0])


def test_transition_integral_properties():
    h, phi = REFERENCE_WEIGHT, make_smoothed_bump(1.4)
    assert ex.transition_integral(0.0, 0.5, 1e3, h, phi) == 0.0
    assert ex.transition_integral(1.1, 1.3, 1e6, h.scaled(2), phi) == pytest.approx(
        ex.transition_integral(1.1, 1.3, 1e6, h, phi), rel=1e-12)
    # brute force: scipy quad per modulus c of the defining integral
    K, a, b = 1e4, 1.1, 1.3
    total = 0.0
    for c in range(1, int(4 * math.pi * K ** (b - 1)) + 2):
        if not sympy.ntheory.factorint(c) or max(sympy.ntheory.factorint(c).values()) == 1:
            f = lambda u: K**u * phi.phihat(u) * h(4 * math.pi * K ** (u - 1) / c)
            total += quad(f, a, b, limit=200, epsabs=1e-14)[0] / (c * int(sympy.totient(c)))
    ref = math.pi / (K * h.integral / 4) * total
    assert ex.transition_integral(a, b, K, h, phi) == pytest.approx(ref, rel=1e-7)
    assert ex.transition_integral(1.1, 1.3, 1e6, WeightFunction(scale=0), phi, H=1.0) == 0
    with pytest.raises(ValueError):
        ex.transition_integral(1.0, 0.5, 1e3, h, phi)


def test_window_sum_small_residual():
    h = REFERENCE_WEIGHT
    C0 = ex.C_j_coefficient(h, 0)
    w = ex.mellin_window_sum(h, 1e4, 0.3, 0, C0)
    assert abs(w.residual) < 1e-3
    assert ex.mellin_window_sum(WeightFunction(scale=0), 1e4, 0.3, 1).lhs == 0
    with pytest.raises(ValueError):
        ex.mellin_window_sum(h, 1e4, 0.7, 0, C0)


def test_incomplete_log_moment_tail():
    assert ex.incomplete_log_moment_tail(2.0, 1, 1.0) == pytest.approx(3 * math.exp(-2))
    s = 1.5 + 2j
    ref = complex(mp.quad(lambda u: u**2 * mp.exp(-u * s), [3, mp.inf]))
    assert ex.incomplete_log_moment_tail(3.0, 2, s) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        ex.incomplete_log_moment_tail(0.5, 1, 1.0)


def test_delta_K():
    assert ex.delta_K(1e4, 3) == pytest.approx(18 * math.log(math.log(1e4)) / math.log(1e4))
    assert ex.delta_K(1e300, 1) == pytest.approx(max(12 * math.log(math.log(1e300)) / math.log(1e300),
                                                     20 / math.log(1e300)))


def test_theorem_matches_ks_form(coeffs):
    phi = make_smoothed_bump(1.4)
    for K in (100.0, 1e4):
        for sign in ("+", "-", "mixed"):
            a = ex.theorem_expansion(K, sign, REFERENCE_WEIGHT, phi, 3, coeffs).value
            b = ex.ks_form_expansion(K, sign, phi, 3, coeffs)
            assert a == pytest.approx(b, abs=1e-12)


def test_theorem_sign_structure(coeffs):
    phi = make_smoothed_bump(1.4)
    p = ex.theorem_expansion(200.0, "+", REFERENCE_WEIGHT, phi, 3, coeffs)
    m = ex.theorem_expansion(200.0, "-", REFERENCE_WEIGHT, phi, 3, coeffs)
    x = ex.theorem_expansion(200.0, "mixed", REFERENCE_WEIGHT, phi, 3, coeffs)
    assert p.transition == pytest.approx(-m.transition, abs=1e-15)
    assert x.transition == 0
    assert x.value == pytest.approx((p.value + m.value) / 2, abs=1e-14)
    small = make_smoothed_bump(0.8)
    assert ex.theorem_expansion(200.0, "+", REFERENCE_WEIGHT, small, 3, coeffs).transition == 0


def test_theorem_validation(coeffs):
    with pytest.raises(ValueError):
        ex.theorem_expansion(200.0, "?", REFERENCE_WEIGHT, make_smoothed_bump(1.4), 3, coeffs)
    with pytest.raises(ValueError):
        ex.theorem_expansion(200.0, "+", REFERENCE_WEIGHT, make_fejer(1.4), 3, coeffs)
    with pytest.raises(ValueError):
        ex.expansion_coefficients(REFERENCE_WEIGHT, 5)


def test_transition_parts_agree_across_routes(coeffs):
    # the Kloosterman term of the direct route against the transition terms of the expansion
    from lowlying.density import averaged_density_kloosterman

    phi = make_smoothed_bump(1.4)
    gaps = []
    for K in (100.0, 200.0):
        direct = averaged_density_kloosterman(K, "+", REFERENCE_WEIGHT, phi).breakdown["kloosterman_term"]
        model = ex.theorem_expansion(K, "+", REFERENCE_WEIGHT, phi, 3, coeffs).transition
        gaps.append(abs(direct - model))
    assert gaps[1] < gaps[0] < 0.05
