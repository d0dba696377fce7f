from __future__ import annotations

import json
import math

import mpmath as mp
import numpy as np
import pytest

from lowlying import modforms
from lowlying.arith import divisor_count


def _tau_by_product(N: int) -> list[int]:
    # q prod (1 - q^n)^24 by integer polynomial multiplication
    poly = [1] + [0] * (N - 1)
    for n in range(1, N):
        for _ in range(24):
            for i in range(N - 1, n - 1, -1):
                poly[i] -= poly[i - n]
    return [0] + poly


def test_cusp_dimension():
    dims = {k: modforms.cusp_dimension(k) for k in range(2, 40, 2)}
    assert dims[12] == 1 and dims[14] == 0 and dims[24] == 2 and dims[26] == 1 and dims[36] == 3
    assert all(dims[k] == 0 for k in range(2, 12, 2))


def test_delta_series_is_ramanujan_tau():
    N = 30
    assert list(modforms.delta_series(N).coefficients) == _tau_by_product(N)[: N + 1]


def test_victor_miller_echelon():
    basis = modforms.victor_miller_basis(36, 40)
    for i, g in enumerate(basis):
        for j in range(1, len(basis) + 1):
            assert g[j] == (1 if j == i + 1 else 0)


def test_hecke_matrix_commutes():
    M2 = modforms.hecke_matrix(24, 2, 60).astype(float)
    M3 = modforms.hecke_matrix(24, 3, 60).astype(float)
    assert np.allclose(M2 @ M3, M3 @ M2)
    with pytest.raises(ValueError):
        modforms.hecke_matrix(24, 5, 6)


def test_weight_24_eigenvalues_known():
    eb = modforms.eigen_basis(24, 50, 30)
    got = sorted(float(f.qexp[2]) for f in eb.forms)
    ref = sorted([540 - 12 * math.sqrt(144169), 540 + 12 * math.sqrt(144169)])
    assert got == pytest.approx(ref, rel=1e-25)


def test_eigenforms_multiplicative_and_deligne():
    eb = modforms.eigen_basis(36, 60, 30)
    for f in eb.forms:
        lam = f.lambdas
        with mp.workdps(40):
            assert abs(lam[6] - lam[2] * lam[3]) < 1e-25
            assert abs(lam[4] - (lam[2] ** 2 - 1)) < 1e-25
        for n in range(1, 61):
            assert abs(lam[n]) <= divisor_count(n) + 1e-20


def test_delta_petersson_norm():
    # (Delta, Delta) = 1.0353620568043209223478168122e-6
    eb = modforms.eigen_basis(12, 50, 30)
    (f,) = eb.forms
    assert abs(f.petersson_norm - mp.mpf("1.0353620568043209223478168122e-6")) < 1e-19
    assert f.norm_error < 1e-18


def test_weights_from_trace_formula_match_norms():
    for k in (24, 36):
        hw = modforms.harmonic_weights_via_petersson(k, modforms.eigen_basis(k, 50, 30))
        assert hw.max_relative_gap < 1e-6
        assert hw.n_values[0] == 1


def test_cache_round_trip_and_corruption(tmp_path):
    eb = modforms.eigen_basis(24, 50, 30, cache_dir=tmp_path)
    path = modforms.cache_path(tmp_path, 24, 50, 30)
    assert path.exists()
    again = modforms.eigen_basis(24, 50, 30, cache_dir=tmp_path)
    assert [f.lambdas[7] for f in again.forms] == pytest.approx([f.lambdas[7] for f in eb.forms], rel=1e-30)
    doc = json.loads(path.read_text())
    doc["forms"][0]["lambda"][5] = "3.0"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        modforms.load_eigen_basis(path, 24, 50, 30)
    rebuilt = modforms.eigen_basis(24, 50, 30, cache_dir=tmp_path)
    assert rebuilt.dimension == 2
    path.write_text("{not json")
    assert modforms.eigen_basis(24, 50, 30, cache_dir=tmp_path).dimension == 2


def test_cache_key_depends_on_inputs():
    keys = {modforms.cache_key(k, N, p) for k, N, p in [(24, 50, 30), (24, 51, 30), (24, 50, 31), (26, 50, 30)]}
    assert len(keys) == 4
