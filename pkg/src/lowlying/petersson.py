"""Geometric side of the Petersson trace formula.

    Delta_k(m, n) = delta(m, n) + 2 pi i^k sum_{c >= 1} S(m, n; c) / c * J_{k-1}(4 pi sqrt(mn) / c)

The c-sum is cut at C where the tail majorant 2 pi A C^{-(k-2)} / (k-2),
A = (2 pi sqrt(mn))^{k-1} / (k-1)!, drops below the tolerance.  The majorant
uses |S(m, n; c)| <= c and |J_nu(x)| <= (x/2)^nu / nu!.  C is never below
ceil(8 e pi sqrt(mn) / k).

Two evaluation paths: ``precision=None`` sums in float64 with FFT
Kloosterman rows and a vectorised backward recurrence for J (used by the bulk tables);
an integer ``precision`` runs the Bessel factors in mpmath.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .arith import euler_phi, kloosterman_row, kloosterman_sum, kloosterman_sum_float, prime_factors
from .bessel import PrecisionError, bessel_j, bessel_j_float

EXACT_KLOOSTERMAN_C = 256  # mp Kloosterman sums below this modulus in the mp path
FLOAT_BESSEL_REL = 1e-13  # validated relative accuracy of bessel_j_float
SURVEY_EPS = 0.05


@dataclass
class PeterssonResult:
    m: int
    n: int
    k: int
    delta_term: int
    kloosterman_sum_value: object  # the c-sum (mpf or float)
    truncation_c: int
    tail_bound: float
    roundoff_bound: float = 0.0

    def __post_init__(self):
        if self.tail_bound < 0 or self.truncation_c < 1:
            raise ValueError("invalid truncation data")

    @property
    def value(self):
        return self.delta_term + self.kloosterman_sum_value


def _log_tail(m: int, n: int, k: int, C: float) -> float:
    log_a = (k - 1) * math.log(2 * math.pi * math.sqrt(m * n)) - math.lgamma(k)
    return math.log(2 * math.pi) + log_a - (k - 2) * math.log(C) - math.log(k - 2)


def tail_majorant(m: int, n: int, k: int, C: int) -> float:
    """Bound on sum over c > C of |2 pi S(m,n;c)/c J_{k-1}(4 pi sqrt(mn)/c)|."""
    return math.exp(_log_tail(m, n, k, C))


def truncation_point(m: int, n: int, k: int, tolerance: float) -> tuple[int, float]:
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    floor_c = max(1, math.ceil(8 * math.e * math.pi * math.sqrt(m * n) / k))
    log_a = _log_tail(m, n, k, 1.0)
    C = max(floor_c, math.ceil(math.exp((log_a - math.log(tolerance)) / (k - 2))))
    while tail_majorant(m, n, k, C) >= tolerance:
        C += 1
    return C, tail_majorant(m, n, k, C)


def _check_args(m: int, n: int, k: int) -> None:
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    if k < 4 or k % 2:
        raise ValueError("weight must be even and >= 4")


def _sign(k: int) -> int:
    return 1 if k % 4 == 0 else -1


def petersson_rhs(m: int, n: int, k: int, tolerance: float = 1e-20, precision: int | None = 30) -> PeterssonResult:
    """delta(m, n) + truncated Kloosterman/Bessel series with certified tail."""
    _check_args(m, n, k)
    if precision is None:
        return petersson_values(k, [(m, n)], tolerance)[(m, n)]
    if tolerance < 10.0 ** (-precision):
        raise PrecisionError(f"tolerance {tolerance} below working precision 1e-{precision}")
    C, tail = truncation_point(m, n, k, float(tolerance))
    sign = _sign(k)
    dps = precision + 10
    roundoff = 0.0
    with mp.workdps(dps + 10):
        r = 4 * mp.pi * mp.sqrt(m * n)
    with mp.workdps(dps):
        two_pi = 2 * mp.pi
        terms = []
        for c in range(1, C + 1):
            if c <= EXACT_KLOOSTERMAN_C:
                S = kloosterman_sum(m, n, c, dps)
            else:
                S = mp.mpf(kloosterman_sum_float(m, n, c))
            J = bessel_j(k - 1, r / c, precision).value
            term = sign * two_pi * S * J / c
            terms.append(term)
            if c > EXACT_KLOOSTERMAN_C:
                roundoff += float(two_pi * abs(J)) * euler_phi(c) / c * 1e-15
        total = mp.fsum(terms)
    return PeterssonResult(m, n, k, int(m == n), total, C, tail, roundoff)


def petersson_values(k: int, pairs, tolerance: float = 1e-20) -> dict:
    """Double-precision geometric side for many (m, n) at one weight."""
    if k < 4 or k % 2:
        raise ValueError("weight must be even and >= 4")
    pairs = sorted({(int(a), int(b)) for a, b in pairs})
    for m, n in pairs:
        _check_args(m, n, k)
    cuts = {p: truncation_point(p[0], p[1], k, tolerance) for p in pairs}
    c_max = max(C for C, _ in cuts.values())
    products = sorted({m * n for m, n in pairs})
    prod_cut = {P: 0 for P in products}
    for (m, n), (C, _) in cuts.items():
        prod_cut[m * n] = max(prod_cut[m * n], C)

    # all Bessel factors in one vectorised call: J_{k-1}(4 pi sqrt(P) / c)
    pc_p, pc_c = [], []
    for P in products:
        cs = np.arange(1, prod_cut[P] + 1)
        pc_p.append(np.full(len(cs), P))
        pc_c.append(cs)
    pc_p = np.concatenate(pc_p)
    pc_c = np.concatenate(pc_c)
    jvals = bessel_j_float(np.full(len(pc_p), k - 1), 4 * np.pi * np.sqrt(pc_p) / pc_c)
    offsets = {}
    pos = 0
    for P in products:
        offsets[P] = pos
        pos += prod_cut[P]

    sign = _sign(k)
    phi = np.array([0] + [euler_phi(c) for c in range(1, c_max + 1)], dtype=float)
    results = {}
    idx_m = np.array([m for m, _ in pairs])
    idx_n = np.array([n for _, n in pairs])
    # S(m, n; c) = S(1, mn; c) when (m, c) = 1 or (n, c) = 1: one FFT row per c
    cut_arr = np.array([cuts[p][0] for p in pairs])
    prod_arr = idx_m * idx_n
    svals = np.zeros((c_max, len(pairs)))
    for c in range(1, c_max + 1):
        active = np.nonzero(cut_arr >= c)[0]
        row = kloosterman_row(c, 1)
        svals[c - 1, active] = row[prod_arr[active] % c]
        coprime = (np.gcd(idx_m[active], c) == 1) | (np.gcd(idx_n[active], c) == 1)
        for i in active[~coprime].tolist():
            svals[c - 1, i] = kloosterman_sum_float(int(idx_m[i]), int(idx_n[i]), c)
    for i, (m, n) in enumerate(pairs):
        C, tail = cuts[(m, n)]
        cs = np.arange(1, C + 1)
        J = jvals[offsets[m * n] : offsets[m * n] + C]
        terms = sign * 2 * np.pi * svals[:C, i] * J / cs
        total = math.fsum(terms.tolist())
        roundoff = float(np.sum(2 * np.pi * np.abs(J) / cs * (phi[1 : C + 1] * 1e-15
                                                              + np.abs(svals[:C, i]) * FLOAT_BESSEL_REL)))
        results[(m, n)] = PeterssonResult(m, n, k, int(m == n), total, C, tail, roundoff)
    return results


def petersson_table(k: int, size: int, tolerance: float = 1e-20) -> dict:
    """Geometric side for all 1 <= m, n <= size (symmetric entries shared)."""
    half = petersson_values(k, [(m, n) for m in range(1, size + 1) for n in range(m, size + 1)], tolerance)
    out = dict(half)
    for (m, n), res in half.items():
        out[(n, m)] = PeterssonResult(n, m, k, res.delta_term, res.kloosterman_sum_value,
                                      res.truncation_c, res.tail_bound, res.roundoff_bound)
    return out


def omega_total(k: int, tolerance: float = 1e-30, precision: int = 40):
    """Omega_k = sum of harmonic weights, read off the geometric side at m = n = 1."""
    return petersson_rhs(1, 1, k, tolerance, precision).value


def exponential_majorant(m: int, n: int, k: int) -> float:
    """10 2^{-k} (mn)^{1/4} log(2mn) prod_{p | (m,n)} (1 + 3/sqrt p)."""
    g = math.gcd(m, n)
    prod = math.prod(1 + 3 / math.sqrt(p) for p in prime_factors(g)) if g > 1 else 1.0
    return 10 * 2.0 ** (-k) * (m * n) ** 0.25 * math.log(2 * m * n) * prod


def exponential_regime_pairs(k: int) -> list[tuple[int, int]]:
    """All (m, n) with mn <= k^2 / (4 pi e)^2."""
    bound = k * k / (4 * math.pi * math.e) ** 2
    return [(m, n) for m in range(1, int(bound) + 1) for n in range(1, int(bound // m) + 1)]


# ---------------------------------------------------------------------------
# surveys


@dataclass
class SurveyRow:
    m: int
    n: int
    k: int
    actual: float
    majorant1: float
    majorant2: float
    ratio: float


def majorants(m: int, n: int, k: int, eps: float = SURVEY_EPS) -> tuple[float, float]:
    g = math.gcd(m, n)
    mn = m * n
    maj1 = math.sqrt(g) * mn ** (0.25 + eps) / k
    maj2 = k ** (1 / 6) * math.sqrt(g) / mn ** (0.25 - eps)
    return maj1, maj2


def default_survey_grid(k: int) -> list[tuple[int, int]]:
    """(1, n) on a geometric ladder up to about k^3.5, plus a few non-coprime pairs."""
    top = int(k**3.5)
    ns = sorted({int(round(1.6**e)) for e in range(0, int(math.log(top) / math.log(1.6)) + 1)})
    grid = [(1, n) for n in ns if n <= top]
    grid += [(2, 2), (2, 6), (3, 9), (4, 8), (6, 12)]
    return grid


def petersson_error_survey(k: int, mn_grid=None, tolerance: float = 1e-20, eps: float = SURVEY_EPS) -> list[SurveyRow]:
    grid = list(mn_grid) if mn_grid is not None else default_survey_grid(k)
    values = petersson_values(k, grid, tolerance)
    rows = []
    for m, n in grid:
        res = values[(min(m, n), max(m, n))] if (m, n) not in values else values[(m, n)]
        actual = abs(float(res.kloosterman_sum_value))
        maj1, maj2 = majorants(m, n, k, eps)
        rows.append(SurveyRow(m, n, k, actual, maj1, maj2, actual / (maj1 + maj2)))
    return rows


def survey_csv(rows: list[SurveyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "n", "k", "actual", "majorant1", "majorant2", "ratio"])
    for r in rows:
        w.writerow([r.m, r.n, r.k] + [f"{v:.15g}" for v in (r.actual, r.majorant1, r.majorant2, r.ratio)])
    return buf.getvalue()


def spectral_side(basis, m: int, n: int):
    return mp.fsum(f.omega * f.lambdas[m] * f.lambdas[n] for f in basis.forms)


def spectral_vs_geometric(m: int, n: int, k: int, basis=None, precision: int | None = None,
                          tolerance: float = 1e-20) -> float:
    """|sum_f omega_f lambda_f(m) lambda_f(n) - Delta_k(m, n)|."""
    from .modforms import eigen_basis

    basis = basis or eigen_basis(k, max(50, m, n), precision or 30)
    with mp.workdps((precision or 15) + 10):
        spectral = spectral_side(basis, m, n) if basis.forms else mp.mpf(0)
        geometric = petersson_rhs(m, n, k, tolerance, precision).value
        return float(abs(spectral - geometric))


def identity_residuals(k: int, size: int, basis=None, tolerance: float = 1e-20) -> dict:
    """Residual of the trace formula for all m, n <= size (double-precision geometric side)."""
    from .modforms import eigen_basis

    basis = basis or eigen_basis(k, max(50, size), 30)
    table = petersson_table(k, size, tolerance)
    out = {}
    for (m, n), res in table.items():
        spectral = spectral_side(basis, m, n) if basis.forms else 0.0
        out[(m, n)] = (float(abs(spectral - res.value)), res)
    return out
