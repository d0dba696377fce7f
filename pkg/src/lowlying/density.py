"""One-level densities through the explicit formula.

Per-weight route: the explicit formula with the gamma-factor integral, the
-2 phihat(0) log(pi) / log X constant, the prime-square term, the eigenform
prime term and every higher prime power kept exactly.  Averaged route: the
weight-averaged density with the eigenform sum replaced by Kloosterman sums
S(p, 1; c) against h(4 pi sqrt(p) / (c K)).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy import special

from .arith import _table_for, kloosterman_row
from .quadrature import panel_nodes
from .testfn import TestFunction, WeightFunction

DEFAULT_PRIME_BUDGET = 50_000_000
GAMMA_PANEL_NODES = 40
GEOMETRIC_TOL = 1e-18  # Petersson tail tolerance for the geometric prime term


class BudgetExceeded(RuntimeError):
    """A prime or modulus range exceeds the configured desk budget."""


# ---------------------------------------------------------------------------
# gamma factor


@dataclass(frozen=True)
class GammaIntegral:
    value: float
    surrogate: float  # phihat(0) (log k^2 - log 16) / log X
    error_estimate: float


def _digamma_shift_integral(a: float, L: float, phi: TestFunction, nodes: int) -> float:
    """int_R psi(a + 2 pi i t / L) phi(t) dt via Gauss's integral for psi.

    Equals phihat(0) psi(a) + int_0^inf e^{-au} (phihat(0) - phihat(u/L)) / (1 - e^{-u}) du;
    beyond u = sigma L only phihat(0) survives and that tail is summed exactly.
    """
    p0 = phi.phihat0
    U = phi.sigma * L
    width = min(1.0, 2.0 / a)
    u, w = panel_nodes(0.0, U, width, nodes)
    integrand = np.exp(-a * u) * (p0 - phi.phihat(u / L)) / (-np.expm1(-u))
    body = math.fsum((w * integrand).tolist())
    tail = 0.0
    m = 0
    while True:
        term = math.exp(-(a + m) * U) / (a + m)
        tail += term
        if term < 1e-18 * max(abs(tail), 1e-300) or m > 10_000:
            break
        m += 1
    return p0 * float(special.digamma(a)) + body + p0 * tail


def gamma_integral(k: int, X: float, phi: TestFunction, nodes: int = GAMMA_PANEL_NODES) -> GammaIntegral:
    """(1/log X) int [psi(1/4 + (k+1)/4 + 2 pi i t/log X) + psi(1/4 + (k-1)/4 + ...)] phi(t) dt."""
    if k < 2:
        raise ValueError("weight must be >= 2")
    L = math.log(X)
    surrogate = phi.phihat0 * (math.log(k * k) - math.log(16)) / L
    if phi.amplitude == 0:
        return GammaIntegral(0.0, 0.0, 0.0)
    vals = []
    for n in (nodes, 2 * nodes):
        vals.append(sum(_digamma_shift_integral(0.25 + (k + s) / 4, L, phi, n) for s in (1, -1)) / L)
    return GammaIntegral(vals[1], surrogate, abs(vals[1] - vals[0]))


# ---------------------------------------------------------------------------
# prime sums


def prime_square_sum(X: float, phi: TestFunction, limit: int | None = None) -> float:
    """2 sum_p (1/p) phihat(2 log p / log X) log p / log X (finite: p <= X^{sigma/2})."""
    L = math.log(X)
    need = X ** (phi.sigma / 2)
    if limit is None:
        limit = math.floor(need) + 1
    if limit < need:
        raise ValueError(f"prime limit {limit} too small; need >= X^(sigma/2) = {need:.6g}")
    if need < 2:
        return 0.0
    p = _table_for(need).primes_upto(need).astype(float)
    logp = np.log(p)
    terms = 2.0 / p * phi.phihat(2 * logp / L) * logp / L
    return math.fsum(terms.tolist())


@dataclass
class DensityReport:
    k: int
    X: float
    route: str
    gamma_term: float
    gamma_surrogate: float
    pi_term: float
    prime_square_term: float
    prime_term: float
    prime_power_term: float
    prime_term_geometric: float | None
    omega_total: float
    total: float
    tail_bounds: dict = field(default_factory=dict)

    @property
    def displayed_terms(self) -> float:
        """Gamma, pi and prime-square terms (the eigenform terms dropped)."""
        return self.gamma_term + self.pi_term + self.prime_square_term

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _power_sums_newton(lam_p, nu_max: int) -> list:
    """alpha^nu + beta^nu from alpha + beta = lambda(p), alpha beta = 1."""
    s = [mp.mpf(2), lam_p]
    for _ in range(2, nu_max + 1):
        s.append(lam_p * s[-1] - s[-2])
    return s


def density_eigenform_route(k: int, X: float, phi: TestFunction, basis=None, precision: int = 30,
                            prime_power_method: str = "hecke", geometric: bool = True) -> DensityReport:
    """Explicit-formula density D_k(phi; X) from a Hecke eigenbasis."""
    from .modforms import cusp_dimension, eigen_basis
    from .petersson import petersson_values

    L = math.log(X)
    top = X**phi.sigma
    if cusp_dimension(k) == 0:
        return DensityReport(k, X, "eigenform", 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                             {"note": "empty space"})
    basis = basis or eigen_basis(k, max(50, math.ceil(top)), precision)
    if basis.truncation < top:
        raise ValueError(f"basis truncation {basis.truncation} below X^sigma = {top:.6g}")
    if prime_power_method not in ("hecke", "newton"):
        raise ValueError("prime_power_method must be 'hecke' or 'newton'")
    gi = gamma_integral(k, X, phi)
    pi_term = -2 * phi.phihat0 * math.log(math.pi) / L
    psq = prime_square_sum(X, phi)
    primes = _table_for(max(top, 2)).primes_upto(top).tolist() if top >= 2 else []

    with mp.workdps(precision + 10):
        omega = mp.fsum(f.omega for f in basis.forms)
        prime_acc = []
        power_acc = []
        for p in primes:
            logp = math.log(p)
            nu_max = int(math.floor(phi.sigma * L / logp + 1e-12))
            weights = {nu: phi.phihat(nu * logp / L) * logp / L for nu in range(1, nu_max + 1)}
            for f in basis.forms:
                lam_p = f.lambdas[p]
                prime_acc.append(f.omega * lam_p / mp.sqrt(p) * weights[1])
                if nu_max < 2:
                    continue
                if prime_power_method == "newton":
                    sums = _power_sums_newton(lam_p, nu_max)
                for nu in range(2, nu_max + 1):
                    if weights[nu] == 0:
                        continue
                    # at nu = 2 the -1 of alpha^2 + beta^2 = lambda(p^2) - 1 is the prime-square term
                    if prime_power_method == "hecke":
                        s = f.lambdas[p**nu] - f.lambdas[p ** (nu - 2)] if nu > 2 else f.lambdas[p * p]
                    else:
                        s = sums[nu] if nu > 2 else sums[2] + 1
                    power_acc.append(f.omega * s / mp.power(p, mp.mpf(nu) / 2) * weights[nu])
        prime_term = -2 / omega * mp.fsum(prime_acc)
        prime_power_term = -2 / omega * mp.fsum(power_acc)

    prime_geo = None
    if geometric and primes:
        vals = petersson_values(k, [(1, p) for p in primes], GEOMETRIC_TOL)
        acc = [float(vals[(1, p)].value) / math.sqrt(p) * phi.phihat(math.log(p) / L) * math.log(p) / L
               for p in primes]
        prime_geo = -2 / float(omega) * math.fsum(acc)
    total = gi.value + pi_term + psq + float(prime_term) + float(prime_power_term)
    bounds = {"gamma": gi.error_estimate, "omega_quadrature": max(f.norm_error / float(f.petersson_norm)
                                                                  for f in basis.forms)}
    return DensityReport(k, X, "eigenform", gi.value, gi.surrogate, pi_term, psq, float(prime_term),
                         float(prime_power_term), prime_geo, float(omega), total, bounds)


def prime_term_scale(k: int) -> float:
    """k^{3/2} 2^{-k}."""
    return k**1.5 * 2.0 ** (-k)


# ---------------------------------------------------------------------------
# weight sums


@dataclass
class PoissonSums:
    K: float
    H_plus: float
    H_minus: float
    log_plus: float  # 4 sum_{k = 0 mod 4} h((k-1)/K) log k
    log_minus: float  # same over k = 2 mod 4
    H_model: float  # K int h / 4
    log_model: float  # K log K int h + K int h log + corrections
    corrections: int

    @property
    def H(self) -> float:
        return self.H_plus + self.H_minus


def _weights_in_support(K: float, h: WeightFunction, residue: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = h.support
    lo = max(2, math.floor(a * K))
    hi = math.ceil(b * K) + 2
    ks = np.arange(lo - lo % 4 + residue, hi + 1, 4)
    ks = ks[ks >= 2]
    return ks, h((ks - 1) / K)


def h_poisson_sums(K: float, h: WeightFunction, N: int = 3) -> PoissonSums:
    """Direct sums H^+(K), H^-(K) and the log-weighted sums, with the Poisson models."""
    if K < 2:
        raise ValueError("K must be >= 2")
    out = {}
    for name, residue in (("plus", 0), ("minus", 2)):
        ks, w = _weights_in_support(K, h, residue)
        out["H_" + name] = math.fsum(w.tolist())
        out["log_" + name] = 4 * math.fsum((w * np.log(ks)).tolist())
    corr = [(-1) ** (ell + 1) / (ell * K ** (ell - 1)) * h.negative_moment(ell) for ell in range(1, N + 1)]
    log_model = K * math.log(K) * h.integral + K * h.log_integral + math.fsum(corr)
    return PoissonSums(K, out["H_plus"], out["H_minus"], out["log_plus"], out["log_minus"],
                       K * h.integral / 4, log_model, N)


# ---------------------------------------------------------------------------
# averaged density through Kloosterman sums


@dataclass
class AveragedDensity:
    K: float
    sign: str
    H_pm: float
    value: float
    route: str
    breakdown: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=32)
def kloosterman_prime_sum(K: float, h: WeightFunction, phi: TestFunction,
                          budget: int = DEFAULT_PRIME_BUDGET) -> tuple[float, int, int]:
    """sum_p (log p / sqrt p) phihat(log p / log K^2) sum_c S(p,1;c)/c h(4 pi sqrt(p) / (c K)).

    Only c with 4 pi sqrt(p)/(cK) inside supp h contribute; returns
    (value, number of (p, c) pairs, largest c).
    """
    L2 = 2 * math.log(K)
    top = K ** (2 * phi.sigma)
    if top > budget:
        raise BudgetExceeded(f"prime range K^(2 sigma) = {top:.4g} exceeds budget {budget}")
    if top < 2:
        return 0.0, 0, 0
    a, b = h.support
    primes = _table_for(top).primes_upto(top)
    # phihat is costly; evaluate it once per prime and index it for every c
    log_all = np.log(primes.astype(float))
    weight_all = log_all / np.sqrt(primes.astype(float)) * phi.phihat(log_all / L2)
    c_max = math.floor(4 * math.pi * math.sqrt(top) / (K * a))
    partials = []
    pairs = 0
    used_c = 0
    for c in range(1, c_max + 1):
        # 4 pi sqrt(p)/(cK) in (a, b)  <=>  p in ((a c K / 4 pi)^2, (b c K / 4 pi)^2)
        lo = (a * c * K / (4 * math.pi)) ** 2
        hi = min((b * c * K / (4 * math.pi)) ** 2, top)
        i0 = int(np.searchsorted(primes, lo, side="right"))
        i1 = int(np.searchsorted(primes, hi, side="right"))
        if i1 <= i0:
            continue
        p = primes[i0:i1]
        s = kloosterman_row(c, 1)[p % c]
        hv = h(4 * math.pi * np.sqrt(p.astype(float)) / (c * K))
        keep = (s != 0) & (hv != 0)
        if not keep.any():
            continue
        terms = weight_all[i0:i1][keep] * s[keep] / c * hv[keep]
        # numpy pairwise summation: deterministic, and fsum is slow on millions of terms
        partials.append(float(np.sum(terms)))
        pairs += int(keep.sum())
        used_c = c
    return math.fsum(partials), pairs, used_c


def averaged_density_kloosterman(K: float, sign: str, h: WeightFunction, phi: TestFunction,
                                 budget: int = DEFAULT_PRIME_BUDGET) -> AveragedDensity:
    """Weight-averaged density with the Kloosterman term, for sign '+', '-' or 'mixed'."""
    if phi.sigma >= 2:
        raise ValueError("support sigma must be < 2")
    if sign not in ("+", "-", "mixed"):
        raise ValueError("sign must be '+', '-' or 'mixed'")
    L2 = 2 * math.log(K)
    first = phi.phihat0 * (1 + (h.log_mean - math.log(4 * math.pi)) / math.log(K))
    T, pairs, c_used = kloosterman_prime_sum(float(K), h, phi, budget)
    psq = prime_square_sum(K * K, phi)
    sums = h_poisson_sums(K, h)
    kl_plus = -math.pi * T / (L2 * sums.H_plus)
    kl_minus = math.pi * T / (L2 * sums.H_minus)
    breakdown = {"first": first, "prime_square": psq, "kloosterman_raw": T, "pairs": pairs, "c_max": c_used}
    if sign == "+":
        H, kl = sums.H_plus, kl_plus
    elif sign == "-":
        H, kl = sums.H_minus, kl_minus
    else:
        H = sums.H
        weighted = sums.H_plus * kl_plus + sums.H_minus * kl_minus
        kl = weighted / H
        breakdown["s_cancellation_residual"] = abs(weighted) / H
    breakdown["kloosterman_term"] = kl
    return AveragedDensity(float(K), sign, H, first + psq + kl, "kloosterman", breakdown)
