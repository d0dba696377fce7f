"""Lower-order terms of the weight-averaged 1-level density.

Z(s) = sum_c mu^2(c) / (c^s phi(c)) = zeta(s+1) prod_p (1 + (p^{-s-1} - p^{-2s-1}) / (p-1)),
F(s) = s Z(s) (4 pi)^{s-1} Mh(1-s), and

    C_j = (-1)^j / (j+1) F^{(j+1)}(0),      S_j = -4 pi C_{j-1} / ((j-1)! int h),
    c_1 = 2 int_1^inf (theta(t) - t) / t^2 dt + 2,
    c_j = 2^j / (j-2)! int_1^inf (log t)^{j-2} (log t / (j-1) - 1) (theta(t) - t) / t^2 dt,
    R_1 = int h log / int h - log 4 pi + int_1^inf (theta(t) - t) / t^2 dt + 1,   R_j = c_j / 2^j.

Derivatives at s = 0 come from trapezoidal Cauchy integrals on |s| = 1/4;
the pole of zeta(s+1) is cancelled by the explicit factor s.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import mpmath as mp
import numpy as np

from .arith import _sieve_for, _table_for, prime_reciprocal_log_sum
from .quadrature import gl_nodes, panel_nodes
from .testfn import TestFunction, WeightFunction, mellin_h

EULER_CUTOFF = 10**6
CIRCLE_RADIUS = 0.25
CIRCLE_NODES = 64
CIRCLE_TOL = 1e-12
THETA_LIMIT = 10**7
MAX_J = 4
MIN_REAL_PART = -0.45  # the product form needs Re(s) > -1/2
FOUR_PI = 4 * math.pi


# ---------------------------------------------------------------------------
# Z(s)


def _integer_tail(P: float, a: float) -> float:
    """Upper bound for sum_{n > P} n^{-a}, a > 1."""
    return P ** (1 - a) / (a - 1) + P ** (-a)


class EulerProductZ:
    """Z(s) from zeta(s+1), the product over p <= P and an exact prime-zeta tail.

    Beyond P the logarithm of each factor is replaced by its linear term
    x_p(s) = sum_{r >= 1} (p^{-s-1-r} - p^{-2s-1-r}), summed with prime zeta
    functions; the quadratic remainder and the dropped r are bounded by
    integer tails.
    """

    def __init__(self, P: int = EULER_CUTOFF):
        if P < 1000:
            raise ValueError("Euler cutoff P must be >= 1000")
        self.P = int(P)
        self.primes = _table_for(self.P).primes_upto(self.P).astype(float)
        self.log_p = np.log(self.primes)
        self.cache: dict[complex, tuple[complex, float]] = {}

    def _head_sum(self, z: complex) -> complex:
        terms = np.exp(-z * self.log_p)
        return complex(math.fsum(terms.real.tolist()), math.fsum(terms.imag.tolist()))

    def _prime_zeta_tail(self, z: complex) -> complex:
        return complex(mp.primezeta(mp.mpc(z))) - self._head_sum(z)

    def __call__(self, s: complex) -> tuple[complex, float]:
        """(Z(s), absolute error bar)."""
        s = complex(s)
        if abs(s) < 1e-14:
            raise ZeroDivisionError("Z has a simple pole at s = 0")
        if s.real <= MIN_REAL_PART:
            raise ValueError(f"Re(s) = {s.real} too small for the Euler product (need > {MIN_REAL_PART})")
        if s in self.cache:
            return self.cache[s]
        if s.conjugate() in self.cache:
            val, err = self.cache[s.conjugate()]
            return val.conjugate(), err
        P = float(self.P)
        p = self.primes
        x = (np.exp(-(s + 1) * self.log_p) - np.exp(-(2 * s + 1) * self.log_p)) / (p - 1)
        logs = np.log1p(x)
        log_head = complex(math.fsum(logs.real.tolist()), math.fsum(logs.imag.tolist()))
        m = min(s.real, 2 * s.real)
        log_tail = 0j
        r = 1
        while True:
            a1, a2 = s + 1 + r, 2 * s + 1 + r
            if _integer_tail(P, a1.real) < 1e-19 and _integer_tail(P, a2.real) < 1e-19:
                break
            log_tail += self._prime_zeta_tail(a1) - self._prime_zeta_tail(a2)
            r += 1
        dropped = 2 * _integer_tail(P, 1 + r + m) * P / (P - 1)
        quadratic = 16 * _integer_tail(P, 4 + 2 * m)
        with mp.workdps(20):
            zeta = complex(mp.zeta(mp.mpc(s + 1)))
        val = zeta * complex(np.exp(log_head + log_tail))
        err = abs(val) * (dropped + quadratic + 1e-15 * len(p) ** 0.5)
        self.cache[s] = (val, err)
        return val, err

    def s_times_z(self, s: complex) -> complex:
        """s Z(s), equal to 1 at s = 0 (every Euler factor is 1 there)."""
        if abs(s) < 1e-14:
            return 1.0 + 0j
        return s * self(s)[0]


_Z_INSTANCES: dict[int, EulerProductZ] = {}


def euler_product_z(P: int = EULER_CUTOFF) -> EulerProductZ:
    if P not in _Z_INSTANCES:
        _Z_INSTANCES[P] = EulerProductZ(P)
    return _Z_INSTANCES[P]


def Z_of_s(s: complex, P: int = EULER_CUTOFF) -> tuple[complex, float]:
    """Z(s) with an error bar; real input returns a real value."""
    val, err = euler_product_z(P)(s)
    return (val.real if np.isreal(s) else val), err


def z_direct_sum(s: float, limit: int) -> float:
    """Partial Dirichlet series sum_{c <= limit} mu^2(c) / (c^s phi(c))."""
    mu2, phi = _sieve_for(limit)
    c = np.arange(1, limit + 1, dtype=float)
    terms = np.where(mu2[1 : limit + 1], 1.0 / (c**s * phi[1 : limit + 1]), 0.0)
    return math.fsum(terms.tolist())


# ---------------------------------------------------------------------------
# Cauchy differentiation at s = 0


def _default_F(h: WeightFunction, P: int):
    Z = euler_product_z(P)

    def F(s: np.ndarray) -> np.ndarray:
        sz = np.array([Z.s_times_z(v) for v in s.tolist()])
        return sz * np.exp((s - 1) * math.log(FOUR_PI)) * mellin_h(h, 1 - s)

    return F


def taylor_coefficients(F, orders: int, radius: float = CIRCLE_RADIUS, nodes: int = CIRCLE_NODES,
                        tol: float = CIRCLE_TOL, max_nodes: int = 1024) -> tuple[np.ndarray, float]:
    """Derivatives F^{(n)}(0), n = 0..orders, by the trapezoidal Cauchy integral.

    Nodes double until successive results agree to ``tol`` (relative to the
    largest derivative); the returned error is that last change.  F must map
    an array of complex points to values and satisfy F(conj s) = conj F(s).
    """
    vals: dict[int, complex] = {}

    def coeffs(N: int) -> np.ndarray:
        theta = 2 * np.pi * np.arange(N) / N
        pts = radius * np.exp(1j * theta)
        need = [i for i in range(N) if (i * (1024 // N)) % 1024 not in vals and i <= N // 2]
        if need:
            new = F(pts[need])
            for i, v in zip(need, new.tolist()):
                vals[(i * (1024 // N)) % 1024] = v
        f = np.empty(N, dtype=complex)
        for i in range(N):
            j = i if i <= N // 2 else N - i
            v = vals[(j * (1024 // N)) % 1024]
            f[i] = v if i <= N // 2 else np.conj(v)
        a = np.fft.fft(f) / N  # a_n = F^{(n)}(0) r^n / n!
        n = np.arange(orders + 1)
        return np.array([a[k].real for k in n]) * np.array([math.factorial(k) for k in n]) / radius**n

    if max_nodes > 1024 or 1024 % max_nodes:
        raise ValueError("max_nodes must divide 1024")
    N = nodes
    prev = coeffs(N)
    while True:
        if 2 * N > max_nodes:
            raise ArithmeticError("Cauchy integral did not converge")
        cur = coeffs(2 * N)
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur, err
        prev, N = cur, 2 * N


def C_coefficients(h: WeightFunction, J: int, P: int = EULER_CUTOFF, F=None) -> tuple[list[float], list[float]]:
    """C_0..C_{J-1} and their Cauchy-integral error estimates.

    ``F`` replaces s Z(s) (4 pi)^{s-1} Mh(1-s) (used with closed-form surrogates).
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    F = F or _default_F(h, P)
    derivs, err = taylor_coefficients(F, J)
    C = [(-1) ** j / (j + 1) * derivs[j + 1] for j in range(J)]
    errs = [err / (j + 1) for j in range(J)]
    return C, errs


def C_j_coefficient(h: WeightFunction, j: int, P: int = EULER_CUTOFF, F=None) -> float:
    if j < 0:
        raise ValueError("j must be >= 0")
    return C_coefficients(h, j + 1, P, F)[0][j]


def S_from_C(C: list[float], h: WeightFunction) -> list[float]:
    """S_j = -4 pi C_{j-1} / ((j-1)! int h), j = 1..len(C)."""
    return [-FOUR_PI * C[j - 1] / (math.factorial(j - 1) * h.integral) for j in range(1, len(C) + 1)]


def S1_closed_form(h: WeightFunction, prime_limit: int = THETA_LIMIT) -> float:
    """-gamma + int h log / int h - log 4 pi - sum_p log p / (p (p-1))."""
    prime_sum, _ = prime_reciprocal_log_sum(prime_limit)
    return -float(mp.euler) + h.log_mean - math.log(FOUR_PI) - prime_sum


# ---------------------------------------------------------------------------
# theta integrals


def _log_power_antiderivative(m: int, t: np.ndarray) -> np.ndarray:
    """int (log t)^m t^{-2} dt = -(1/t) sum_{i<=m} m!/(m-i)! (log t)^{m-i}."""
    lt = np.log(t)
    out = np.zeros_like(lt)
    for i in range(m + 1):
        out += math.factorial(m) / math.factorial(m - i) * lt ** (m - i)
    return -out / t


def theta_kernel_integral(poly: dict[int, float], limit: float) -> float:
    """int_1^limit K(t) (theta(t) - t) / t^2 dt for K(t) = sum_m poly[m] (log t)^m.

    theta is a step function, so the integral is exact given the primes:
    sum_p log p (A(limit) - A(p)) - int_1^limit K(t) / t dt, A' = K / t^2.
    """
    if limit < 2:
        return -sum(c * math.log(limit) ** (m + 1) / (m + 1) for m, c in poly.items())
    table = _table_for(limit)
    p = table.primes_upto(limit).astype(float)
    logp = np.log(p)
    X = np.array([float(limit)])
    A_X = sum(c * _log_power_antiderivative(m, X)[0] for m, c in poly.items())
    A_p = sum(c * _log_power_antiderivative(m, p) for m, c in poly.items())
    prime_part = math.fsum((logp * (A_X - A_p)).tolist())
    lx = math.log(limit)
    smooth = math.fsum(c * lx ** (m + 1) / (m + 1) for m, c in poly.items())
    return prime_part - smooth


def theta_tail_bar(poly: dict[int, float], limit: float) -> float:
    """int_limit^inf |K(t)| t^{-3/2} dt, the tail if |theta(t) - t| <= sqrt(t) (heuristic)."""
    with mp.workdps(20):
        f = lambda t: abs(sum(c * mp.log(t) ** m for m, c in poly.items())) * t ** mp.mpf(-1.5)
        return float(mp.quad(f, [limit, 10 * limit, mp.inf]))


def _c_kernel(j: int) -> dict[int, float]:
    if j == 1:
        return {0: 2.0}
    scale = 2.0**j / math.factorial(j - 2)
    return {j - 1: scale / (j - 1), j - 2: -scale}


def c_j_coefficient(j: int, theta_limit: float = THETA_LIMIT) -> tuple[float, float]:
    """(c_j, heuristic tail bar) with the theta integral cut at ``theta_limit``."""
    if j < 1:
        raise ValueError("j must be >= 1")
    kernel = _c_kernel(j)
    val = theta_kernel_integral(kernel, theta_limit) + (2.0 if j == 1 else 0.0)
    return val, theta_tail_bar(kernel, theta_limit)


def _r_kernel(j: int) -> dict[int, float]:
    if j == 1:
        return {0: 1.0}
    return {j - 1: 1.0 / (math.factorial(j - 2) * (j - 1)), j - 2: -1.0 / math.factorial(j - 2)}


def R_j_coefficient(h: WeightFunction, j: int, theta_limit: float = THETA_LIMIT) -> tuple[float, float]:
    """(R_j, heuristic tail bar); R_j for j >= 2 does not involve h."""
    if j < 1:
        raise ValueError("j must be >= 1")
    kernel = _r_kernel(j)
    val = theta_kernel_integral(kernel, theta_limit)
    if j == 1:
        val += h.log_mean - math.log(FOUR_PI) + 1
    return val, theta_tail_bar(kernel, theta_limit)


def mertens_theta_constant(prime_limit: int = THETA_LIMIT) -> float:
    """int_1^inf (theta(t) - t) / t^2 dt = -gamma - 1 - sum_p log p / (p (p-1)) (closed form)."""
    prime_sum, _ = prime_reciprocal_log_sum(prime_limit)
    return -float(mp.euler) - 1 - prime_sum


# ---------------------------------------------------------------------------
# coefficient bundle


@dataclass
class ExpansionCoefficients:
    J: int
    h_tag: dict
    c: list
    C: list
    S: list
    R: list
    error_bars: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.c) == len(self.C) == len(self.S) == len(self.R) == self.J):
            raise ValueError("coefficient lists must have length J")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExpansionCoefficients":
        return cls(**json.loads(text))


def expansion_coefficients(h: WeightFunction, J: int, theta_limit: float = THETA_LIMIT,
                           P: int = EULER_CUTOFF) -> ExpansionCoefficients:
    if not 1 <= J <= MAX_J:
        raise ValueError(f"J must be in 1..{MAX_J}")
    C, C_err = C_coefficients(h, J, P)
    S = S_from_C(C, h)
    S_err = [FOUR_PI * C_err[j - 1] / (math.factorial(j - 1) * h.integral) for j in range(1, J + 1)]
    c, c_err = zip(*(c_j_coefficient(j, theta_limit) for j in range(1, J + 1)))
    R, R_err = zip(*(R_j_coefficient(h, j, theta_limit) for j in range(1, J + 1)))
    bars = {"C": C_err, "S": S_err, "c": list(c_err), "R": list(R_err)}
    return ExpansionCoefficients(J, h.to_dict(), list(c), C, S, list(R), bars)


# ---------------------------------------------------------------------------
# transition integrals and window sums


def _squarefree_weights(c_max: int) -> np.ndarray:
    """mu^2(c) / phi(c) for c = 1..c_max."""
    mu2, phi = _sieve_for(max(c_max, 1))
    c = np.arange(1, c_max + 1)
    return np.where(mu2[c], 1.0 / phi[c], 0.0)


def transition_integral(a: float, b: float, K: float, h: WeightFunction, phi: TestFunction,
                        H: float | None = None) -> float:
    """I_{a,b} = (pi / H) int_a^b K^u phihat(u) sum_c mu^2(c) / (c phi(c)) h(4 pi K^{u-1} / c) du.

    H defaults to the smooth model K int h / 4 of the weight total.
    """
    if not 0 <= a < b:
        raise ValueError("need 0 <= a < b")
    if K < 2:
        raise ValueError("K must be >= 2")
    H = K * h.integral / 4 if H is None else H
    b = min(b, phi.sigma)
    ha, hb = h.support
    # h(4 pi K^{u-1} / c) vanishes unless 4 pi K^{u-1} / hb < c < 4 pi K^{u-1} / ha
    u_lo = max(a, 1 + math.log(ha / FOUR_PI) / math.log(K))
    if b <= u_lo or h.scale == 0:
        return 0.0
    width = min(0.01, (b - u_lo) / 50)
    u, w = panel_nodes(u_lo, b, width, 10)
    c_max = int(math.floor(FOUR_PI * K ** (b - 1) / ha)) + 1
    c = np.arange(1, c_max + 1, dtype=float)
    sq = _squarefree_weights(c_max) / c
    acc = np.zeros(len(u))
    for start in range(0, len(u), 256):
        x = FOUR_PI * K ** (u[start : start + 256, None] - 1) / c[None, :]
        acc[start : start + 256] = h(x) @ sq
    integrand = K**u * phi.phihat(u) * acc
    return math.pi / H * math.fsum((w * integrand).tolist())


@dataclass(frozen=True)
class WindowSum:
    lhs: float
    model: float
    C_j: float

    @property
    def residual(self) -> float:
        return self.lhs - self.model


def mellin_window_sum(h: WeightFunction, K: float, delta: float, j: int, C_j: float | None = None) -> WindowSum:
    """sum_c mu^2(c)/phi(c) int_{K^-delta}^{K^delta} (log v)^j / c h(4 pi v / c) dv and its model.

    After v = c t / (4 pi) the c-th term is (1/4 pi) int (log(c t / 4 pi))^j h(t) dt over
    t in [4 pi K^-delta / c, 4 pi K^delta / c]; the model is
    Mh(1) (delta log K)^{j+1} / (4 pi (j+1)) + C_j.
    """
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    if j < 0:
        raise ValueError("j must be >= 0")
    if C_j is None:
        C_j = C_j_coefficient(h, j) if h.scale else 0.0
    model = h.integral * (delta * math.log(K)) ** (j + 1) / (FOUR_PI * (j + 1)) + C_j
    if h.scale == 0:
        return WindowSum(0.0, model, C_j)
    ha, hb = h.support
    lo_v, hi_v = K ** (-delta), K**delta
    c_min = max(1, math.ceil(FOUR_PI * lo_v / hb))
    c_max = math.floor(FOUR_PI * hi_v / ha)
    weights = _squarefree_weights(c_max)
    x, w = gl_nodes(-1.0, 1.0, 64)
    terms = []
    for c in range(c_min, c_max + 1):
        if weights[c - 1] == 0:
            continue
        t_lo = max(ha, FOUR_PI * lo_v / c)
        t_hi = min(hb, FOUR_PI * hi_v / c)
        if t_hi <= t_lo:
            continue
        t = 0.5 * (t_lo + t_hi) + 0.5 * (t_hi - t_lo) * x
        val = 0.5 * (t_hi - t_lo) * float(np.sum(w * np.log(c * t / FOUR_PI) ** j * h(t)))
        terms.append(weights[c - 1] * val / FOUR_PI)
    return WindowSum(math.fsum(terms), model, C_j)


def incomplete_log_moment_tail(x: float, j: int, s: complex, bound_constant: float = 2.0) -> complex:
    """int_x^inf u^j e^{-us} du = e^{-xs} x^j / s sum_{l<=j} j! x^{-l} / ((j-l)! s^l).

    Checks |value| <= bound_constant j! e^{-Re(s) x} x^j / |s|; each summand
    ratio is at most (x|s|)^{-l} <= 2^{-l}, so 2 always suffices.
    """
    s = complex(s)
    if x < 0 or j < 0 or s.real <= 0 or x * abs(s) < 2:
        raise ValueError("need x >= 0, j >= 0, Re(s) > 0 and x|s| >= 2")
    total = sum(math.factorial(j) / math.factorial(j - l) * x ** (-l) / s**l for l in range(j + 1))
    value = np.exp(-x * s) * x**j / s * total
    bound = math.factorial(j) * math.exp(-s.real * x) * x**j / abs(s)
    if abs(value) > bound_constant * bound * (1 + 1e-12):
        raise ArithmeticError("incomplete moment exceeds its bound")
    return complex(value)


def delta_K(K: float, J: int) -> float:
    """Window half-width 3 (J+3) log log K / log K, floored at 20 / log K."""
    L = math.log(K)
    return max(3 * (J + 3) * math.log(L) / L, 20 / L)


# ---------------------------------------------------------------------------
# assembled expansion


def _check_sign(sign: str) -> None:
    if sign not in ("+", "-", "mixed"):
        raise ValueError("sign must be '+', '-' or 'mixed'")


def _phihat_derivs(phi: TestFunction, at: float, J: int) -> list[float]:
    if phi.family != "smoothed_bump" and J > 1:
        raise ValueError("derivatives of phihat need the smoothed_bump family")
    return [phi.phihat(at, order) for order in range(J)]


@dataclass(frozen=True)
class ExpansionValue:
    K: float
    sign: str
    value: float
    transition: float  # the part multiplying phihat^{(j)}(1) and the tail integral
    terms: dict


def theorem_expansion(K: float, sign: str, h: WeightFunction, phi: TestFunction, J: int,
                      coeffs: ExpansionCoefficients | None = None) -> ExpansionValue:
    """phihat(0)(1 + (int h log / int h - log 4 pi) / log K) + phi(0)/2
    + sum_j c_j phihat^{(j-1)}(0) / (2 log K)^j -+ int_1^inf phihat -+ ... +- sum_j S_j phihat^{(j-1)}(1) / (log K)^j.

    The mixed family carries no transition terms.
    """
    _check_sign(sign)
    if phi.sigma >= 2:
        raise ValueError("sigma must be < 2")
    if not 1 <= J <= MAX_J:
        raise ValueError(f"J must be in 1..{MAX_J}")
    coeffs = coeffs or expansion_coefficients(h, J)
    L = math.log(K)
    d0 = _phihat_derivs(phi, 0.0, J)
    d1 = _phihat_derivs(phi, 1.0, J) if phi.sigma > 1 else [0.0] * J
    base = phi.phihat0 * (1 + (h.log_mean - math.log(FOUR_PI)) / L) + phi.phi0 / 2
    prime_corr = math.fsum(coeffs.c[j - 1] * d0[j - 1] / (2 * L) ** j for j in range(1, J + 1))
    tail = phi.phihat_integral(1.0, phi.sigma)
    s_part = math.fsum(coeffs.S[j - 1] * d1[j - 1] / L**j for j in range(1, J + 1))
    eps = {"+": 1, "-": -1, "mixed": 0}[sign]
    transition = eps * (-tail + s_part) + 0.0  # no negative zero for the mixed family
    value = base + prime_corr + transition
    return ExpansionValue(K, sign, value, transition,
                          {"base": base, "prime_correction": prime_corr, "tail_integral": tail, "S_part": s_part})


def ks_form_expansion(K: float, sign: str, phi: TestFunction, J: int, coeffs: ExpansionCoefficients) -> float:
    """int phihat W^{+-} + sum_j (R_j phihat^{(j-1)}(0) +- S_j phihat^{(j-1)}(1)) / (log K)^j."""
    from .testfn import ks_prediction

    _check_sign(sign)
    L = math.log(K)
    d0 = _phihat_derivs(phi, 0.0, J)
    d1 = _phihat_derivs(phi, 1.0, J) if phi.sigma > 1 else [0.0] * J
    eps = {"+": 1, "-": -1, "mixed": 0}[sign]
    corr = math.fsum((coeffs.R[j - 1] * d0[j - 1] + eps * coeffs.S[j - 1] * d1[j - 1]) / L**j
                     for j in range(1, J + 1))
    return ks_prediction(phi, sign) + corr
