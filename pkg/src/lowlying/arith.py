"""Exact arithmetic kernels: primes, Chebyshev theta, squarefree/totient sums
and Kloosterman sums.

Bulk routines work on numpy arrays in double precision with correctly
rounded summation (``math.fsum``); single queries such as
:func:`kloosterman_sum` run in mpmath at a configurable number of digits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np

DEFAULT_DPS = 50
THETA_GRID_RATIO = 1.001


def sieve_primes(limit: int) -> np.ndarray:
    """Primes ``<= limit`` by an odd-only sieve of Eratosthenes."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    size = (limit - 1) // 2  # index i <-> 2i + 1, i >= 1
    odd = np.ones(size + 1, dtype=bool)
    odd[0] = False
    r = math.isqrt(limit)
    for i in range(1, (r - 1) // 2 + 1):
        if odd[i]:
            p = 2 * i + 1
            odd[(p * p - 1) // 2 :: p] = False
    primes = 2 * np.nonzero(odd)[0].astype(np.int64) + 1
    return np.concatenate(([2], primes)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Primes up to ``limit`` with theta(t) checkpoints on a geometric grid."""

    limit: int
    primes: np.ndarray = field(repr=False)
    log_primes: np.ndarray = field(repr=False)
    checkpoints: np.ndarray = field(repr=False)
    theta_checkpoints: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, limit: int, ratio: float = THETA_GRID_RATIO) -> "PrimeTable":
        limit = int(limit)
        if limit < 2:
            raise ValueError("prime table limit must be >= 2")
        primes = sieve_primes(limit)
        logs = np.log(primes.astype(float))
        n_pts = int(math.ceil(math.log(limit) / math.log(ratio))) + 1
        grid = np.unique(np.minimum(np.floor(ratio ** np.arange(n_pts)), limit))
        grid = np.append(grid[grid < limit], float(limit))
        # exact-then-round accumulation of the increments between grid points
        idx = np.searchsorted(primes, grid, side="right")
        values = np.empty(len(grid))
        acc = []
        prev = 0
        for i, j in enumerate(idx):
            if j > prev:
                acc.extend(logs[prev:j].tolist())
                acc = [math.fsum(acc)]
                prev = j
            values[i] = acc[0] if acc else 0.0
        for arr in (primes, logs, grid, values):
            arr.setflags(write=False)
        return cls(limit, primes, logs, grid, values)

    def theta(self, t: float) -> float:
        if not 1 <= t <= self.limit:
            raise ValueError(f"t={t} outside [1, {self.limit}]")
        i = int(np.searchsorted(self.checkpoints, t, side="right")) - 1
        if i < 0:
            return 0.0
        lo = int(np.searchsorted(self.primes, self.checkpoints[i], side="right"))
        hi = int(np.searchsorted(self.primes, t, side="right"))
        return math.fsum([self.theta_checkpoints[i], *self.log_primes[lo:hi].tolist()])

    def primes_upto(self, x: float) -> np.ndarray:
        return self.primes[: int(np.searchsorted(self.primes, x, side="right"))]


@lru_cache(maxsize=4)
def prime_table(limit: int) -> PrimeTable:
    return PrimeTable.build(limit)


def _table_for(limit: float) -> PrimeTable:
    # round up so that nearby requests share a cached table
    need = max(int(limit), 100)
    size = 10 ** math.ceil(math.log10(need))
    if size // 2 >= need:
        size //= 2
    return prime_table(size)


def theta_chebyshev(t: float, table: PrimeTable | None = None) -> float:
    """theta(t) = sum of log p over primes p <= t."""
    table = table or _table_for(t)
    return table.theta(t)


# ---------------------------------------------------------------------------
# squarefree / totient sieves


@lru_cache(maxsize=2)
def squarefree_totient_sieve(limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``(mu2, phi)`` indexed 0..limit with mu2[c] = mu(c)^2."""
    limit = int(limit)
    phi = np.arange(limit + 1, dtype=np.int64)
    mu2 = np.ones(limit + 1, dtype=bool)
    mu2[0] = False
    for p in sieve_primes(limit).tolist():
        phi[p::p] -= phi[p::p] // p
        if p * p <= limit:
            mu2[p * p :: p * p] = False
    phi.setflags(write=False)
    mu2.setflags(write=False)
    return mu2, phi


def _sieve_for(x: float) -> tuple[np.ndarray, np.ndarray]:
    need = max(int(x), 1000)
    return squarefree_totient_sieve(10 ** math.ceil(math.log10(need)))


def squarefree_totient_terms(limit: int) -> np.ndarray:
    """Array of c*mu(c)^2/phi(c) for c = 1..limit."""
    mu2, phi = _sieve_for(limit)
    c = np.arange(1, limit + 1)
    return np.where(mu2[1 : limit + 1], c / phi[1 : limit + 1], 0.0)


def squarefree_totient_partial_sum(x: float) -> float:
    """S(x) = sum_{c <= x} c mu^2(c) / phi(c)."""
    if x < 1:
        raise ValueError("x must be >= 1")
    return math.fsum(squarefree_totient_terms(int(math.floor(x))).tolist())


def squarefree_reciprocal_totient_sum(s: float, limit: int) -> float:
    """Direct partial sum of mu^2(c) / (c^s phi(c)) over c <= limit."""
    mu2, phi = _sieve_for(limit)
    c = np.arange(1, limit + 1, dtype=float)
    terms = np.where(mu2[1 : limit + 1], 1.0 / (c**s * phi[1 : limit + 1]), 0.0)
    return math.fsum(terms.tolist())


def prime_reciprocal_log_sum(limit: int) -> tuple[float, float]:
    """Sum of log p / (p (p - 1)) over p <= limit, and a bound on the rest.

    The bound 2 log(limit) / limit dominates the full integer tail
    sum_{n > limit} log n / (n (n - 1)).
    """
    if limit < 2:
        raise ValueError("limit must be >= 2")
    p = _table_for(limit).primes_upto(limit).astype(float)
    value = math.fsum((np.log(p) / (p * (p - 1.0))).tolist())
    return value, 2.0 * math.log(limit) / limit


# ---------------------------------------------------------------------------
# Kloosterman sums


@lru_cache(maxsize=8192)
def _units_and_inverses(c: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.arange(c, dtype=np.int64)
    units = r[np.gcd(r, c) == 1] if c > 1 else np.zeros(1, dtype=np.int64)
    if c == 1:
        return units, units.copy()
    # x^{-1} = x^{phi(c) - 1} mod c by vectorised square-and-multiply
    e = len(units) - 1
    base = units % c
    inv = np.ones_like(units)
    while e:
        if e & 1:
            inv = inv * base % c
        base = base * base % c
        e >>= 1
    return units, inv


def _check_query(m: int, n: int, c: int) -> None:
    if c < 1:
        raise ValueError("modulus c must be >= 1")


@dataclass(frozen=True)
class KloostermanQuery:
    m: int
    n: int
    c: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.c < 1:
            raise ValueError("Kloosterman query needs m, n, c >= 1")


def kloosterman_sum(m: int, n: int, c: int, dps: int = DEFAULT_DPS) -> mp.mpf:
    """S(m, n; c) at ``dps`` digits.

    The imaginary part cancels under x -> -x; it is computed and checked.
    """
    _check_query(m, n, c)
    units, inv = _units_and_inverses(c)
    with mp.workdps(dps + 5):
        two_pi_c = 2 * mp.pi / c
        re = im = mp.mpf(0)
        for x, xb in zip(units.tolist(), inv.tolist()):
            a = (m * x + n * xb) % c
            re += mp.cos(two_pi_c * a)
            im += mp.sin(two_pi_c * a)
        if abs(im) > mp.mpf(10) ** (-dps + 5) * max(1, c):
            raise ArithmeticError(f"Kloosterman sum S({m},{n};{c}) not real: {im}")
    return +re


def kloosterman_sum_float(m: int, n: int, c: int) -> float:
    _check_query(m, n, c)
    units, inv = _units_and_inverses(c)
    a = (m * units + n * inv) % c
    return float(np.cos(2 * np.pi * a / c).sum())


def kloosterman_row(c: int, n: int = 1) -> np.ndarray:
    """S(a, n; c) for all residues a mod c, in double precision.

    The map a -> S(a, n; c) is a discrete Fourier transform of the
    indicator of units weighted by e(n xbar / c).
    """
    units, inv = _units_and_inverses(c)
    u = np.zeros(c, dtype=complex)
    u[units] = np.exp(2j * np.pi * ((n * inv) % c) / c)
    return (np.fft.ifft(u) * c).real


@lru_cache(maxsize=16384)
def kloosterman_block(c: int, size: int) -> np.ndarray:
    """Matrix of S(m, n; c) for 1 <= m, n <= size (double precision)."""
    units, inv = _units_and_inverses(c)
    r = np.arange(1, size + 1)
    a = np.exp(2j * np.pi * ((r[:, None] * units[None, :]) % c) / c)
    b = np.exp(2j * np.pi * ((r[:, None] * inv[None, :]) % c) / c)
    out = (a @ b.T).real
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# small helpers


def divisor_count(n: int) -> int:
    count = 1
    m = n
    p = 2
    while p * p <= m:
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        count *= e + 1
        p += 1
    if m > 1:
        count *= 2
    return count


def prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def euler_phi(n: int) -> int:
    result = n
    for p in prime_factors(n):
        result -= result // p
    return result


def is_prime(n: int) -> bool:
    return n >= 2 and prime_factors(n) == [n]
