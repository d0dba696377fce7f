"""Level-1 holomorphic modular forms.

q-expansions are exact Python integers; the Victor Miller basis is built
from Delta^j times a product of E4 and E6 and echelonised with integer row
operations.  Hecke eigenforms come from a high-precision eigendecomposition
of T_2 (T_2 + 2 T_3 if eigenvalues of T_2 collide).  Petersson norms are a
fundamental-domain integral: the part y >= 1 in closed form through the
upper incomplete gamma function, the rest by tensor Gauss-Legendre.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import mpmath as mp
import numpy as np

from .arith import sieve_primes
from .quadrature import gauss_legendre

log = logging.getLogger(__name__)

CACHE_VERSION = 1


# ---------------------------------------------------------------------------
# q-expansions


@dataclass(frozen=True)
class QExpansion:
    """Coefficients a(0..N) of a weight-k form (exact ints, or mpf for eigenforms)."""

    weight: int
    coefficients: tuple
    truncation: int

    def __post_init__(self):
        if len(self.coefficients) != self.truncation + 1:
            raise ValueError("need exactly truncation + 1 coefficients")

    def __getitem__(self, n: int):
        return self.coefficients[n]

    def scaled(self, factor) -> "QExpansion":
        return QExpansion(self.weight, tuple(factor * a for a in self.coefficients), self.truncation)


def cusp_dimension(k: int) -> int:
    """dim S_k(SL2(Z)) for even k."""
    if k < 12 or k % 2:
        return 0
    return k // 12 - (1 if k % 12 == 2 else 0)


def _mul(a: np.ndarray, b: np.ndarray, N: int) -> np.ndarray:
    return np.convolve(a, b)[: N + 1]


def _divisor_power_sums(N: int, power: int) -> list[int]:
    out = [0] * (N + 1)
    for d in range(1, N + 1):
        dp = d**power
        for m in range(d, N + 1, d):
            out[m] += dp
    return out


@lru_cache(maxsize=32)
def _eisenstein(w: int, N: int) -> np.ndarray:
    if w == 4:
        sig = _divisor_power_sums(N, 3)
        coeffs = [1] + [240 * s for s in sig[1:]]
    elif w == 6:
        sig = _divisor_power_sums(N, 5)
        coeffs = [1] + [-504 * s for s in sig[1:]]
    else:
        raise ValueError("only E4 and E6 are built directly")
    return np.array(coeffs, dtype=object)


@lru_cache(maxsize=32)
def _power(kind: str, e: int, N: int) -> np.ndarray:
    """E4^e, E6^e or Delta^e truncated at q^N."""
    if e == 0:
        out = np.zeros(N + 1, dtype=object)
        out[:] = 0
        out[0] = 1
        return out
    if kind == "delta" and e == 1:
        e4, e6 = _eisenstein(4, N), _eisenstein(6, N)
        num = _mul(_mul(e4, e4, N), e4, N) - _mul(e6, e6, N)
        if any(int(x) % 1728 for x in num):
            raise ArithmeticError("E4^3 - E6^2 not divisible by 1728")
        return np.array([int(x) // 1728 for x in num], dtype=object)
    if e == 1:
        return _eisenstein(4 if kind == "e4" else 6, N)
    half = _power(kind, e // 2, N)
    out = _mul(half, half, N)
    if e % 2:
        out = _mul(out, _power(kind, 1, N), N)
    return out


def eisenstein_series(w: int, N: int) -> QExpansion:
    return QExpansion(w, tuple(int(x) for x in _eisenstein(w, N)), N)


def delta_series(N: int) -> QExpansion:
    return QExpansion(12, tuple(int(x) for x in _power("delta", 1, N)), N)


def _modular_unit(w: int, N: int) -> np.ndarray:
    """E4^a E6^b of weight w (w even, w != 2), constant term 1."""
    if w % 4 == 0:
        a, b = w // 4, 0
    else:
        a, b = (w - 6) // 4, 1
    if a < 0:
        raise ValueError(f"no modular form of weight {w}")
    return _mul(_power("e4", a, N), _power("e6", b, N), N)


def victor_miller_basis(k: int, N: int) -> list[QExpansion]:
    """Echelon integral basis g_i = q^i + O(q^{d+1}) of S_k, i = 1..d."""
    d = cusp_dimension(k)
    if d == 0:
        return []
    if N < d + 1:
        raise ValueError(f"truncation N={N} must be >= dim+1={d + 1}")
    rows = []
    for j in range(1, d + 1):
        rows.append(_mul(_power("delta", j, N), _modular_unit(k - 12 * j, N), N))
    # rows[j-1] = q^j + ...; clear the entries above the diagonal from the bottom
    for i in range(d - 1, -1, -1):
        for j in range(i + 1, d):
            coef = rows[i][j + 1]
            if coef:
                rows[i] = rows[i] - coef * rows[j]
    basis = [QExpansion(k, tuple(int(x) for x in r), N) for r in rows]
    for i, g in enumerate(basis):
        for j in range(d + 1):
            want = 1 if j == i + 1 else 0
            if g[j] != want:
                raise ArithmeticError("Victor Miller basis not echelonised")
    return basis


def hecke_operator(g: QExpansion, p: int, limit: int) -> list[int]:
    """Coefficients 0..limit of T_p g (needs g to q^{p*limit})."""
    if p * limit > g.truncation:
        raise ValueError("insufficient truncation for T_p")
    pk = p ** (g.weight - 1)
    return [g[p * n] + (pk * g[n // p] if n % p == 0 else 0) for n in range(limit + 1)]


def hecke_matrix(k: int, p: int, N: int) -> np.ndarray:
    """Matrix of T_p on the Victor Miller basis: T_p g_i = sum_j M[j, i] g_j."""
    d = cusp_dimension(k)
    if N < p * (d + 1):
        raise ValueError(f"insufficient truncation: need N >= {p * (d + 1)}, got {N}")
    basis = victor_miller_basis(k, N)
    M = np.zeros((d, d), dtype=object)
    M[:] = 0
    for i, g in enumerate(basis):
        t = hecke_operator(g, p, d)
        for j in range(d):
            M[j, i] = t[j + 1]
    return M


# ---------------------------------------------------------------------------
# eigenforms


@dataclass
class HeckeEigenform:
    """Normalised eigenform f = sum_i coords[i] g_i with c_f(1) = 1."""

    weight: int
    coords: list  # coordinates on the Victor Miller basis (mpf)
    qexp: QExpansion = field(repr=False)
    lambdas: list = field(repr=False)  # lambdas[n] = c_f(n) / n^{(k-1)/2}, lambdas[0] = 0
    petersson_norm: mp.mpf | None = None
    norm_error: float = math.inf
    omega: mp.mpf | None = None

    def lam(self, n: int):
        return self.lambdas[n]

    @property
    def truncation(self) -> int:
        return self.qexp.truncation


@dataclass
class EigenBasis:
    weight: int
    truncation: int
    precision: int
    forms: list

    @property
    def dimension(self) -> int:
        return len(self.forms)

    def omega_sum(self):
        return mp.fsum(f.omega for f in self.forms)


def norm_truncation(k: int, precision: int) -> int:
    """Coefficient count making the q-expansion tail negligible for the norm.

    Uses |c(n)| <= d(n) n^{(k-1)/2} <= 2 n^{k/2} and y >= sqrt(3)/2.
    """
    target = -(precision + 5) * math.log(10)
    n = max(2, int(k / (math.sqrt(3) * math.pi)) + 1)
    while math.log(2) + (k / 2) * math.log(n) - math.sqrt(3) * math.pi * n > target:
        n += 1
    return n + 2


def _eigen_dps(basis: list[QExpansion], precision: int) -> int:
    big = max((abs(a) for g in basis for a in g.coefficients), default=1)
    return precision + 20 + len(str(big))


def _solve_eigen(M: np.ndarray, dps: int):
    """Real eigenpairs of an integer matrix, eigenvectors scaled so v[0] = 1."""
    d = M.shape[0]
    with mp.workdps(dps):
        A = mp.matrix([[mp.mpf(int(M[i, j])) for j in range(d)] for i in range(d)])
        E, ER = mp.eig(A)
        pairs = []
        tol = mp.mpf(10) ** (-dps // 2)
        for idx in range(d):
            lam = E[idx]
            v = [ER[i, idx] for i in range(d)]
            if abs(v[0]) < tol:
                raise ArithmeticError("eigenvector with vanishing first coefficient")
            v = [x / v[0] for x in v]
            if abs(mp.im(lam)) > tol * max(1, abs(lam)) or any(abs(mp.im(x)) > tol for x in v):
                raise ArithmeticError("non-real Hecke eigenvalue")
            pairs.append((mp.re(lam), [mp.re(x) for x in v]))
    return pairs


def _min_gap(values) -> mp.mpf:
    vs = sorted(values)
    if len(vs) < 2:
        return mp.inf
    return min(b - a for a, b in zip(vs, vs[1:]))


def _eigen_from_basis(k: int, basis: list[QExpansion], precision: int):
    d = len(basis)
    N = basis[0].truncation
    dps = _eigen_dps(basis, precision)
    T2 = hecke_matrix(k, 2, N)
    pairs = _solve_eigen(T2, dps)
    scale = max(abs(lam) for lam, _ in pairs)
    if _min_gap([lam for lam, _ in pairs]) < mp.mpf(10) ** (-(precision // 2)) * scale:
        log.info("T_2 eigenvalues cluster at k=%d; using T_2 + 2 T_3", k)
        if N < 3 * (d + 1):
            raise ValueError("fallback T_2 + 2 T_3 needs N >= 3(dim+1)")
        M = T2 + 2 * hecke_matrix(k, 3, N)
        pairs = _solve_eigen(M, dps)
        scale = max(abs(lam) for lam, _ in pairs)
        if _min_gap([lam for lam, _ in pairs]) < mp.mpf(10) ** (-(precision // 2)) * scale:
            raise ArithmeticError("clustered eigenvalues beyond precision; raise precision")
    return [v for _, v in pairs], dps


def _form_from_coords(k: int, basis: list[QExpansion], coords, dps: int, precision: int) -> HeckeEigenform:
    N = basis[0].truncation
    with mp.workdps(dps):
        vs = [mp.mpf(c) for c in coords]
        coeffs = [mp.fsum(v * g[n] for v, g in zip(vs, basis)) for n in range(N + 1)]
        half = mp.mpf(k - 1) / 2
        lambdas = [mp.mpf(0)] + [coeffs[n] / mp.power(n, half) for n in range(1, N + 1)]
    with mp.workdps(precision + 10):
        coeffs = [+c for c in coeffs]
        lambdas = [+x for x in lambdas]
        vs = [+v for v in vs]
    return HeckeEigenform(k, vs, QExpansion(k, tuple(coeffs), N), lambdas)


def _sort_forms(forms: list[HeckeEigenform]) -> list[HeckeEigenform]:
    def key(f):
        l3 = f.lambdas[3] if f.truncation >= 3 else 0
        return (float(f.lambdas[2]), float(l3))

    return sorted(forms, key=key)


def _attach_norms(forms: list[HeckeEigenform], precision: int) -> None:
    k = forms[0].weight
    with mp.workdps(precision + 10):
        g = mp.gamma(k - 1) / mp.power(4 * mp.pi, k - 1)
        for f in forms:
            value, err = petersson_norm_quadrature(f, precision)
            f.petersson_norm = value
            f.norm_error = err
            f.omega = g / value


def _build_eigen_basis(k: int, N: int, precision: int) -> EigenBasis:
    d = cusp_dimension(k)
    if d == 0:
        return EigenBasis(k, N, precision, [])
    n_eff = max(N, norm_truncation(k, precision), 3 * (d + 1))
    basis = victor_miller_basis(k, n_eff)
    coords_list, dps = _eigen_from_basis(k, basis, precision)
    forms = [_form_from_coords(k, basis, v, dps, precision) for v in coords_list]
    forms = _sort_forms(forms)
    _attach_norms(forms, precision)
    return EigenBasis(k, n_eff, precision, forms)


@lru_cache(maxsize=64)
def _eigen_basis_memo(k: int, N: int, precision: int) -> EigenBasis:
    return _build_eigen_basis(k, N, precision)


def eigen_basis(k: int, N: int = 50, precision: int = 30, cache_dir: str | Path | None = None) -> EigenBasis:
    """Hecke eigenbasis of S_k with lambda_f(n) for n <= N (at least), sorted by lambda_f(2)."""
    if k % 2 or k < 2:
        raise ValueError("weight must be a positive even integer")
    if cache_dir is None:
        return _eigen_basis_memo(int(k), int(N), int(precision))
    path = cache_path(cache_dir, k, N, precision)
    if path.exists():
        try:
            return load_eigen_basis(path, k, N, precision)
        except (ValueError, KeyError, TypeError, json.JSONDecodeError, ArithmeticError) as exc:
            log.warning("rebuilding corrupted cache %s (%s)", path, exc)
    eb = _eigen_basis_memo(int(k), int(N), int(precision))
    save_eigen_basis(eb, path, N)
    return eb


# ---------------------------------------------------------------------------
# Petersson norm


def _region_a(k: int, lambdas, prec: int):
    """Integral over {|x| <= 1/2, y >= 1}: sum lambda(n)^2 Gamma(k-1, 4 pi n) / (4 pi)^{k-1}."""
    N = len(lambdas) - 1
    with mp.workdps(prec):
        four_pi = 4 * mp.pi
        terms = [lambdas[n] ** 2 * mp.gammainc(k - 1, four_pi * n) for n in range(1, N + 1)]
        value = mp.fsum(terms) / mp.power(four_pi, k - 1)
        # tail with |lambda(n)| <= d(n) <= 2 sqrt(n) and Gamma(s, x) <= x^{s-1} e^{-x} / (1 - (s-1)/x)
        n1 = N + 1
        x = four_pi * n1
        if x <= 2 * (k - 2):
            raise ValueError("coefficient truncation too short for the norm tail bound")

        def b(n):
            xx = four_pi * n
            return 4 * n * mp.power(xx, k - 2) * mp.exp(-xx) / (1 - (k - 2) / xx) / mp.power(four_pi, k - 1)

        r = b(n1 + 1) / b(n1)
        tail = b(n1) / (1 - r)
    return value, tail


def _region_b(k: int, lam: np.ndarray, nodes: int) -> tuple[float, float]:
    """2 * int_0^{1/2} int_{sqrt(1-x^2)}^1 y^{k-2} |f|^2 dy dx in double; returns (value, max y^{k/2-1}|f|)."""
    gx, wx = gauss_legendre(nodes)
    x = 0.25 + 0.25 * gx
    wxs = 0.25 * wx
    ylo = np.sqrt(1.0 - x * x)
    half = 0.5 * (1.0 - ylo)
    y = 0.5 * (1.0 + ylo)[:, None] + half[:, None] * gx[None, :]
    wy = half[:, None] * wx[None, :]
    n = np.arange(1, len(lam))
    logn = 0.5 * (k - 1) * np.log(n)
    total = 0.0
    fmax = 0.0
    for i0 in range(0, nodes, 16):
        xs, ys, ws = x[i0 : i0 + 16], y[i0 : i0 + 16], wy[i0 : i0 + 16] * wxs[i0 : i0 + 16, None]
        # y^{(k-2)/2} f(x + iy), terms summed in log-magnitude form
        logmag = 0.5 * (k - 2) * np.log(ys)[:, :, None] + logn - 2 * np.pi * n * ys[:, :, None]
        phase = np.exp(2j * np.pi * n[None, :] * xs[:, None])[:, None, :]
        fy = np.sum(lam[1:] * np.exp(logmag) * phase, axis=2)
        total += float(np.sum(ws * np.abs(fy) ** 2))
        fmax = max(fmax, float(np.max(np.abs(fy))))
    return 2.0 * total, fmax


def _region_b_truncation_bound(k: int, N: int, fmax: float) -> float:
    # |sum_{n>N} c(n) q^n| <= sum 2 n^{k/2} e^{-sqrt3 pi n}; integrand perturbation over area < 0.05
    y0 = math.sqrt(3) / 2
    tail = 0.0
    for n in range(N + 1, N + 400):
        tail += math.exp(math.log(2) + 0.5 * k * math.log(n) - 2 * math.pi * n * y0)
    tail *= y0 ** (0.5 * (k - 2)) if k >= 2 else 1.0
    return 2 * 0.05 * (2 * fmax * tail + tail * tail)


def petersson_norm_quadrature(f, precision: int = 30, nodes: int = 48) -> tuple[mp.mpf, float]:
    """(f, f) over the standard fundamental domain; returns (value, error bound).

    ``f`` is a HeckeEigenform or a QExpansion of a cusp form.  The y >= 1
    strip is exact; the lower region uses tensor Gauss-Legendre with the node
    count doubled until successive values agree.
    """
    if isinstance(f, HeckeEigenform):
        k, coeffs = f.weight, f.qexp.coefficients
    else:
        k, coeffs = f.weight, f.coefficients
    N = len(coeffs) - 1
    if N < norm_truncation(k, min(precision, 12)):
        raise ValueError(f"q-expansion truncation N={N} too short for the norm; raise N")
    with mp.workdps(precision + 10):
        half = mp.mpf(k - 1) / 2
        lambdas = [mp.mpf(0)] + [mp.mpf(coeffs[n]) / mp.power(n, half) for n in range(1, N + 1)]
    a_val, a_tail = _region_a(k, lambdas, precision + 10)
    lam = np.array([float(x) for x in lambdas])
    prev, _ = _region_b(k, lam, nodes)
    for _ in range(4):
        nodes *= 2
        cur, fmax = _region_b(k, lam, nodes)
        diff = abs(cur - prev)
        if diff <= 1e-13 * abs(cur):
            break
        prev = cur
    else:
        raise ArithmeticError("fundamental-domain quadrature did not converge")
    err = diff + 1e-13 * abs(cur) + _region_b_truncation_bound(k, N, fmax) + float(a_tail)
    with mp.workdps(precision + 10):
        value = a_val + mp.mpf(cur)
    return value, err


# ---------------------------------------------------------------------------
# cache (JSON)


def cache_key(k: int, N: int, precision: int) -> str:
    blob = json.dumps({"version": CACHE_VERSION, "k": int(k), "N": int(N), "precision": int(precision)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


def cache_path(cache_dir: str | Path, k: int, N: int, precision: int) -> Path:
    return Path(cache_dir) / f"eigenbasis_k{k}_{cache_key(k, N, precision)}.json"


def eigen_basis_to_dict(eb: EigenBasis, requested_N: int | None = None) -> dict:
    digits = eb.precision + 10
    basis = victor_miller_basis(eb.weight, eb.truncation)
    return {
        "version": CACHE_VERSION,
        "weight": eb.weight,
        "requested_truncation": int(requested_N if requested_N is not None else eb.truncation),
        "truncation": eb.truncation,
        "precision": eb.precision,
        "basis": [[str(a) for a in g.coefficients] for g in basis],
        "forms": [
            {
                "coords": [mp.nstr(v, digits) for v in f.coords],
                "lambda": [mp.nstr(x, digits) for x in f.lambdas],
                "petersson_norm": mp.nstr(f.petersson_norm, digits),
                "norm_error": f.norm_error,
                "omega": mp.nstr(f.omega, digits),
            }
            for f in eb.forms
        ],
    }


def eigen_basis_from_dict(doc: dict) -> EigenBasis:
    if doc.get("version") != CACHE_VERSION:
        raise ValueError("cache version mismatch")
    k, N, precision = int(doc["weight"]), int(doc["truncation"]), int(doc["precision"])
    basis = [QExpansion(k, tuple(int(a) for a in g), N) for g in doc["basis"]]
    if len(basis) != cusp_dimension(k) or len(doc["forms"]) != len(basis):
        raise ValueError("cached dimension does not match the weight")
    forms = []
    dps = _eigen_dps(basis, precision)
    for entry in doc["forms"]:
        with mp.workdps(precision + 10):
            coords = [mp.mpf(v) for v in entry["coords"]]
        f = _form_from_coords(k, basis, coords, dps, precision)
        with mp.workdps(precision + 10):
            stored = [mp.mpf(x) for x in entry["lambda"]]
            if len(stored) != N + 1:
                raise ValueError("cached lambda table has the wrong length")
            tol = mp.mpf(10) ** (-precision)
            if any(abs(a - b) > tol * max(1, abs(b)) for a, b in zip(stored, f.lambdas)):
                raise ValueError("cached lambda values inconsistent with coordinates")
            f.petersson_norm = mp.mpf(entry["petersson_norm"])
            f.norm_error = float(entry["norm_error"])
            f.omega = mp.mpf(entry["omega"])
        if not f.omega > 0:
            raise ValueError("cached omega not positive")
        forms.append(f)
    return EigenBasis(k, N, precision, forms)


def save_eigen_basis(eb: EigenBasis, path: str | Path, requested_N: int | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(eigen_basis_to_dict(eb, requested_N), indent=1), encoding="utf-8")
    tmp.replace(path)


def load_eigen_basis(path: str | Path, k: int, N: int, precision: int) -> EigenBasis:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if (doc.get("weight"), doc.get("requested_truncation"), doc.get("precision")) != (k, N, precision):
        raise ValueError("cache key mismatch")
    return eigen_basis_from_dict(doc)


# ---------------------------------------------------------------------------
# harmonic weights from the trace formula


@dataclass
class HarmonicWeights:
    weights: list  # aligned with EigenBasis.forms
    n_values: list
    condition_number: float
    max_relative_gap: float  # against the norm-quadrature route


def default_test_indices(d: int) -> list[int]:
    """1 followed by the first d-1 primes."""
    return [1] + sieve_primes(60 + 10 * d).tolist()[: d - 1]


def harmonic_weights_via_petersson(k: int, basis: EigenBasis | None = None, precision: int = 30,
                                   n_values: list[int] | None = None) -> HarmonicWeights:
    """Solve sum_f omega_f lambda_f(n_j) = RHS(1, n_j) for the weights omega_f."""
    from .petersson import petersson_rhs

    basis = basis or eigen_basis(k, 50, precision)
    d = basis.dimension
    if d == 0:
        return HarmonicWeights([], [], 1.0, 0.0)
    n_values = list(n_values or default_test_indices(d))
    if len(n_values) != d or len(set(n_values)) != d:
        raise ValueError("need d distinct indices n_j")
    with mp.workdps(precision + 10):
        A = mp.matrix([[f.lambdas[n] for f in basis.forms] for n in n_values])
        b = mp.matrix([petersson_rhs(1, n, k, tolerance=10.0 ** (-precision), precision=precision).value
                       for n in n_values])
        cond = mp.norm(A, 1) * mp.norm(mp.inverse(A), 1)
        if cond > mp.mpf(10) ** (precision / 2):
            raise ArithmeticError(f"ill-conditioned weight system (cond {mp.nstr(cond, 3)}); choose other n_j")
        w = mp.lu_solve(A, b)
        weights = [w[i] for i in range(d)]
        gap = max(abs(wi / f.omega - 1) for wi, f in zip(weights, basis.forms))
    return HarmonicWeights(weights, n_values, float(cond), float(gap))
