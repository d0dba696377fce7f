"""Test functions phi (through their compactly supported Fourier transforms),
weight functions h, and the Katz-Sarnak prediction integrals.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial

from .quadrature import gl_nodes, panel_nodes

QUAD_NODES = 200


# ---------------------------------------------------------------------------
# the standard bump exp(-1/(1-u^2)) on (-1, 1) and its derivatives


@lru_cache(maxsize=16)
def _bump_numerators(order: int) -> tuple[Polynomial, ...]:
    """Polynomials P_j with B^(j)(u) = B(u) P_j(u) / (1-u^2)^(2j)."""
    u = Polynomial([0.0, 1.0])
    q = 1 - u**2
    polys = [Polynomial([1.0])]
    for j in range(order):
        p = polys[-1]
        polys.append(-2 * u * p + q**2 * p.deriv() + 4 * j * u * q * p)
    return tuple(polys)


def bump_derivative(u, order: int = 0) -> np.ndarray:
    """d^order/du^order exp(-1/(1-u^2)), zero outside (-1, 1)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    inside = np.abs(u) < 1
    ui = u[inside]
    q = 1.0 - ui * ui
    base = -1.0 / q
    if order == 0:
        out[inside] = np.exp(base)
        return out
    p = _bump_numerators(order)[order](ui)
    # B * P / Q^(2j) assembled in log space to avoid 0 * inf near the ends
    with np.errstate(divide="ignore"):
        mag = base + np.log(np.abs(p)) - 2 * order * np.log(q)
    out[inside] = np.sign(p) * np.exp(mag)
    return out


# ---------------------------------------------------------------------------
# weight functions


@dataclass(frozen=True)
class WeightFunction:
    """Smooth bump ``scale * exp(-1/(1-u^2))`` mapped onto ``support``.

    The default is the reference weight on (1, 2).  ``scale = 0`` gives the
    zero weight, useful for linearity checks; quantities normalised by the
    integral of h are undefined for it.
    """

    support: tuple[float, float] = (1.0, 2.0)
    scale: float = 1.0

    def __post_init__(self):
        a, b = self.support
        if not 0 < a < b:
            raise ValueError("weight support must satisfy 0 < a < b")
        if self.scale < 0:
            raise ValueError("weight scale must be non-negative")
        object.__setattr__(self, "support", (float(a), float(b)))

    def _u(self, t):
        a, b = self.support
        return (2 * np.asarray(t, dtype=float) - a - b) / (b - a)

    def __call__(self, t):
        val = self.scale * bump_derivative(self._u(t))
        return val if np.ndim(t) else float(val)

    def derivative(self, t, order: int = 1):
        a, b = self.support
        val = self.scale * (2 / (b - a)) ** order * bump_derivative(self._u(t), order)
        return val if np.ndim(t) else float(val)

    def scaled(self, factor: float) -> "WeightFunction":
        return WeightFunction(self.support, self.scale * factor)

    def _nodes(self):
        return gl_nodes(*self.support, QUAD_NODES)

    @cached_property
    def integral(self) -> float:
        t, w = self._nodes()
        return float(np.sum(w * self(t)))

    @cached_property
    def log_integral(self) -> float:
        t, w = self._nodes()
        return float(np.sum(w * self(t) * np.log(t)))

    def negative_moment(self, ell: int) -> float:
        """Integral of t^(-ell) h(t)."""
        t, w = self._nodes()
        return float(np.sum(w * self(t) * t ** (-float(ell))))

    @property
    def log_mean(self) -> float:
        """(integral of h log) / (integral of h)."""
        if self.integral <= 0:
            raise ZeroDivisionError("zero weight has no log mean")
        return self.log_integral / self.integral

    def to_dict(self) -> dict:
        return {"support": list(self.support), "scale": self.scale}


REFERENCE_WEIGHT = WeightFunction()


def mellin_h(h: WeightFunction, s, deriv: int = 0):
    """Mellin transform int_0^inf t^(s-1) (log t)^deriv h(t) dt.

    ``s`` may be a complex scalar or array; the derivative order in s is
    realised by the factor (log t)^deriv under the integral.
    """
    t, w = h._nodes()
    logt = np.log(t)
    weights = w * h(t) * logt**deriv
    s_arr = np.asarray(s, dtype=complex)
    vals = np.exp(np.multiply.outer(s_arr - 1, logt)) @ weights
    if np.ndim(s) == 0:
        val = complex(vals)
        return val.real if np.isreal(s) else val
    return vals


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Even test function phi described through phihat = Fourier transform.

    ``family`` is ``"fejer"`` (triangle phihat, phi decays like 1/x^2 so it
    is not Schwartz) or ``"smoothed_bump"`` (phihat = g * g for a bump g on
    [-sigma/2, sigma/2], so phi = (g-check)^2 is Schwartz and non-negative).
    ``amplitude`` multiplies both phi and phihat; the bump family is
    normalised so that phihat(0) = amplitude, matching the Fejer family.
    """

    __test__ = False  # not a pytest class

    family: str
    sigma: float
    amplitude: float = 1.0
    schwartz: bool = field(init=False)

    def __post_init__(self):
        if self.family not in ("fejer", "smoothed_bump"):
            raise ValueError(f"unknown test-function family {self.family!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "schwartz", self.family == "smoothed_bump")

    # -- phihat and derivatives ---------------------------------------------
    def phihat(self, xi, order: int = 0):
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.family == "fejer":
            out = self._fejer_hat(xi_arr, order)
        else:
            out = self._bump_hat(xi_arr, order)
        out = self.amplitude * out
        return out if np.ndim(xi) else float(out[0])

    def _fejer_hat(self, xi, order):
        s = self.sigma
        ax = np.abs(xi)
        if order == 0:
            return np.maximum(1 - ax / s, 0.0)
        kinks = np.isclose(ax, 0.0, atol=1e-15) | np.isclose(ax, s, rtol=1e-15)
        if np.any(kinks):
            raise ValueError("Fejer phihat derivatives undefined at kinks 0, +-sigma")
        if order == 1:
            return np.where(ax < s, -np.sign(xi) / s, 0.0)
        return np.zeros_like(xi)

    @cached_property
    def _g_scale(self) -> float:
        # makes the integral of g^2, i.e. phihat(0), equal to one
        u, w = gl_nodes(-1.0, 1.0, QUAD_NODES)
        return float(1.0 / np.sqrt(self.sigma / 2 * np.sum(w * bump_derivative(u) ** 2)))

    def _g(self, xi, order=0):
        half = self.sigma / 2
        return self._g_scale * (1 / half) ** order * bump_derivative(np.asarray(xi) / half, order)

    def _bump_hat(self, xi, order):
        # (g * g)^(order) = g^(order) * g, integrated over the overlap of supports
        half = self.sigma / 2
        out = np.zeros(xi.shape)
        x, w = gl_nodes(-1.0, 1.0, QUAD_NODES)
        chunk = max(1, 2_000_000 // QUAD_NODES)
        for start in range(0, len(xi), chunk):
            xs = xi[start : start + chunk]
            lo = np.maximum(-half, xs - half)
            hi = np.minimum(half, xs + half)
            width = np.maximum(hi - lo, 0.0)
            eta = 0.5 * (lo + hi)[:, None] + 0.5 * width[:, None] * x[None, :]
            vals = self._g(eta) * self._g(xs[:, None] - eta, order)
            out[start : start + chunk] = 0.5 * width * (vals @ w)
        return out

    # -- phi ----------------------------------------------------------------
    def phi(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if self.family == "fejer":
            s = self.sigma
            out = s * np.sinc(s * x_arr) ** 2
        else:
            out = np.empty(x_arr.shape)
            # bucket |x| by powers of two so the rule resolves cos(2 pi x xi)
            level = np.maximum(0, np.ceil(np.log2(np.maximum(np.abs(x_arr), 1.0) / 64))).astype(int)
            for lv in np.unique(level).tolist():
                sel = np.nonzero(level == lv)[0]
                xi, w = self._phi_rule(lv)
                gvals = self._g(xi) * w
                for start in range(0, len(sel), 10000):
                    idx = sel[start : start + 10000]
                    gcheck = 2 * (np.cos(2 * np.pi * np.outer(x_arr[idx], xi)) @ gvals)
                    out[idx] = gcheck**2
        out = self.amplitude * out
        return out if np.ndim(x) else float(out[0])

    @lru_cache(maxsize=32)
    def _phi_rule(self, level: int):
        # |x| <= 64 * 2^level: panels shorter than a period of cos(2 pi x xi)
        half = self.sigma / 2
        if level == 0:
            return gl_nodes(0.0, half, QUAD_NODES)
        return panel_nodes(0.0, half, 1.0 / (64 * 2**level), 24)

    @cached_property
    def phi0(self) -> float:
        return self.phi(0.0)

    @cached_property
    def phihat0(self) -> float:
        return self.phihat(0.0)

    def phihat_integral(self, a: float, b: float) -> float:
        """Integral of phihat over [a, b] (clipped to the support)."""
        lo, hi = max(a, -self.sigma), min(b, self.sigma)
        if hi <= lo:
            return 0.0
        if self.family == "fejer":
            return self.amplitude * _fejer_antiderivative_diff(lo, hi, self.sigma)
        # split at 0 so that each piece is smooth
        total = 0.0
        for p, q in ((lo, min(hi, 0.0)), (max(lo, 0.0), hi)):
            if q > p:
                xi, w = gl_nodes(p, q, QUAD_NODES)
                total += float(np.sum(w * self.phihat(xi)))
        return total

    def to_dict(self) -> dict:
        return {"family": self.family, "sigma": self.sigma, "amplitude": self.amplitude}


def _fejer_antiderivative_diff(lo: float, hi: float, s: float) -> float:
    def prim(x):  # antiderivative of 1 - |x|/s, odd
        return x - np.sign(x) * x * x / (2 * s)

    return float(prim(hi) - prim(lo))


def make_fejer(sigma: float, amplitude: float = 1.0) -> TestFunction:
    return TestFunction("fejer", float(sigma), amplitude)


def make_smoothed_bump(sigma: float, amplitude: float = 1.0) -> TestFunction:
    return TestFunction("smoothed_bump", float(sigma), amplitude)


def make_test_function(family: str, sigma: float, amplitude: float = 1.0) -> TestFunction:
    return TestFunction(family, float(sigma), amplitude)


# ---------------------------------------------------------------------------
# Katz-Sarnak kernels


def eta(t):
    """Indicator of (-1, 1) with the value 1/2 at t = +-1."""
    t = np.abs(np.asarray(t, dtype=float))
    val = np.where(t < 1, 1.0, np.where(t == 1, 0.5, 0.0))
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class KSKernel:
    """Fourier-side densities: '+' = delta + eta/2, '-' = delta - eta/2 + 1,
    'mixed' = delta + 1/2."""

    sign: str

    def __post_init__(self):
        if self.sign not in ("+", "-", "mixed"):
            raise ValueError("kernel sign must be '+', '-' or 'mixed'")


def ks_prediction(phi: TestFunction, kernel: KSKernel | str) -> float:
    """Integral of phihat against the Katz-Sarnak density.

    Each component is evaluated separately: delta_0 gives phihat(0), eta/2
    gives half the integral over [-1, 1] (the endpoint values are a null
    set), and the constant 1 gives the full integral of phihat = phi(0).
    """
    if isinstance(kernel, str):
        kernel = KSKernel(kernel)
    if kernel.sign == "mixed":
        return 0.5 * (ks_prediction(phi, KSKernel("+")) + ks_prediction(phi, KSKernel("-")))
    delta_part = phi.phihat0
    eta_part = 0.5 * phi.phihat_integral(-1.0, 1.0)
    if kernel.sign == "+":
        return delta_part + eta_part
    return delta_part - eta_part + phi.phi0


# ---------------------------------------------------------------------------
# JSON config loading


def weight_from_config(doc: dict | None) -> WeightFunction:
    if not doc:
        return REFERENCE_WEIGHT
    unknown = set(doc) - {"support", "scale"}
    if unknown:
        raise ValueError(f"unknown weight-function keys: {sorted(unknown)}")
    support = tuple(doc.get("support", (1.0, 2.0)))
    if len(support) != 2:
        raise ValueError("weight support must have two endpoints")
    return WeightFunction(support, float(doc.get("scale", 1.0)))


def test_function_from_config(doc: dict) -> TestFunction:
    unknown = set(doc) - {"family", "sigma", "amplitude"}
    if unknown:
        raise ValueError(f"unknown test-function keys: {sorted(unknown)}")
    return make_test_function(doc.get("family", "smoothed_bump"), float(doc["sigma"]),
                              float(doc.get("amplitude", 1.0)))


test_function_from_config.__test__ = False


def load_functions(path: str | Path) -> tuple[TestFunction, WeightFunction]:
    """Read ``{"test_function": {...}, "weight": {...}}`` from a JSON file."""
    doc = json.loads(Path(path).read_text())
    return test_function_from_config(doc["test_function"]), weight_from_config(doc.get("weight"))


__all__ = [
    "WeightFunction", "REFERENCE_WEIGHT", "TestFunction", "KSKernel", "mellin_h",
    "make_fejer", "make_smoothed_bump", "make_test_function", "ks_prediction", "eta",
    "bump_derivative", "weight_from_config", "test_function_from_config", "load_functions",
]
