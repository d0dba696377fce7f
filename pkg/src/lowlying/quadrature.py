"""Gauss-Legendre helpers shared by the transform and integral code."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights mapped to [a, b]."""
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def panel_nodes(a: float, b: float, width: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule: panels of at most ``width`` with ``n`` nodes each."""
    if b <= a:
        return np.zeros(0), np.zeros(0)
    panels = max(1, int(np.ceil((b - a) / width - 1e-12)))
    edges = np.linspace(a, b, panels + 1)
    x, w = gauss_legendre(n)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(f, a: float, b: float, n: int = 200):
    """Fixed-order Gauss-Legendre integral of a vectorized ``f``."""
    if b <= a:
        return 0.0
    t, w = gl_nodes(a, b, n)
    return np.sum(w * f(t))
