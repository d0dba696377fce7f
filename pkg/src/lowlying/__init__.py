"""Low-lying zeros of level-one holomorphic cusp forms: Petersson trace
formula checks, explicit-formula one-level densities and their expansion in
inverse powers of log K.
"""
from __future__ import annotations

__version__ = "0.1.0"
