"""One-dimensional quadrature rules used to assemble cubatures."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, lo: float = -1.0, hi: float = 1.0):
    """n-point Gauss-Legendre nodes (ascending) and weights on [lo, hi].

    Weights on [-1, 1] are 2 / ((1 - x^2) P_n'(x)^2).
    """
    if n < 1:
        raise ValueError("need at least one node")
    x, w = _leggauss(n)
    half = 0.5 * (hi - lo)
    return half * x + 0.5 * (hi + lo), half * w


def chebyshev_gauss(n: int):
    """Chebyshev-Gauss rule for int_{-1}^{1} f(x) / sqrt(1 - x^2) dx.

    Nodes cos((2i - 1) pi / (2n)), i = 1..n (descending), all weights pi / n.
    """
    if n < 1:
        raise ValueError("need at least one node")
    i = np.arange(1, n + 1)
    return np.cos((2 * i - 1) * np.pi / (2 * n)), np.full(n, np.pi / n)


def periodic_trapezoid(n: int, period: float = 2 * np.pi, start: float = 0.0):
    """Equispaced nodes start + period (j - 1)/n with equal weights period / n."""
    if n < 1:
        raise ValueError("need at least one node")
    return start + period * np.arange(n) / n, np.full(n, period / n)


def trapezoid(n: int, lo: float, hi: float):
    """Composite trapezoid on [lo, hi]; a single node sits at the midpoint."""
    if n < 1:
        raise ValueError("need at least one node")
    if n == 1:
        return np.array([0.5 * (lo + hi)]), np.array([hi - lo])
    x = np.linspace(lo, hi, n)
    h = (hi - lo) / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return x, w
