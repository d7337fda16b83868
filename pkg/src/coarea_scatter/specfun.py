"""Cylinder functions of integer order and the wavefunctions built from them.

Values come from scipy.special (AMOS / Cephes), which meets the 1e-12 relative
accuracy needed here for |m| <= 200 and moderate arguments. Negative orders are
reduced with the reflection identities so they hold bit-for-bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, SingularityError

MAX_ORDER = 200


class CylinderKind(enum.Enum):
    BESSEL_J = "J"
    BESSEL_Y = "Y"
    HANKEL1 = "H"


@dataclass(frozen=True)
class CylinderFn:
    """A cylinder function C_m of one kind and integer order."""

    order: int
    kind: CylinderKind

    def __post_init__(self):
        if int(self.order) != self.order:
            raise DomainError(f"order must be an integer, got {self.order!r}")
        if abs(self.order) > MAX_ORDER:
            raise DomainError(f"|order| <= {MAX_ORDER} required, got {self.order}")

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self, x):
        return evaluate_derivative(self, x)


def _raw(kind: CylinderKind, m: int, x):
    if kind is CylinderKind.BESSEL_J:
        return special.jv(m, x)
    if kind is CylinderKind.BESSEL_Y:
        return special.yv(m, x)
    return special.hankel1(m, x)


def _check_argument(kind: CylinderKind, x: np.ndarray):
    if kind is CylinderKind.BESSEL_J:
        if np.any(x < 0):
            raise DomainError("Bessel J is evaluated for x >= 0 only")
    elif np.any(x <= 0):
        raise DomainError(f"{kind.name} requires x > 0")


def _order_value(kind: CylinderKind, m: int, x):
    """C_m(x) with C_{-m} = (-1)^m C_m applied explicitly."""
    if m == 0 or (kind is CylinderKind.BESSEL_J and m > 0):
        return _raw(kind, m, x)
    if m < 0:
        v = _raw(kind, -m, x)
        return -v if (-m) % 2 else v
    return _raw(kind, m, x)


def _finite(kind, m, x, value):
    bad = ~np.isfinite(value)
    if np.any(bad):
        raise OverflowError(f"{kind.name}_{m} overflows at x = {np.asarray(x)[bad].ravel()[0]!r}")
    return value


def evaluate(fn: CylinderFn, x):
    """C_m(x). Scalars in, scalars out; arrays broadcast."""
    xa = np.asarray(x, dtype=float)
    _check_argument(fn.kind, xa)
    v = _finite(fn.kind, fn.order, xa, _order_value(fn.kind, fn.order, xa))
    return v[()] if v.ndim == 0 else v


def evaluate_derivative(fn: CylinderFn, x):
    """C'_m(x) = (C_{m-1}(x) - C_{m+1}(x)) / 2."""
    xa = np.asarray(x, dtype=float)
    _check_argument(fn.kind, xa)
    m = fn.order
    lo = _order_value(fn.kind, m - 1, xa)
    hi = _order_value(fn.kind, m + 1, xa)
    v = _finite(fn.kind, m, xa, 0.5 * (lo - hi))
    return v[()] if v.ndim == 0 else v


def bessel_j(m: int, x):
    return evaluate(CylinderFn(m, CylinderKind.BESSEL_J), x)


def bessel_y(m: int, x):
    return evaluate(CylinderFn(m, CylinderKind.BESSEL_Y), x)


def hankel1(m: int, x):
    return evaluate(CylinderFn(m, CylinderKind.HANKEL1), x)


@dataclass
class FieldSample:
    """Wavefunction value and Cartesian gradient; arrays share leading shape."""

    value: np.ndarray
    gradient: np.ndarray  # (..., 2)

    def normal_derivative(self, normal) -> np.ndarray:
        normal = np.asarray(normal)
        return self.gradient[..., 0] * normal[..., 0] + self.gradient[..., 1] * normal[..., 1]


def outgoing_source(m: int, kappa: float, r, r_src) -> FieldSample:
    """H_m(kappa R) e^{i m phi} about ``r_src`` and its gradient.

    ``r`` and ``r_src`` are points (..., 2) and broadcast against each other.
    """
    d = np.asarray(r, dtype=float) - np.asarray(r_src, dtype=float)
    R = np.hypot(d[..., 0], d[..., 1])
    if np.any(R == 0.0):
        raise SingularityError("field point coincides with the source singularity")
    phi = np.arctan2(d[..., 1], d[..., 0])
    x = kappa * R
    h = _finite(CylinderKind.HANKEL1, m, x, _order_value(CylinderKind.HANKEL1, m, x))
    dh = 0.5 * (_order_value(CylinderKind.HANKEL1, m - 1, x) - _order_value(CylinderKind.HANKEL1, m + 1, x))
    ang = np.exp(1j * m * phi)
    value = h * ang
    d_radial = kappa * dh * ang
    d_angular = 1j * m * value / R
    c, s = np.cos(phi), np.sin(phi)
    grad = np.stack([d_radial * c - d_angular * s, d_radial * s + d_angular * c], axis=-1)
    return FieldSample(value=value, gradient=grad)


def outgoing_multipoles(order: int, kappa: float, r, r_src):
    """H_m(kappa R) e^{i m phi} for m = -order..order about one center, with gradients.

    Orders are generated by upward recurrence from H_0 and H_1, which is stable for
    the Hankel function. Returns (values (2 order + 1, ...), gradients (2 order + 1, ..., 2)).
    """
    d = np.asarray(r, dtype=float) - np.asarray(r_src, dtype=float)
    R = np.hypot(d[..., 0], d[..., 1])
    if np.any(R == 0.0):
        raise SingularityError("field point coincides with the source singularity")
    x = kappa * R
    e = (d[..., 0] + 1j * d[..., 1]) / R  # e^{i phi}
    top = order + 1
    H = np.empty((top + 1,) + R.shape, dtype=complex)
    # Cephes j0/y0/j1/y1 are several times faster than the AMOS Hankel routine
    H[0] = special.j0(x) + 1j * special.y0(x)
    H[1] = special.j1(x) + 1j * special.y1(x)
    for n in range(1, top):
        H[n + 1] = (2 * n / x) * H[n] - H[n - 1]
    _finite(CylinderKind.HANKEL1, top, x, H[top])
    # W_n = H_n e^{i n phi} for n = -top..top
    W = np.empty((2 * top + 1,) + R.shape, dtype=complex)
    W[top] = H[0]
    ep = np.ones(R.shape, dtype=complex)
    for n in range(1, top + 1):
        ep = ep * e
        W[top + n] = H[n] * ep
        W[top - n] = (-1) ** n * H[n] * np.conj(ep)
    lo, hi = W[0:-2], W[2:]
    vals = W[1:-1]
    grad = np.stack([0.5 * kappa * (lo - hi), 0.5j * kappa * (lo + hi)], axis=-1)
    return vals, grad


def plane_wave(kappa: float, r) -> FieldSample:
    """Incident field e^{i kappa x}."""
    p = np.asarray(r, dtype=float)
    value = np.exp(1j * kappa * p[..., 0])
    grad = np.stack([1j * kappa * value, np.zeros_like(value)], axis=-1)
    return FieldSample(value=value, gradient=grad)


def plane_wave_partial_sum(kappa: float, r, order: int) -> np.ndarray:
    """sum_{|m| <= order} i^m J_m(kappa |r|) e^{i m theta}."""
    p = np.asarray(r, dtype=float)
    rad = np.hypot(p[..., 0], p[..., 1])
    th = np.arctan2(p[..., 1], p[..., 0])
    total = np.zeros(rad.shape, dtype=complex)
    for m in range(-order, order + 1):
        total += ipow(m) * bessel_j(m, kappa * rad) * np.exp(1j * m * th)
    return total


def ipow(m: int) -> complex:
    """i^m without floating round-off."""
    return (1, 1j, -1, -1j)[m % 4]


def truncation_order(kappa: float, r_max: float) -> int:
    """Number of scattering modes |m| <= mu needed: ceil(3 kappa r_max)."""
    if kappa <= 0 or r_max <= 0:
        raise DomainError("kappa and r_max must be positive")
    # guard against 3*0.1*1 = 0.30000000000000004 style round-up
    x = 3.0 * kappa * r_max
    n = math.ceil(x)
    if n - x > 1 - 1e-12:
        n -= 1
    return int(n)
