"""Random star-shaped boundaries rho(theta; z) driven by a single random parameter z."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import FiberSolveError, ParameterError, SingularityError

TWO_PI = 2.0 * np.pi
STATIONARY_TOL = 1e-10
FIBER_RESIDUAL_TOL = 1e-12
BRACKET_POINTS = 64


@dataclass(frozen=True)
class SurfaceSample:
    position: np.ndarray  # (..., 2)
    unit_outward_normal: np.ndarray  # (..., 2)
    metric_s: np.ndarray
    line_element: np.ndarray  # |dS/dtheta| = rho * s


@dataclass(frozen=True)
class FiberBranch:
    """A parameter value z with rho(theta; z) = r at a fixed spatial point."""

    z: float
    grad_z_magnitude: float  # |grad z_r| = s / |d rho / dz|
    density: float  # dF/dz at z
    drho_dz: float = float("nan")

    @property
    def weight(self) -> float:
        """Coarea density |grad z_r| dF/dz carried by this branch."""
        return self.grad_z_magnitude * self.density


class StarShape:
    """Family of star-shaped boundaries, one per value of the random parameter.

    Subclasses provide ``rho``, ``drho_dtheta``, ``drho_dz`` (vectorized, broadcasting
    ``theta`` against ``z``) and the parameter law. ``fiber_roots`` has a generic
    bracketing implementation that subclasses replace with closed forms when known.
    """

    name = "star"
    r_min: float
    r_max: float
    param_lo: float
    param_hi: float
    periodic: bool = False

    @property
    def parameter_free(self) -> bool:
        """True when every realization is the same boundary."""
        return False

    def rho(self, theta, z):
        raise NotImplementedError

    def drho_dtheta(self, theta, z):
        raise NotImplementedError

    def drho_dz(self, theta, z):
        raise NotImplementedError

    def density(self, z):
        z = np.asarray(z, dtype=float)
        return np.full(z.shape, 1.0 / (self.param_hi - self.param_lo))[()]

    def breakpoints(self, z=None) -> np.ndarray:
        """Angles in [0, 2 pi) where rho fails to be smooth in theta."""
        return np.empty(0)

    def metric_s(self, theta, z):
        r = self.rho(theta, z)
        return np.sqrt(1.0 + (self.drho_dtheta(theta, z) / r) ** 2)

    def center(self, angle, z, factor: float = 1.0):
        """The point factor * rho(angle; z) (cos angle, sin angle), shape (..., 2)."""
        r = factor * self.rho(angle, z)
        angle = np.broadcast_to(angle, np.shape(r))
        return np.stack([r * np.cos(angle), r * np.sin(angle)], axis=-1)

    def contains(self, point, z) -> bool:
        """True if ``point`` lies strictly inside the realization at ``z``."""
        p = np.asarray(point, dtype=float)
        rad = np.hypot(p[..., 0], p[..., 1])
        ang = np.arctan2(p[..., 1], p[..., 0])
        return bool(np.all(rad < self.rho(ang, z)))

    # -- fibers ------------------------------------------------------------
    def fiber_roots(self, theta: float, r: float) -> list[float]:
        """All z in the parameter domain with rho(theta; z) = r (generic path).

        Monotone z-intervals are found from sign changes of d rho/dz on a 64-point
        grid; each bracketed root is bisected to 1e-14 and Newton-polished once.
        """
        lo, hi = self.param_lo, self.param_hi
        if self.periodic:
            grid = lo + (hi - lo) * np.arange(BRACKET_POINTS + 1) / BRACKET_POINTS
        else:
            grid = np.linspace(lo, hi, BRACKET_POINTS + 1)

        def g(z):
            return float(self.rho(theta, z)) - r

        def dg(z):
            return float(self.drho_dz(theta, z))

        # split into monotone pieces at zeros of d rho / dz
        cuts = [grid[0]]
        d = np.array([dg(z) for z in grid])
        for k in range(len(grid) - 1):
            if d[k] == 0.0:
                if k > 0:
                    cuts.append(grid[k])
            elif d[k] * d[k + 1] < 0:
                cuts.append(optimize.brentq(dg, grid[k], grid[k + 1], xtol=1e-15))
            if k + 1 < len(grid) - 1 and d[k + 1] == 0.0:
                pass
        cuts.append(grid[-1])
        cuts = sorted(set(cuts))

        roots = []
        for u, v in zip(cuts[:-1], cuts[1:]):
            gu, gv = g(u), g(v)
            if gu == 0.0:
                roots.append(u)
            elif gu * gv < 0:
                z = optimize.brentq(g, u, v, xtol=1e-14, rtol=4 * np.finfo(float).eps)
                slope = dg(z)
                if slope != 0.0:
                    zn = z - g(z) / slope
                    if u <= zn <= v and abs(g(zn)) <= abs(g(z)):
                        z = zn
                roots.append(z)
        if not self.periodic and g(cuts[-1]) == 0.0:
            roots.append(cuts[-1])
        out = []
        for z in sorted(roots):
            if self.periodic:
                z = lo + np.mod(z - lo, hi - lo)
            if not any(abs(z - w) < 1e-12 for w in out):
                out.append(float(z))
        return out


# -----------------------------------------------------------------------------
# ellipse


class EllipseShape(StarShape):
    """Elliptic cross-section a >= b rotated by a uniform angle z in [0, 2 pi).

    ``a == b`` is the circle; its transition region is empty.
    """

    name = "ellipse"
    periodic = True
    param_lo = 0.0
    param_hi = TWO_PI

    def __init__(self, a: float, b: float):
        if not (b > 0 and a >= b):
            raise ParameterError(f"ellipse needs a >= b > 0, got a={a}, b={b}")
        self.a = float(a)
        self.b = float(b)
        self.r_min = self.b
        self.r_max = self.a
        if self.a == self.b:
            self.name = "circle"

    @property
    def is_circle(self) -> bool:
        return self.a == self.b

    @property
    def parameter_free(self) -> bool:
        return self.is_circle

    def _q(self, t):
        return self.b**2 * np.cos(t) ** 2 + self.a**2 * np.sin(t) ** 2

    def rho(self, theta, z):
        t = np.subtract(theta, z)
        return self.a * self.b / np.sqrt(self._q(t))

    def log_derivative(self, t):
        """rho'(t) / rho(t) as a function of t = theta - z."""
        return -0.5 * (self.a**2 - self.b**2) * np.sin(2 * t) / self._q(t)

    def drho_dtheta(self, theta, z):
        t = np.subtract(theta, z)
        return self.rho(theta, z) * self.log_derivative(t)

    def drho_dz(self, theta, z):
        return -self.drho_dtheta(theta, z)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        return np.full(z.shape, 1.0 / TWO_PI)[()]

    def intersection_angle(self, r):
        """t_r in (0, pi/2) with rho(t_r) = r, for b < r < a."""
        a, b = self.a, self.b
        r = np.asarray(r, dtype=float)
        c = (a / r) * np.sqrt((r * r - b * b) / (a * a - b * b))
        return np.arccos(np.clip(c, -1.0, 1.0))

    def fiber_roots(self, theta: float, r: float) -> list[float]:
        if self.is_circle or not (self.b < r < self.a):
            return []
        t = float(self.intersection_angle(r))
        zs = [theta - t, theta + t, theta - t + np.pi, theta + t - np.pi]
        return [float(np.mod(z, TWO_PI)) for z in zs]


def ellipse_shape(a: float, b: float) -> EllipseShape:
    if not (a > b > 0):
        raise ParameterError(f"ellipse needs a > b > 0, got a={a}, b={b}")
    return EllipseShape(a, b)


def circle_shape(a: float) -> EllipseShape:
    """The degenerate ellipse a = b; rotation leaves it unchanged."""
    return EllipseShape(a, a)


def dt_r_dr(a: float, b: float, r):
    """d t_r / dr = -a b / (r sqrt((r^2 - b^2)(a^2 - r^2))) on b < r < a."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= b) or np.any(r >= a):
        raise SingularityError("dt_r/dr is singular at r = a, r = b and undefined outside (b, a)")
    v = -a * b / (r * np.sqrt((r * r - b * b) * (a * a - r * r)))
    return v[()] if v.ndim == 0 else v


# -----------------------------------------------------------------------------
# polygons


class PolygonShape(StarShape):
    """Star-shaped polygon with fixed vertex angles and random vertex radii.

    Vertex q sits at angle theta_q with radius rho_q(z); segment q joins vertex q-1
    to vertex q, with vertex 0 identified with vertex Q. Segments are numbered 1..Q.
    """

    name = "polygon"

    def __init__(
        self,
        vertex_radii: Callable,
        vertex_angles,
        vertex_radii_dz: Optional[Callable] = None,
        param_domain=(-1.0, 1.0),
        r_bounds=None,
    ):
        ang = np.asarray(vertex_angles, dtype=float)
        if ang.ndim != 1 or ang.size < 3:
            raise ParameterError("need at least three vertex angles")
        if np.any(np.diff(ang) <= 0) or ang[0] < 0 or ang[-1] > TWO_PI:
            raise ParameterError("vertex angles must increase strictly within [0, 2 pi]")
        if ang[-1] - ang[0] >= TWO_PI:
            raise ParameterError("vertex angles must not wrap past a full turn")
        ext = np.concatenate([[ang[-1] - TWO_PI], ang])
        if np.any(np.diff(ext) >= np.pi):
            raise ParameterError("each segment must subtend less than pi about the origin")
        self.angles = ang
        self._ext = ext
        self.Q = ang.size
        self._radii = vertex_radii
        self._radii_dz = vertex_radii_dz
        self.param_lo, self.param_hi = map(float, param_domain)

        zs = np.linspace(self.param_lo, self.param_hi, 257)
        rad = np.asarray(self.vertex_radii(zs))
        if rad.shape != (zs.size, self.Q):
            raise ParameterError("vertex_radii(z) must return Q radii per z")
        if np.any(rad <= 0) or not np.all(np.isfinite(rad)):
            raise ParameterError("vertex radii must be positive over the parameter domain")
        if r_bounds is None:
            th = np.linspace(0, TWO_PI, 2049)
            vals = self.rho(th[:, None], zs[None, :])
            r_bounds = (float(vals.min()), float(rad.max()))
        self.r_min, self.r_max = map(float, r_bounds)

    def vertex_radii(self, z):
        return np.asarray(self._radii(np.asarray(z, dtype=float)), dtype=float)

    def vertex_radii_dz(self, z):
        if self._radii_dz is not None:
            return np.asarray(self._radii_dz(np.asarray(z, dtype=float)), dtype=float)
        h = 1e-6 * (self.param_hi - self.param_lo)
        z = np.asarray(z, dtype=float)
        return (self.vertex_radii(z + h) - self.vertex_radii(z - h)) / (2 * h)

    def breakpoints(self, z=None) -> np.ndarray:
        return np.mod(self.angles, TWO_PI)

    def segment_index(self, theta) -> np.ndarray:
        """Segment number q in 1..Q containing each angle (right-closed at vertices)."""
        theta = np.asarray(theta, dtype=float)
        t0 = self._ext[0]
        red = t0 + np.mod(theta - t0, TWO_PI)
        q = np.searchsorted(self._ext, red, side="right")
        return np.clip(q, 1, self.Q)

    def segment_bounds(self, q):
        q = np.asarray(q)
        return self._ext[q - 1], self._ext[q]

    def _segment_data(self, theta, z):
        theta, z = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(z, dtype=float))
        q = self.segment_index(theta)
        th0, th1 = self.segment_bounds(q)
        t0 = self._ext[0]
        th = t0 + np.mod(theta - t0, TWO_PI)
        R = self.vertex_radii(z)
        i1 = (q - 1)[..., None]
        i0 = np.mod(q - 2, self.Q)[..., None]
        rq = np.take_along_axis(R, i1, axis=-1)[..., 0]
        rq0 = np.take_along_axis(R, i0, axis=-1)[..., 0]
        return q, th, th0, th1, rq0, rq, z, i0, i1

    def rho(self, theta, z):
        q, th, th0, th1, rq0, rq, *_ = self._segment_data(theta, z)
        den = rq * np.sin(th1 - th) + rq0 * np.sin(th - th0)
        v = rq * rq0 * np.sin(th1 - th0) / den
        return v[()] if v.ndim == 0 else v

    def drho_dtheta(self, theta, z):
        q, th, th0, th1, rq0, rq, *_ = self._segment_data(theta, z)
        den = rq * np.sin(th1 - th) + rq0 * np.sin(th - th0)
        r = rq * rq0 * np.sin(th1 - th0) / den
        v = r * (rq * np.cos(th1 - th) - rq0 * np.cos(th - th0)) / den
        return v[()] if v.ndim == 0 else v

    def drho_dz(self, theta, z):
        q, th, th0, th1, rq0, rq, zz, i0, i1 = self._segment_data(theta, z)
        dR = self.vertex_radii_dz(zz)
        drq = np.take_along_axis(dR, i1, axis=-1)[..., 0]
        drq0 = np.take_along_axis(dR, i0, axis=-1)[..., 0]
        den = rq * np.sin(th1 - th) + rq0 * np.sin(th - th0)
        r = rq * rq0 * np.sin(th1 - th0) / den
        v = r**2 / np.sin(th1 - th0) * (np.sin(th - th0) * drq / rq**2 + np.sin(th1 - th) * drq0 / rq0**2)
        return v[()] if v.ndim == 0 else v

    def metric_s(self, theta, z):
        # |r_q - r_{q-1}| / (rho_q sin(theta_q - theta) + rho_{q-1} sin(theta - theta_{q-1}))
        q, th, th0, th1, rq0, rq, *_ = self._segment_data(theta, z)
        den = rq * np.sin(th1 - th) + rq0 * np.sin(th - th0)
        length = np.sqrt(rq**2 + rq0**2 - 2 * rq * rq0 * np.cos(th1 - th0))
        v = length / den
        return v[()] if v.ndim == 0 else v

    def s_over_drho_dz(self, theta, z):
        """s / |d rho/dz| for fixed vertex angles (closed form).

        Equals |r_q - r_{q-1}| / (rho |sin(theta - theta_{q-1}) rho_{q-1} rho_q'/rho_q
        + sin(theta_q - theta) rho_q rho_{q-1}'/rho_{q-1}|).
        """
        q, th, th0, th1, rq0, rq, zz, i0, i1 = self._segment_data(theta, z)
        dR = self.vertex_radii_dz(zz)
        drq = np.take_along_axis(dR, i1, axis=-1)[..., 0]
        drq0 = np.take_along_axis(dR, i0, axis=-1)[..., 0]
        den = rq * np.sin(th1 - th) + rq0 * np.sin(th - th0)
        r = rq * rq0 * np.sin(th1 - th0) / den
        length = np.sqrt(rq**2 + rq0**2 - 2 * rq * rq0 * np.cos(th1 - th0))
        mix = np.sin(th - th0) * rq0 * drq / rq + np.sin(th1 - th) * rq * drq0 / rq0
        v = length / (r * np.abs(mix))
        return v[()] if v.ndim == 0 else v

    def vertex_points(self, z) -> np.ndarray:
        R = self.vertex_radii(z)
        return np.stack([R * np.cos(self.angles), R * np.sin(self.angles)], axis=-1)

    def stationary_vertices(self) -> np.ndarray:
        """Boolean mask of vertices whose radius does not move with z."""
        zs = np.linspace(self.param_lo, self.param_hi, 33)
        return np.all(np.abs(self.vertex_radii_dz(zs)) < STATIONARY_TOL, axis=0)


class RandomOctagon(PolygonShape):
    """Octagon with rho_q = a + b (1 - (-1)^q) z / 2 at theta_q = q pi / 4, z ~ U[-1, 1].

    Odd vertices move between a - b and a + b; even vertices stay at radius a.
    """

    name = "octagon"

    def __init__(self, a: float, b: float):
        if not (a > b > 0):
            raise ParameterError(f"random octagon needs a > b > 0, got a={a}, b={b}")
        self.a, self.b = float(a), float(b)
        q = np.arange(1, 9)
        self._move = (1 - (-1.0) ** q) / 2  # 1 on odd vertices

        def radii(z):
            return self.a + self.b * self._move * np.asarray(z)[..., None]

        def radii_dz(z):
            return np.broadcast_to(self.b * self._move, np.shape(z) + (8,)).copy()

        super().__init__(radii, q * np.pi / 4, radii_dz, (-1.0, 1.0), r_bounds=(a - b, a + b))

    def fiber_z(self, theta, r):
        """Closed-form z_r on the segment containing theta (vectorized; nan if outside [-1, 1])."""
        theta, r = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(r, dtype=float))
        q = self.segment_index(theta)
        th0, th1 = self.segment_bounds(q)
        th = self._ext[0] + np.mod(theta - self._ext[0], TWO_PI)
        a, b = self.a, self.b
        sd = np.sin(th1 - th0)
        odd = (q % 2) == 1
        near = np.where(odd, np.sin(th - th0), np.sin(th1 - th))
        far = np.where(odd, np.sin(th1 - th), np.sin(th - th0))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (a / b) * (r * near / (a * sd - r * far) - 1.0)
        z = np.where((z >= -1.0) & (z <= 1.0), z, np.nan)
        return z[()] if z.ndim == 0 else z

    def fiber_roots(self, theta: float, r: float) -> list[float]:
        z = float(self.fiber_z(theta, r))
        return [] if np.isnan(z) else [z]


def polygon_shape(vertex_radii, vertex_angles, vertex_radii_dz=None, param_domain=(-1.0, 1.0)) -> PolygonShape:
    return PolygonShape(vertex_radii, vertex_angles, vertex_radii_dz, param_domain)


def random_octagon(a: float, b: float) -> RandomOctagon:
    return RandomOctagon(a, b)


# -----------------------------------------------------------------------------
# geometry queries


def surface_sample(shape: StarShape, theta, z) -> SurfaceSample:
    """Boundary point, outward unit normal, metric s and line element at (theta, z)."""
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(shape.rho(theta, z))
    rt = np.asarray(shape.drho_dtheta(theta, z))
    theta = np.broadcast_to(theta, r.shape)
    c, s = np.cos(theta), np.sin(theta)
    pos = np.stack([r * c, r * s], axis=-1)
    line = np.hypot(r, rt)
    nrm = np.stack([(rt * s + r * c) / line, (-rt * c + r * s) / line], axis=-1)
    return SurfaceSample(position=pos, unit_outward_normal=nrm, metric_s=line / r, line_element=line)


def fiber_solve(shape: StarShape, theta: float, r: float) -> list[FiberBranch]:
    """Fiber branches over the spatial point r (cos theta, sin theta).

    Branches where |d rho/dz| < 1e-10 (stationary points of the boundary) are dropped.
    Returns an empty list when no realization passes through the point.
    """
    out = []
    for z in shape.fiber_roots(float(theta), float(r)):
        res = abs(float(shape.rho(theta, z)) - r)
        if res > FIBER_RESIDUAL_TOL * r:
            raise FiberSolveError(f"fiber residual {res:.3e} at theta={theta}, r={r}, z={z}")
        d = float(shape.drho_dz(theta, z))
        if abs(d) < STATIONARY_TOL:
            continue
        s = float(shape.metric_s(theta, z))
        out.append(FiberBranch(z=z, grad_z_magnitude=s / abs(d), density=float(shape.density(z)), drho_dz=d))
    return out
