"""Weighted gridfunctions, target/information functionals and reconstruction kernels.

Sign and pairing conventions. With outward normal nu and total field u (u = 0 on the
boundary), the scattering coefficients are

    b_m = -(i/4) int J_m(kappa r) e^{-i m theta} d_nu u dS,

and for any outgoing wavefunction psi radiating from inside the obstacle

    int psi d_nu u dS = -int (u_inc d_nu psi - psi d_nu u_inc) dS.

Targets g_m and information functionals f_l are paired with d_nu u bilinearly, so a
kernel with g_m ~ sum_l c_l f_l (in the ensemble L2 norm) gives b_m ~ sum_l c_l a_l.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import quadrature
from .csvio import write_csv
from .errors import DimensionError, ParameterError, PlacementError, SingularityError
from .shape import PolygonShape, StarShape, surface_sample
from .specfun import bessel_j, outgoing_multipoles, outgoing_source, plane_wave

TARGET_SCALE = -0.25j
SOURCE_RADIUS_FACTOR = 0.95
DEFAULT_SEGMENT_POINTS = 160
DEFAULT_SMOOTH_POINTS = 4096


# -----------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class Target:
    """g_{m,n}(r, theta, z) = -(i/4) J_m(kappa r) e^{-i m theta} P_n(z) / gamma_n."""

    m: int
    kappa: float
    n: int = 0
    basis: Optional[object] = None  # anything with evaluate(n, z) and norm(n)

    def __call__(self, r, theta, z):
        v = TARGET_SCALE * bessel_j(self.m, self.kappa * np.asarray(r)) * np.exp(-1j * self.m * np.asarray(theta))
        if self.n == 0 and self.basis is None:
            return v
        if self.basis is None:
            raise ParameterError("targets with n > 0 need a gPC basis")
        return v * self.basis.evaluate(self.n, z) / self.basis.norm(self.n)


@dataclass(frozen=True)
class InfoSource:
    """Outgoing wavefunction H_m(kappa |x - c(z)|) e^{i m angle(x - c(z))}.

    The singular point c(z) = factor * rho(theta_l; z) (cos theta_l, sin theta_l) follows
    the random boundary. With ``mod_n`` set, the functional is multiplied by P_n(z).
    """

    shape: StarShape
    kappa: float
    angle: float
    m: int = 0
    factor: float = SOURCE_RADIUS_FACTOR
    mod_n: int = 0
    basis: Optional[object] = None

    def center(self, z):
        return self.shape.center(self.angle, z, self.factor)

    def modulation(self, z):
        if self.mod_n == 0:
            return np.ones(np.shape(z))
        return self.basis.evaluate(self.mod_n, z)

    def field(self, points, z):
        """FieldSample of the unmodulated wavefunction at ``points`` for realization z."""
        return outgoing_source(self.m, self.kappa, points, self.center(z))

    def __call__(self, r, theta, z):
        r, theta, z = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float), np.asarray(z, float))
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        c = self.center(z)
        try:
            v = outgoing_source(self.m, self.kappa, pts, c).value
        except SingularityError as exc:
            raise SingularityError(f"source at angle {self.angle!r} hits a grid node") from exc
        return v * self.modulation(z)


@dataclass(frozen=True)
class SourceSet:
    """L singular points at angles 2 pi (l - 1)/L with multipoles |m| <= order.

    Functionals are ordered by modulation index, then location, then multipole order.
    Evaluation goes through the Hankel recurrence, one pass per location.
    """

    shape: StarShape
    kappa: float
    L: int
    order: int = 0
    factor: float = SOURCE_RADIUS_FACTOR
    mod_orders: tuple = (0,)
    basis: Optional[object] = None

    def __post_init__(self):
        if self.L < 1 or self.order < 0:
            raise ParameterError("need L >= 1 and a non-negative multipole order")
        if any(n > 0 for n in self.mod_orders) and self.basis is None:
            raise ParameterError("modulated sources need a gPC basis")

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.L) / self.L

    @property
    def per_location(self) -> int:
        return 2 * self.order + 1

    def __len__(self) -> int:
        return len(self.mod_orders) * self.L * self.per_location

    def functionals(self) -> list[InfoSource]:
        return [InfoSource(self.shape, self.kappa, t, m, self.factor, n, self.basis)
                for n in self.mod_orders for t in self.angles for m in range(-self.order, self.order + 1)]

    def labels(self) -> list[tuple[int, int, int]]:
        """(modulation n, location l, multipole m) per functional."""
        return [(n, l, m) for n in self.mod_orders for l in range(self.L) for m in range(-self.order, self.order + 1)]

    def _unmodulated(self, points, z, with_gradient=False):
        z = np.asarray(z, dtype=float)
        vals, grads = [], []
        for t in self.angles:
            c = self.shape.center(t, z, self.factor)
            try:
                v, g = outgoing_multipoles(self.order, self.kappa, points, c)
            except SingularityError as exc:
                raise SingularityError(f"source at angle {t!r} hits an evaluation point") from exc
            vals.append(v)
            grads.append(g)
        V = np.concatenate(vals)
        return (V, np.concatenate(grads)) if with_gradient else V

    def modulations(self, z) -> np.ndarray:
        """(len(mod_orders), ...) factors P_n(z)."""
        return np.array([np.ones(np.shape(z)) if n == 0 else self.basis.evaluate(n, z) for n in self.mod_orders])

    def values(self, r, theta, z) -> np.ndarray:
        """All functionals at the points (r, theta) with fiber parameter z; shape (len, npts)."""
        r, theta, z = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float), np.asarray(z, float))
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        V = self._unmodulated(pts, z)
        mods = self.modulations(z)
        return np.concatenate([V * mods[k] for k in range(len(self.mod_orders))])

    def rhs(self, surf: "RealizationSurface", kappa: float) -> np.ndarray:
        """Unmodulated null-field right-hand sides at one realization (L * per_location)."""
        return self.on_surface(surf, kappa)[1]

    def on_surface(self, surf: "RealizationSurface", kappa: float):
        """(unmodulated values at the surface points, null-field right-hand sides)."""
        for t in self.angles:
            _check_inside(self.shape, InfoSource(self.shape, self.kappa, t, 0, self.factor), surf.z)
        V, Gr = self._unmodulated(surf.points, surf.z, with_gradient=True)
        inc = plane_wave(kappa, surf.points)
        dpsi = Gr[..., 0] * surf.normals[:, 0] + Gr[..., 1] * surf.normals[:, 1]
        integrand = inc.value * dpsi - V * inc.normal_derivative(surf.normals)
        return V, -(integrand @ surf.dS)


def uniform_sources(shape: StarShape, kappa: float, L: int, order: int = 0, factor: float = SOURCE_RADIUS_FACTOR,
                    mod_orders: Sequence[int] = (0,), basis=None) -> list[InfoSource]:
    """L source positions at angles 2 pi (l - 1)/L, each with multipoles |m| <= order."""
    if L < 1:
        raise ParameterError("need at least one source")
    out = []
    for n in mod_orders:
        for l in range(L):
            for m in range(-order, order + 1):
                out.append(InfoSource(shape, kappa, 2 * np.pi * l / L, m, factor, n, basis))
    return out


# -----------------------------------------------------------------------------
# gridfunctions


@dataclass(frozen=True)
class PointGrid:
    """Bare cubature over (r, theta, z) points; used for single realizations."""

    r: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class WeightedGridfunction:
    """Functional values times the square roots of the cubature weights."""

    entries: np.ndarray
    grid: object = field(repr=False, default=None)

    def dot(self, other: "WeightedGridfunction") -> complex:
        """sum f conj(g), the discrete ensemble inner product."""
        if self.entries.shape != other.entries.shape:
            raise DimensionError("gridfunctions live on different grids")
        return complex(np.vdot(other.entries, self.entries))

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def discretize(grid, fn) -> WeightedGridfunction:
    vals = np.asarray(fn(grid.r, grid.theta, grid.z), dtype=complex)
    vals = np.broadcast_to(vals, grid.weights.shape)
    return WeightedGridfunction(vals * np.sqrt(grid.weights), grid)


def discretize_many(grid, fns) -> np.ndarray:
    """Rows of entries, one per functional (a list of callables or a SourceSet)."""
    r, t, z = grid.r, grid.theta, grid.z
    sw = np.sqrt(grid.weights)
    if isinstance(fns, SourceSet):
        return fns.values(r, t, z) * sw
    out = np.empty((len(fns), sw.size), dtype=complex)
    for k, fn in enumerate(fns):
        out[k] = np.asarray(fn(r, t, z)) * sw
    return out


# -----------------------------------------------------------------------------
# kernels


@dataclass
class ReconstructionKernel:
    coefficients: np.ndarray  # (targets, sources)
    residual_norms: np.ndarray
    target_norms: np.ndarray
    bound: float
    eps_ev: float
    eps_ed: float
    labels: list = field(default_factory=list)  # (m, n) per target
    rank: int = 0

    @property
    def satisfied(self) -> np.ndarray:
        return self.residual_norms <= self.eps_ev * self.target_norms

    @property
    def n_unsatisfied(self) -> int:
        return int(np.count_nonzero(~self.satisfied))

    @property
    def frobenius_error(self) -> float:
        """||G - G_hat|| in the Frobenius norm."""
        return float(np.sqrt(np.sum(self.residual_norms**2)))

    @property
    def relative_frobenius_error(self) -> float:
        return self.frobenius_error / float(np.sqrt(np.sum(self.target_norms**2)))

    @property
    def max_row_error(self) -> float:
        return float(self.residual_norms.max())

    @property
    def max_relative_row_error(self) -> float:
        return float(np.max(self.residual_norms / self.target_norms))

    def apply(self, outcomes) -> np.ndarray:
        outcomes = np.asarray(outcomes)
        if outcomes.shape[-1] != self.coefficients.shape[1]:
            raise DimensionError("outcome vector length differs from the source count")
        return self.coefficients @ outcomes

    def rows(self):
        mx = np.abs(self.coefficients).max(axis=1) if self.coefficients.size else np.zeros(0)
        sat = self.satisfied
        for k, (m, n) in enumerate(self.labels):
            yield m, n, self.residual_norms[k], bool(sat[k]), mx[k]

    def to_csv(self, path, metadata=None):
        return write_csv(path, ["target_m", "target_n", "residual", "satisfied", "max_abs_coefficient"],
                         self.rows(), metadata)


def _tsvd_solve(A, B, eps_ed, smax=None):
    """Truncated-SVD least squares; returns (X, rank, largest singular value)."""
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    if s.size == 0:
        return np.zeros((A.shape[1], B.shape[1]), dtype=complex), 0, 0.0
    smax = s[0] if smax is None else smax
    k = int(np.count_nonzero(s > eps_ed * smax))
    X = Vh[:k].conj().T @ ((U[:, :k].conj().T @ B) / s[:k, None])
    return X, k, smax


def _clip(x, bound):
    mag = np.abs(x)
    over = mag > bound
    x = x.copy()
    x[over] *= bound / mag[over]
    return x, over


def solve_kernel(targets, sources, eps_ev: float, eps_ed: float, labels=None) -> ReconstructionKernel:
    """Bounded least-squares kernels g_m ~ sum_l c_{m,l} f_l.

    Truncated SVD (singular values below eps_ed * sigma_max discarded), then entries
    beyond eps_ev / eps_ed are clipped radially onto the bound and the remaining free
    coefficients are re-solved once against the clipped remainder.
    """
    if not eps_ev >= eps_ed > 0:
        raise ParameterError("need eps_ev >= eps_ed > 0")
    G = _rows(targets)
    F = _rows(sources)
    if G.shape[1] != F.shape[1]:
        raise DimensionError(f"targets have {G.shape[1]} entries, sources {F.shape[1]}")
    bound = eps_ev / eps_ed
    A = F.T
    B = G.T
    X, rank, smax = _tsvd_solve(A, B, eps_ed)
    for j in range(B.shape[1]):
        x, over = _clip(X[:, j], bound)
        if over.any():
            free = ~over
            if free.any():
                rhs = B[:, j] - A[:, over] @ x[over]
                xf, _, _ = _tsvd_solve(A[:, free], rhs[:, None], eps_ed, smax)
                x[free] = _clip(xf[:, 0], bound)[0]
        X[:, j] = x
    C = X.T
    res = np.linalg.norm(G - C @ F, axis=1)
    gn = np.linalg.norm(G, axis=1)
    if labels is None:
        labels = [(getattr(t, "m", k), getattr(t, "n", 0)) for k, t in enumerate(targets)]
    return ReconstructionKernel(C, res, gn, bound, eps_ev, eps_ed, list(labels), rank)


def _rows(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.atleast_2d(vectors)
    if not len(vectors):
        raise DimensionError("empty functional list")
    rows = [v.entries if isinstance(v, WeightedGridfunction) else np.asarray(v) for v in vectors]
    n = {r.shape for r in rows}
    if len(n) != 1:
        raise DimensionError("gridfunctions disagree in length")
    return np.vstack(rows)


# -----------------------------------------------------------------------------
# null-field right-hand sides


def surface_rule(shape: StarShape, n: Optional[int] = None):
    """Angles and dtheta-weights for integrating over one realization.

    Gauss-Legendre with ``n`` points per segment between breakpoints (default 160),
    or an n-point periodic trapezoid for smooth shapes (default 4096).
    """
    bp = np.sort(np.asarray(shape.breakpoints(), dtype=float))
    if bp.size == 0:
        return quadrature.periodic_trapezoid(n or DEFAULT_SMOOTH_POINTS)
    n = n or DEFAULT_SEGMENT_POINTS
    edges = np.r_[bp, bp[0] + 2 * np.pi]
    th, w = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, wx = quadrature.gauss_legendre(n, lo, hi)
        th.append(x)
        w.append(wx)
    return np.concatenate(th), np.concatenate(w)


def parameter_rule(shape: StarShape, n: int):
    """Nodes and probability weights for dF_Z (summing to one)."""
    if n < 1:
        raise ParameterError("need at least one parameter node")
    span = shape.param_hi - shape.param_lo
    if shape.periodic:
        z, w = quadrature.periodic_trapezoid(n, span, shape.param_lo)
    else:
        z, w = quadrature.gauss_legendre(n, shape.param_lo, shape.param_hi)
    return z, w * np.asarray(shape.density(z)) * np.ones_like(z)


@dataclass(frozen=True)
class RealizationSurface:
    """Quadrature on one boundary: points, outward normals, dS weights."""

    theta: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    dS: np.ndarray
    z: float

    @classmethod
    def build(cls, shape: StarShape, z: float, rule=None):
        th, w = rule if rule is not None else surface_rule(shape)
        ss = surface_sample(shape, th, z)
        return cls(th, ss.position, ss.unit_outward_normal, w * ss.line_element, float(z))


def _check_inside(shape, source, z):
    c = np.asarray(source.center(z), dtype=float)
    rad = np.hypot(c[0], c[1])
    ang = np.arctan2(c[1], c[0])
    if not rad < float(shape.rho(ang, z)):
        raise PlacementError(f"source at angle {source.angle!r} lies outside the obstacle for z={z!r}")


def nullfield_rhs(shape: StarShape, z: float, source: InfoSource, kappa: float, angular_rule=None,
                  surface: Optional[RealizationSurface] = None) -> complex:
    """-oint (u_inc d_nu psi - psi d_nu u_inc) dS over the realization z (unmodulated psi)."""
    _check_inside(shape, source, z)
    surf = surface if surface is not None else RealizationSurface.build(shape, z, angular_rule)
    inc = plane_wave(kappa, surf.points)
    psi = outgoing_source(source.m, source.kappa, surf.points, source.center(z))
    integrand = inc.value * psi.normal_derivative(surf.normals) - psi.value * inc.normal_derivative(surf.normals)
    return complex(-np.sum(surf.dS * integrand))


def rhs_vector(shape: StarShape, z: float, sources, kappa: float, angular_rule=None) -> np.ndarray:
    """nullfield_rhs for every source at one realization (one surface build)."""
    surf = RealizationSurface.build(shape, z, angular_rule)
    return np.array([nullfield_rhs(shape, z, s, kappa, surface=surf) for s in sources])


def information_outcomes(shape: StarShape, sources, kappa: float, z_rule=None, angular_rule=None) -> np.ndarray:
    """a_l = int P_{n_l}(z) rhs_l(z) dF_Z(z), with P_0 = 1.

    ``z_rule`` is a (nodes, probability weights) pair or a node count; default 128 nodes.
    """
    if z_rule is None or isinstance(z_rule, (int, np.integer)):
        z_rule = parameter_rule(shape, int(z_rule or 128))
    zs, wz = z_rule
    if isinstance(sources, SourceSet):
        return _set_outcomes(shape, sources, kappa, zs, wz, angular_rule)
    out = np.zeros(len(sources), dtype=complex)
    mods = np.array([[s.modulation(z) for z in zs] for s in sources]) if sources else np.zeros((0, len(zs)))
    if shape.parameter_free:
        # one boundary for every z: only the modulations vary
        return rhs_vector(shape, zs[0], sources, kappa, angular_rule) * (mods @ np.asarray(wz))
    for k, (z, w) in enumerate(zip(zs, wz)):
        try:
            vals = rhs_vector(shape, z, sources, kappa, angular_rule)
        except PlacementError as exc:
            raise PlacementError(f"{exc} (parameter node z={z!r})") from exc
        out += w * mods[:, k] * vals
    return out


def _set_outcomes(shape, sources: SourceSet, kappa, zs, wz, angular_rule):
    n_base = sources.L * sources.per_location
    acc = np.zeros((len(sources.mod_orders), n_base), dtype=complex)
    if shape.parameter_free:
        surf = RealizationSurface.build(shape, zs[0], angular_rule)
        mods = sum(w * sources.modulations(z) for z, w in zip(zs, wz))
        return (mods[:, None] * sources.rhs(surf, kappa)[None, :]).ravel()
    for z, w in zip(zs, wz):
        surf = RealizationSurface.build(shape, z, angular_rule)
        try:
            vals = sources.rhs(surf, kappa)
        except PlacementError as exc:
            raise PlacementError(f"{exc} (parameter node z={z!r})") from exc
        acc += w * sources.modulations(z)[:, None] * vals[None, :]
    return acc.ravel()
