"""Cubature grids over the transition region built from the coarea formula.

An ensemble surface integral

    int int F(rho(theta; z), theta, z) rho s dtheta dF(z)

is rewritten as an integral over the annulus r_min < r < r_max,

    int int sum_k F(r, theta, z_k) |grad z_k| f_Z(z_k) r dtheta dr,

where z_k runs over the fiber branches with rho(theta; z_k) = r. A grid stores
spatial nodes with positive weights for a (possibly singular) reference measure on
the annulus, and per node the branches with a branch fraction and a node factor that
turns the reference measure into the coarea density above. Each (node, branch) pair
is one entry; entry weights are branch_fraction * spatial_weight * node_factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .csvio import write_csv
from .errors import FiberSolveError, ParameterError
from .shape import (
    FIBER_RESIDUAL_TOL,
    STATIONARY_TOL,
    EllipseShape,
    PolygonShape,
    RandomOctagon,
    StarShape,
    fiber_solve,
)

TWO_PI = 2.0 * np.pi
GRID_COLUMNS = ["subdomain_id", "r", "theta", "weight", "branch_index", "z", "branch_fraction"]


@dataclass(frozen=True)
class CoareaGrid:
    shape: StarShape
    node_r: np.ndarray
    node_theta: np.ndarray
    spatial_weight: np.ndarray
    subdomain_id: np.ndarray
    entry_node: np.ndarray
    z: np.ndarray
    branch_fraction: np.ndarray
    node_factor: np.ndarray
    grad_z: np.ndarray
    density: np.ndarray
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in (self.node_r, self.node_theta, self.spatial_weight, self.z, self.node_factor, self.branch_fraction):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.node_r.size

    @property
    def n_entries(self) -> int:
        return self.z.size

    @property
    def r(self) -> np.ndarray:
        return self.node_r[self.entry_node]

    @property
    def theta(self) -> np.ndarray:
        return self.node_theta[self.entry_node]

    @property
    def weights(self) -> np.ndarray:
        """Per-entry cubature weights for the ensemble measure dS dF_Z."""
        return self.branch_fraction * self.spatial_weight[self.entry_node] * self.node_factor

    @property
    def branch_index(self) -> np.ndarray:
        idx = np.zeros(self.n_entries, dtype=int)
        starts = np.flatnonzero(np.r_[True, self.entry_node[1:] != self.entry_node[:-1]])
        for s, e in zip(starts, np.r_[starts[1:], self.n_entries]):
            idx[s:e] = np.arange(e - s)
        return idx

    def branches(self, i: int):
        """(z, branch_fraction) arrays for node i."""
        sel = self.entry_node == i
        return self.z[sel], self.branch_fraction[sel]

    def fraction_sums(self) -> np.ndarray:
        return np.bincount(self.entry_node, weights=self.branch_fraction, minlength=self.n_nodes)

    def spatial_rows(self):
        for i in range(self.n_nodes):
            yield self.subdomain_id[i], self.node_r[i], self.node_theta[i], self.spatial_weight[i]

    def rows(self):
        bi = self.branch_index
        for k in range(self.n_entries):
            i = self.entry_node[k]
            yield (
                self.subdomain_id[i],
                self.node_r[i],
                self.node_theta[i],
                self.spatial_weight[i],
                bi[k],
                self.z[k],
                self.branch_fraction[k],
            )

    def to_csv(self, path, metadata=None):
        return write_csv(path, GRID_COLUMNS, self.rows(), metadata)


def _assemble(shape, r, theta, sw, sub, ref_density, branch_lists, label, params):
    """Build entry arrays from per-node branch lists.

    ``ref_density`` is the density of the reference measure at each node, so that
    node_factor = r |grad z| f_Z / (branch_fraction * ref_density).
    """
    en, zz, bf, nf, gz, dn = [], [], [], [], [], []
    for i, brs in enumerate(branch_lists):
        if not brs:
            raise FiberSolveError(f"no fiber branch at node r={r[i]!r}, theta={theta[i]!r}")
        frac = 1.0 / len(brs)
        for b in brs:
            en.append(i)
            zz.append(b.z)
            bf.append(frac)
            gz.append(b.grad_z_magnitude)
            dn.append(b.density)
            nf.append(r[i] * b.grad_z_magnitude * b.density / (frac * ref_density[i]))
    return CoareaGrid(
        shape=shape,
        node_r=np.asarray(r, dtype=float),
        node_theta=np.asarray(theta, dtype=float),
        spatial_weight=np.asarray(sw, dtype=float),
        subdomain_id=np.asarray(sub, dtype=int),
        entry_node=np.asarray(en, dtype=int),
        z=np.asarray(zz, dtype=float),
        branch_fraction=np.asarray(bf, dtype=float),
        node_factor=np.asarray(nf, dtype=float),
        grad_z=np.asarray(gz, dtype=float),
        density=np.asarray(dn, dtype=float),
        label=label,
        params=params,
    )


def angular_count(r: float, n_base: int) -> int:
    """Angular nodes on the ring of radius r: n_base * floor(r), at least one."""
    return max(1, int(n_base * np.floor(r)))


def ellipse_grid(a: float, b: float, M: int, N_base: int) -> CoareaGrid:
    """Chebyshev-Gauss in r times trapezoid in theta for the rotating ellipse.

    The reference measure is dr / sqrt((a - r)(r - b)) * dtheta / (2 pi), so the spatial
    weights pi / (M N_i) sum to pi. Each node carries the four rotation angles
    theta -/+ t_r and theta -/+ t_r +/- pi with fraction 1/4.
    """
    if M < 1 or N_base < 1:
        raise ParameterError("M and N_base must be at least 1")
    shape = EllipseShape(a, b)
    if shape.is_circle:
        return circle_grid(a, M, N_base)
    if not a > b:
        raise ParameterError(f"ellipse needs a > b > 0, got a={a}, b={b}")
    x, _ = quadrature.chebyshev_gauss(M)
    radii = 0.5 * (a - b) * x + 0.5 * (a + b)
    r, th, sw, sub, dens, brs = [], [], [], [], [], []
    for i, ri in enumerate(radii):
        n = angular_count(ri, N_base)
        t = TWO_PI * np.arange(n) / n
        ref = 1.0 / (TWO_PI * np.sqrt((a - ri) * (ri - b)))
        for tj in t:
            r.append(ri)
            th.append(tj)
            sw.append(np.pi / (M * n))
            sub.append(i + 1)
            dens.append(ref)
            brs.append(fiber_solve(shape, tj, ri))
    return _assemble(shape, r, th, sw, sub, dens, brs, "ellipse", dict(a=a, b=b, M=M, N_base=N_base))


def circle_grid(a: float, M: int, N_base: int, n_gpc: int = 0) -> CoareaGrid:
    """Degenerate ellipse: a ring at r = a; rotation angles by a periodic trapezoid.

    The ensemble measure is a dtheta dalpha / (2 pi) on the fixed circle. The ring has
    M * N_base * floor(a) nodes; each carries K = max(4, n_gpc + 2) rotation angles.
    """
    shape = EllipseShape(a, a)
    n = M * angular_count(a, N_base)
    K = max(4, n_gpc + 2)
    th = TWO_PI * np.arange(n) / n
    alpha = TWO_PI * np.arange(K) / K
    en = np.repeat(np.arange(n), K)
    return CoareaGrid(
        shape=shape,
        node_r=np.full(n, float(a)),
        node_theta=th,
        spatial_weight=np.full(n, TWO_PI / n),
        subdomain_id=np.ones(n, dtype=int),
        entry_node=en,
        z=np.tile(alpha, n),
        branch_fraction=np.full(n * K, 1.0 / K),
        node_factor=np.full(n * K, float(a)),
        grad_z=np.full(n * K, np.nan),
        density=np.full(n * K, 1.0 / TWO_PI),
        label="circle",
        params=dict(a=a, M=M, N_base=N_base, K=K),
    )


def desingularizing_factor(shape: PolygonShape, q, theta):
    """omega_q(theta): 1/sin of the angular distance to a stationary segment end.

    Near a vertex whose radius does not move, the radial extent of the segment's sweep
    vanishes linearly while s / |d rho/dz| blows up like its inverse; the factor moves
    that singularity into the reference measure.
    """
    q = np.asarray(q)
    th0, th1 = shape.segment_bounds(q)
    t = shape._ext[0] + np.mod(np.asarray(theta) - shape._ext[0], TWO_PI)
    still = shape.stationary_vertices()
    start_still = still[np.mod(q - 2, shape.Q)]
    end_still = still[q - 1]
    w = np.ones(np.shape(t))
    w = np.where(start_still, w / np.sin(t - th0), w)
    w = np.where(end_still, w / np.sin(th1 - t), w)
    return w


def polygon_grid(shape: PolygonShape, M_q: int, N_q: int) -> CoareaGrid:
    """Repeated Gauss-Legendre rules per polygon segment.

    On segment q the angle runs over N_q Gauss-Legendre nodes and, at each angle, the
    radius over M_q Gauss-Legendre nodes between rho(theta; z_lo) and rho(theta; z_hi).
    The reference measure is omega_q(theta) dr dtheta. Radii must be monotone in z so
    that each node has a single fiber branch.
    """
    if M_q < 1 or N_q < 1:
        raise ParameterError("M_q and N_q must be at least 1")
    if not isinstance(shape, PolygonShape):
        raise ParameterError("polygon_grid needs a polygon shape")
    tau, wt = quadrature.gauss_legendre(N_q)
    sig, ws = quadrature.gauss_legendre(M_q)
    r, th, sw, sub, ref, qs = [], [], [], [], [], []
    for q in range(1, shape.Q + 1):
        lo, hi = shape.segment_bounds(q)
        half = 0.5 * (hi - lo)
        theta = half * tau + 0.5 * (hi + lo)
        rlo = shape.rho(theta, shape.param_lo)
        rhi = shape.rho(theta, shape.param_hi)
        r0, r1 = np.minimum(rlo, rhi), np.maximum(rlo, rhi)
        om = desingularizing_factor(shape, np.full(N_q, q), theta)
        for j in range(N_q):
            ext = 0.5 * (r1[j] - r0[j])
            for i in range(M_q):
                r.append(ext * sig[i] + 0.5 * (r1[j] + r0[j]))
                th.append(np.mod(theta[j], TWO_PI))
                sw.append(half * wt[j] * ws[i] * om[j] * ext)
                sub.append(q)
                ref.append(om[j])
                qs.append(q)
    r = np.array(r)
    th = np.array(th)
    if isinstance(shape, RandomOctagon):
        z = np.asarray(shape.fiber_z(th, r))
        if np.any(np.isnan(z)):
            raise FiberSolveError("closed-form fiber left the parameter domain")
        res = np.abs(shape.rho(th, z) - r)
        if np.any(res > FIBER_RESIDUAL_TOL * r):
            raise FiberSolveError(f"fiber residual {res.max():.3e} exceeds tolerance")
        d = shape.drho_dz(th, z)
        if np.any(np.abs(d) < STATIONARY_TOL):
            raise FiberSolveError("grid node sits on a stationary boundary point")
        gz = shape.s_over_drho_dz(th, z)
        brs = [[_Branch(z[k], gz[k], float(shape.density(z[k])))] for k in range(r.size)]
    else:
        brs = [fiber_solve(shape, th[k], r[k]) for k in range(r.size)]
    return _assemble(shape, r, th, sw, sub, ref, brs, shape.name, dict(M_q=M_q, N_q=N_q))


@dataclass(frozen=True)
class _Branch:
    z: float
    grad_z_magnitude: float
    density: float


def coarea_grid(shape: StarShape, M: int, N: int, n_gpc: int = 0) -> CoareaGrid:
    """Dispatch to the grid family matching ``shape``."""
    if isinstance(shape, EllipseShape):
        if shape.is_circle:
            return circle_grid(shape.a, M, N, n_gpc)
        return ellipse_grid(shape.a, shape.b, M, N)
    if isinstance(shape, PolygonShape):
        return polygon_grid(shape, M, N)
    raise ParameterError(f"no coarea grid family for {type(shape).__name__}")


@dataclass(frozen=True)
class NaiveGrid:
    """Tensor grid in (theta, z) with trapezoid weights for dS dF_Z."""

    shape: StarShape
    theta_nodes: np.ndarray
    z_nodes: np.ndarray
    weights: np.ndarray  # (N, M), includes the line element rho s and dF/dz

    @property
    def theta(self):
        return np.repeat(self.theta_nodes, self.z_nodes.size)

    @property
    def z(self):
        return np.tile(self.z_nodes, self.theta_nodes.size)

    @property
    def r(self):
        return self.shape.rho(self.theta, self.z)

    def rows(self):
        w = self.weights.ravel()
        for t, z, r, wk in zip(self.theta, self.z, self.r, w):
            yield t, z, r, wk


def naive_grid(shape: StarShape, M: int, N: int) -> NaiveGrid:
    """N uniform angles times M uniform parameter values."""
    if M < 1 or N < 1:
        raise ParameterError("M and N must be at least 1")
    th, wt = quadrature.periodic_trapezoid(N)
    if shape.periodic:
        z, wz = quadrature.periodic_trapezoid(M, shape.param_hi - shape.param_lo, shape.param_lo)
    else:
        z, wz = quadrature.trapezoid(M, shape.param_lo, shape.param_hi)
    T, Z = np.meshgrid(th, z, indexing="ij")
    line = shape.rho(T, Z) * shape.metric_s(T, Z)
    w = wt[:, None] * wz[None, :] * np.asarray(shape.density(Z)) * line
    return NaiveGrid(shape, th, z, w)


def ensemble_integral(grid, f) -> complex:
    """Cubature of f(r, theta, z) against dS dF_Z on a coarea or naive grid.

    ``f`` is called once with entry arrays and must broadcast.
    """
    vals = np.asarray(f(grid.r, grid.theta, grid.z))
    w = grid.weights.ravel() if isinstance(grid, NaiveGrid) else grid.weights
    vals = np.broadcast_to(vals, w.shape)
    return complex(np.sum(w * vals)) if np.iscomplexobj(vals) else float(np.sum(w * vals))
