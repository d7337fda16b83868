"""Brute-force validation: null-field solves one realization at a time, averaged by Monte Carlo.

Each realization is discretized on its own boundary with dense per-segment
Gauss-Legendre (or trapezoid) quadrature, so this path shares no grid with the
coarea pipeline.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .csvio import write_csv
from .errors import FiberSolveError, PlacementError, SingularityError
from .nullfield import (
    PointGrid,
    RealizationSurface,
    SourceSet,
    Target,
    solve_kernel,
    surface_rule,
)
from .shape import StarShape
from .specfun import truncation_order

RNG_NAME = "numpy.random.PCG64"
MAX_FAILURE_FRACTION = 0.01


@dataclass
class McEstimate:
    modes: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray
    n_samples: int
    n_failed: int = 0
    n_unsatisfied: int = 0  # realizations with at least one unsatisfied target
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, modes, samples, **kw):
        samples = np.asarray(samples)
        n = samples.shape[0]
        if n < 2:
            raise ValueError("need at least two samples")
        mean = samples.mean(axis=0)
        hw = 1.96 * samples.std(axis=0, ddof=1) / np.sqrt(n)
        return cls(np.asarray(modes), mean, hw, n, samples=samples, **kw)


@dataclass
class RealizationResult:
    z: float
    b: np.ndarray
    satisfied: np.ndarray


def solve_realization(shape: StarShape, z: float, kappa: float, L: int, dense_rule=None,
                      eps_ev: float = 1e-4, eps_ed: float = 1e-8, source_order: int = 1,
                      mu: Optional[int] = None, full: bool = False):
    """Scattering coefficients b_m(z), m = -mu..mu, of one realization.

    Targets and sources are discretized on the boundary itself (weights dtheta * rho s),
    the same bounded kernel solve is applied, and outcomes come from the null-field
    identity on the same surface quadrature.
    """
    mu = truncation_order(kappa, shape.r_max) if mu is None else mu
    rule = dense_rule if dense_rule is not None else surface_rule(shape)
    surf = RealizationSurface.build(shape, z, rule)
    grid = PointGrid(
        r=np.hypot(surf.points[:, 0], surf.points[:, 1]),
        theta=surf.theta,
        z=np.full(surf.theta.shape, float(z)),
        weights=surf.dS,
    )
    sw = np.sqrt(grid.weights)
    modes = np.arange(-mu, mu + 1)
    G = np.array([Target(int(m), kappa)(grid.r, grid.theta, z) for m in modes]) * sw
    sources = SourceSet(shape, kappa, L, source_order)
    V, a = sources.on_surface(surf, kappa)
    F = V * sw
    kernel = solve_kernel(G, F, eps_ev, eps_ed, labels=[(int(m), 0) for m in modes])
    b = kernel.apply(a)
    if full:
        return RealizationResult(float(z), b, kernel.satisfied), kernel
    return b


def draw_parameters(shape: StarShape, n: int, seed: int) -> np.ndarray:
    """n i.i.d. uniform draws on the parameter domain from a seeded PCG64 stream."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return shape.param_lo + (shape.param_hi - shape.param_lo) * rng.random(n)


def monte_carlo(shape: StarShape, kappa: float, L: int, n_samples: int, seed: int, threads: int = 1,
                dense_rule=None, eps_ev: float = 1e-4, eps_ed: float = 1e-8, source_order: int = 1,
                mu: Optional[int] = None) -> McEstimate:
    """Sample mean of solve_realization over i.i.d. parameter draws.

    All draws are taken up front and results are gathered by index, so the estimate
    is bitwise independent of ``threads``. BLAS is pinned to one thread per task.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    mu = truncation_order(kappa, shape.r_max) if mu is None else mu
    zs = draw_parameters(shape, n_samples, seed)
    rule = dense_rule if dense_rule is not None else surface_rule(shape)

    def one(z):
        try:
            res, _ = solve_realization(shape, z, kappa, L, rule, eps_ev, eps_ed, source_order, mu, full=True)
            return res
        except (FiberSolveError, PlacementError, SingularityError, np.linalg.LinAlgError) as exc:
            return exc

    with threadpool_limits(limits=1):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, zs))
        else:
            results = [one(z) for z in zs]

    failed = [(z, r) for z, r in zip(zs, results) if isinstance(r, Exception)]
    if len(failed) > MAX_FAILURE_FRACTION * n_samples:
        z, exc = failed[0]
        raise RuntimeError(f"{len(failed)} of {n_samples} realizations failed; first at z={z!r}: {exc}")
    good = [r for r in results if not isinstance(r, Exception)]
    samples = np.array([r.b for r in good])
    unsat = sum(1 for r in good if not r.satisfied.all())
    meta = {"rng": RNG_NAME, "seed": seed, "n_samples": n_samples, "kappa": kappa, "L": L}
    return McEstimate.from_samples(np.arange(-mu, mu + 1), samples, n_failed=len(failed),
                                   n_unsatisfied=unsat, metadata=meta)


@dataclass
class ComparisonReport:
    modes: np.ndarray
    exact: np.ndarray
    approx: np.ndarray
    half_width: np.ndarray
    tolerance: float

    @property
    def abs_err(self) -> np.ndarray:
        return np.abs(self.exact - self.approx)

    @property
    def max_error(self) -> float:
        return float(self.abs_err.max())

    @property
    def within(self) -> np.ndarray:
        return self.abs_err <= self.half_width + self.tolerance

    def rows(self):
        err = self.abs_err
        for k, m in enumerate(self.modes):
            e, a = self.exact[k], self.approx[k]
            yield int(m), e.real, e.imag, a.real, a.imag, err[k], self.half_width[k]

    def to_csv(self, path, metadata=None):
        cols = ["m", "re_exact", "im_exact", "re_approx", "im_approx", "abs_err", "half_width"]
        return write_csv(path, cols, self.rows(), metadata)


def compare(mc: McEstimate, table, tolerance: float = 1e-4) -> ComparisonReport:
    """Per-mode |b_m^MC - E[b_m]| over the modes common to both."""
    approx = {int(m): c for m, c in zip(table.modes, table.expectation)}
    idx = [k for k, m in enumerate(mc.modes) if int(m) in approx]
    modes = mc.modes[idx]
    return ComparisonReport(
        modes=modes,
        exact=mc.mean[idx],
        approx=np.array([approx[int(m)] for m in modes]),
        half_width=mc.half_width[idx],
        tolerance=tolerance,
    )
