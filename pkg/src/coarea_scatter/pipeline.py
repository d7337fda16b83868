"""Experiment drivers behind the command line: grids, kernel sweeps, gPC tables, validation."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .coarea import coarea_grid, naive_grid
from .config import ExperimentConfig
from .csvio import write_csv
from .gpc import GpcBasis, build_targets, estimate, target_labels
from .nullfield import (
    DEFAULT_SEGMENT_POINTS,
    DEFAULT_SMOOTH_POINTS,
    SourceSet,
    discretize_many,
    information_outcomes,
    parameter_rule,
    solve_kernel,
    surface_rule,
)
from .oracle import compare, monte_carlo
from .shape import circle_shape, ellipse_shape, random_octagon
from .specfun import truncation_order

RECONSTRUCTION_COLUMNS = [
    "kappa",
    "kappa_rmax",
    "L",
    "frobenius_err",
    "relative_frobenius_err",
    "max_row_err",
    "max_relative_row_err",
    "n_unsatisfied",
    "max_abs_coefficient",
]


class NumericalFailure(RuntimeError):
    """Unsatisfied targets beyond the configured allowance, or an aborted Monte Carlo run."""


def build_shape(cfg: ExperimentConfig):
    s = cfg.shape
    if s.kind == "circle":
        return circle_shape(s.a)
    if s.kind == "octagon":
        return random_octagon(s.a, s.b)
    return ellipse_shape(s.a, s.b)


def build_grid(cfg: ExperimentConfig, shape):
    return coarea_grid(shape, cfg.grid.M, cfg.grid.N, cfg.gpc.order)


def basis_for(cfg: ExperimentConfig, shape) -> GpcBasis:
    if cfg.gpc.basis == "auto":
        return GpcBasis.for_shape(shape)
    return GpcBasis.named(cfg.gpc.basis)


def surface_rule_for(shape, points: int):
    if points:
        return surface_rule(shape, points)
    default = DEFAULT_SMOOTH_POINTS if shape.periodic else DEFAULT_SEGMENT_POINTS
    return surface_rule(shape, default)


def metadata(cfg: ExperimentConfig, command: str, **extra) -> dict:
    meta = {"command": command, "config_sha256": cfg.digest(), "version": __version__}
    meta.update(extra)
    return meta


def _mu(cfg, kappa, shape) -> int:
    return cfg.reconstruction.mu if cfg.reconstruction.mu >= 0 else truncation_order(kappa, shape.r_max)


def _sources(cfg, shape, kappa, L, basis):
    r = cfg.reconstruction
    mods = tuple(range(cfg.gpc.order + 1)) if cfg.gpc.modulated_sources else (0,)
    return SourceSet(shape, kappa, L, r.source_order, r.source_factor, mods, basis)


def _map(fn, items, threads):
    with threadpool_limits(limits=1):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]


# -----------------------------------------------------------------------------
# grid


def run_grid(cfg: ExperimentConfig, outdir: str) -> list[str]:
    shape = build_shape(cfg)
    grid = build_grid(cfg, shape)
    naive = naive_grid(shape, cfg.grid.naive_M, cfg.grid.naive_N)
    meta = metadata(cfg, "grid", shape=shape.name, nodes=grid.n_nodes, entries=grid.n_entries)
    files = [
        write_csv(os.path.join(outdir, "coarea_spatial.csv"), ["subdomain_id", "r", "theta", "weight"],
                  grid.spatial_rows(), meta),
        grid.to_csv(os.path.join(outdir, "coarea_parametric.csv"), meta),
        write_csv(os.path.join(outdir, "naive_grid.csv"), ["theta", "z", "r", "weight"], naive.rows(),
                  metadata(cfg, "grid", shape=shape.name, nodes=naive.weights.size)),
    ]
    return files


# -----------------------------------------------------------------------------
# reconstruction sweep


@dataclass
class SweepRow:
    kappa: float
    kappa_rmax: float
    L: int
    frobenius_err: float
    relative_frobenius_err: float
    max_row_err: float
    max_relative_row_err: float
    n_unsatisfied: int
    max_abs_coefficient: float
    n_targets: int = 0
    bound_ok: bool = True
    threshold_ok: bool = True

    def as_row(self):
        return (self.kappa, self.kappa_rmax, self.L, self.frobenius_err, self.relative_frobenius_err,
                self.max_row_err, self.max_relative_row_err, self.n_unsatisfied, self.max_abs_coefficient)


def sweep_kernels(cfg: ExperimentConfig, shape=None, grid=None) -> list[SweepRow]:
    shape = shape or build_shape(cfg)
    grid = grid or build_grid(cfg, shape)
    basis = basis_for(cfg, shape)
    r = cfg.reconstruction
    tasks = [(k, L) for k in cfg.kappas() for L in r.L]
    targets = {}
    for k in cfg.kappas():
        mu = _mu(cfg, k, shape)
        targets[k] = (mu, np.vstack([t.entries for t in build_targets(grid, basis, k, mu, cfg.gpc.order)]))

    def one(task):
        k, L = task
        mu, G = targets[k]
        F = discretize_many(grid, _sources(cfg, shape, k, L, basis))
        K = solve_kernel(G, F, r.eps_ev, r.eps_ed, labels=target_labels(mu, cfg.gpc.order))
        sat = K.satisfied
        return SweepRow(
            kappa=k,
            kappa_rmax=k * shape.r_max,
            L=L,
            frobenius_err=K.frobenius_error,
            relative_frobenius_err=K.relative_frobenius_error,
            max_row_err=K.max_row_error,
            max_relative_row_err=K.max_relative_row_error,
            n_unsatisfied=K.n_unsatisfied,
            max_abs_coefficient=float(np.abs(K.coefficients).max()),
            n_targets=len(K.labels),
            bound_ok=bool(np.all(np.abs(K.coefficients) <= K.bound)),
            threshold_ok=bool(np.all(K.residual_norms[sat] <= r.eps_ev * K.target_norms[sat])),
        )

    return _map(one, tasks, cfg.output.threads)


def run_reconstruct(cfg: ExperimentConfig, outdir: str):
    rows = sweep_kernels(cfg)
    path = write_csv(os.path.join(outdir, "reconstruction_error.csv"), RECONSTRUCTION_COLUMNS,
                     (row.as_row() for row in rows), metadata(cfg, "reconstruct", shape=cfg.shape.kind))
    _check_allowance(cfg, max(row.n_unsatisfied for row in rows))
    return [path], rows


def _check_allowance(cfg, n_unsat):
    allow = cfg.reconstruction.max_unsatisfied
    if allow >= 0 and n_unsat > allow:
        raise NumericalFailure(f"{n_unsat} unsatisfied targets exceed the allowance {allow}")


# -----------------------------------------------------------------------------
# gPC table


def gpc_table(cfg: ExperimentConfig, kappa=None, L=None, shape=None):
    """Kernel, outcomes and table at one wavenumber and source count."""
    shape = shape or build_shape(cfg)
    grid = build_grid(cfg, shape)
    basis = basis_for(cfg, shape)
    r = cfg.reconstruction
    kappa = cfg.kappas()[0] if kappa is None else kappa
    L = max(r.L) if L is None else L
    mu = _mu(cfg, kappa, shape)
    N = cfg.gpc.order
    sources = _sources(cfg, shape, kappa, L, basis)
    with threadpool_limits(limits=1):
        G = build_targets(grid, basis, kappa, mu, N)
        F = discretize_many(grid, sources)
        kernel = solve_kernel(G, F, r.eps_ev, r.eps_ed, labels=target_labels(mu, N))
        outcomes = information_outcomes(shape, sources, kappa, parameter_rule(shape, r.z_nodes),
                                        surface_rule_for(shape, r.surface_points))
    meta = dict(kappa=kappa, L=L, mu=mu, order=N, shape=shape.name, basis=basis.kind.value,
                grid=f"{grid.label}:{cfg.grid.M}x{cfg.grid.N}", eps_ev=r.eps_ev, eps_ed=r.eps_ed)
    table = estimate(kernel, outcomes, meta)
    return table, kernel, outcomes


def run_gpc(cfg: ExperimentConfig, outdir: str):
    table, kernel, _ = gpc_table(cfg)
    meta = metadata(cfg, "gpc")
    files = [
        table.to_csv(os.path.join(outdir, "gpc_table.csv"), meta),
        kernel.to_csv(os.path.join(outdir, "kernel.csv"), meta),
    ]
    _check_allowance(cfg, kernel.n_unsatisfied)
    return files, table


# -----------------------------------------------------------------------------
# validation


def run_validate(cfg: ExperimentConfig, outdir: str):
    shape = build_shape(cfg)
    o, r = cfg.oracle, cfg.reconstruction
    table, kernel, _ = gpc_table(cfg, kappa=o.kappa or None, L=o.L or None, shape=shape)
    kappa = float(table.metadata["kappa"])
    L = o.L or max(r.L)
    order = o.source_order if o.source_order >= 0 else r.source_order
    try:
        mc = monte_carlo(shape, kappa, L, o.n_samples, o.seed, cfg.output.threads,
                         surface_rule_for(shape, o.surface_points), r.eps_ev, r.eps_ed, order,
                         mu=int(table.metadata["mu"]))
    except RuntimeError as exc:
        raise NumericalFailure(str(exc)) from exc
    report = compare(mc, table, o.tolerance)
    meta = metadata(cfg, "validate", rng=mc.metadata["rng"], seed=o.seed, n_samples=mc.n_samples,
                    n_failed=mc.n_failed, max_error=repr(report.max_error))
    files = [
        report.to_csv(os.path.join(outdir, "validation_report.csv"), meta),
        table.to_csv(os.path.join(outdir, "gpc_table.csv"), metadata(cfg, "validate")),
    ]
    return files, report, mc, table
