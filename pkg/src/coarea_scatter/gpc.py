"""Generalized polynomial chaos expansion of the scattering coefficients."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .csvio import write_csv
from .errors import DimensionError, ParameterError
from .nullfield import ReconstructionKernel, Target, WeightedGridfunction
from .shape import StarShape


class BasisKind(enum.Enum):
    FOURIER = "fourier"
    LEGENDRE = "legendre"


@dataclass(frozen=True)
class GpcBasis:
    """Orthogonal basis for the law of z.

    Fourier (z uniform on a period): P_0 = 1, P_{2k-1} = sin(k z), P_{2k} = cos(k z),
    gamma_0 = 1, gamma_n = 1/2. Legendre (z uniform on [-1, 1]): gamma_n = 1/(2n + 1).
    """

    kind: BasisKind

    @classmethod
    def for_shape(cls, shape: StarShape) -> "GpcBasis":
        return cls(BasisKind.FOURIER if shape.periodic else BasisKind.LEGENDRE)

    @classmethod
    def named(cls, name: str) -> "GpcBasis":
        try:
            return cls(BasisKind(name.lower()))
        except ValueError:
            raise ParameterError(f"unknown gPC basis {name!r}") from None

    def evaluate(self, n: int, z):
        if n < 0:
            raise ParameterError("gPC index must be non-negative")
        z = np.asarray(z, dtype=float)
        if self.kind is BasisKind.LEGENDRE:
            return special.eval_legendre(n, z)
        if n == 0:
            return np.ones_like(z)
        if n % 2:
            return np.sin((n + 1) // 2 * z)
        return np.cos(n // 2 * z)

    def norm(self, n: int) -> float:
        if self.kind is BasisKind.LEGENDRE:
            return 1.0 / (2 * n + 1)
        return 1.0 if n == 0 else 0.5


@dataclass
class GpcTable:
    modes: np.ndarray  # m = -mu..mu
    coefficients: np.ndarray  # (len(modes), N + 1)
    satisfied: np.ndarray  # same shape, bool
    metadata: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.coefficients.shape[1] - 1

    @property
    def expectation(self) -> np.ndarray:
        """E[b_m] = b_{m,0}."""
        return self.coefficients[:, 0]

    def rows(self):
        for i, m in enumerate(self.modes):
            for n in range(self.order + 1):
                c = self.coefficients[i, n]
                yield int(m), n, c.real, c.imag, bool(self.satisfied[i, n])

    def to_csv(self, path, metadata=None):
        meta = dict(self.metadata)
        meta.update(metadata or {})
        return write_csv(path, ["m", "n", "re", "im", "satisfied"], self.rows(), meta)


def target_labels(mu: int, N: int) -> list[tuple[int, int]]:
    return [(m, n) for m in range(-mu, mu + 1) for n in range(N + 1)]


def target_functionals(basis: GpcBasis, kappa: float, mu: int, N: int) -> list[Target]:
    return [Target(m, kappa, n, basis) for m, n in target_labels(mu, N)]


def build_targets(grid, basis: GpcBasis, kappa: float, mu: int, N: int) -> list[WeightedGridfunction]:
    """One gridfunction per (m, n), m = -mu..mu outer, n = 0..N inner."""
    if mu < 0 or N < 0:
        raise ParameterError("mu and N must be non-negative")
    sw = np.sqrt(grid.weights)
    r, t, z = grid.r, grid.theta, grid.z
    out = []
    for tg in target_functionals(basis, kappa, mu, N):
        out.append(WeightedGridfunction(np.asarray(tg(r, t, z), dtype=complex) * sw, grid))
    return out


def estimate(kernel: ReconstructionKernel, outcomes, metadata=None) -> GpcTable:
    """b_{m,n} = sum_l c_{(m,n),l} a_l arranged by mode and gPC index."""
    outcomes = np.asarray(outcomes)
    if outcomes.shape != (kernel.coefficients.shape[1],):
        raise DimensionError(f"expected {kernel.coefficients.shape[1]} outcomes, got {outcomes.shape}")
    vals = kernel.apply(outcomes)
    sat = kernel.satisfied
    ms = sorted({m for m, _ in kernel.labels})
    N = max(n for _, n in kernel.labels)
    coef = np.zeros((len(ms), N + 1), dtype=complex)
    ok = np.zeros((len(ms), N + 1), dtype=bool)
    row = {m: i for i, m in enumerate(ms)}
    for k, (m, n) in enumerate(kernel.labels):
        coef[row[m], n] = vals[k]
        ok[row[m], n] = sat[k]
    meta = {"n_unsatisfied": int(np.count_nonzero(~sat))}
    meta.update(metadata or {})
    return GpcTable(np.array(ms), coef, ok, meta)


def evaluate_expansion(table: GpcTable, basis: GpcBasis, z) -> np.ndarray:
    """b_m(z) = sum_n b_{m,n} P_n(z), over the table's modes."""
    P = np.array([basis.evaluate(n, z) for n in range(table.order + 1)])
    return table.coefficients @ P
