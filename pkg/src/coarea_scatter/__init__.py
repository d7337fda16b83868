"""Shape uncertainty quantification for 2D acoustic scattering by random star-shaped obstacles.

The ensemble of random boundaries is discretized once, on a fixed spatial grid in the
annulus swept by all realizations (the transition region), using the coarea formula.
Scattering coefficients of the expected scattered field, and their generalized
polynomial chaos expansion, are then reconstructed with regularized null-field kernels.
"""

__version__ = "0.1.0"

from .specfun import CylinderFn, CylinderKind, FieldSample, outgoing_source, plane_wave, truncation_order
from .shape import (
    StarShape,
    EllipseShape,
    PolygonShape,
    RandomOctagon,
    circle_shape,
    ellipse_shape,
    polygon_shape,
    random_octagon,
    surface_sample,
    fiber_solve,
)
from .coarea import CoareaGrid, NaiveGrid, ellipse_grid, polygon_grid, circle_grid, naive_grid, coarea_grid, ensemble_integral
from .nullfield import (
    WeightedGridfunction,
    Target,
    InfoSource,
    SourceSet,
    ReconstructionKernel,
    discretize,
    solve_kernel,
    nullfield_rhs,
    information_outcomes,
)
from .gpc import GpcBasis, GpcTable, build_targets, estimate, evaluate_expansion
from .oracle import McEstimate, solve_realization, monte_carlo, compare
