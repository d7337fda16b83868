"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a special function or shape."""


class SingularityError(ValueError):
    """Evaluation at (or arbitrarily close to) a singular point."""


class ParameterError(ValueError):
    """Invalid shape or grid construction parameters."""


class FiberSolveError(RuntimeError):
    """A fiber root could not be resolved to the required residual."""


class PlacementError(ValueError):
    """A source singularity is not strictly inside the obstacle."""


class DimensionError(ValueError):
    """Gridfunction or kernel dimensions disagree."""
