"""Exception types raised across the package."""


class DgxfemError(Exception):
    """Base class for all package errors."""


class AmbiguousCut(DgxfemError):
    """The interface crosses a cell in a pattern the mesh does not resolve.

    Raised when a cell boundary carries more than two interface crossings,
    when interior sampling finds both signs without a clean pair of edge
    crossings, or when the arc is not a graph over its chord.
    Refining the mesh is the usual remedy.
    """


class NoConvergence(DgxfemError):
    """An iterative method failed to reach its tolerance.

    ``best`` carries the best iterate found and ``residual`` its relative
    residual, so callers can still inspect a failed solve.
    """

    def __init__(self, message, best=None, residual=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class UnsupportedOrder(DgxfemError):
    pass


class DegenerateSubcell(DgxfemError):
    """A sub-cell has (numerically) zero measure; nothing is integrated there."""


class InvalidThreshold(DgxfemError):
    pass


class IllConditionedMass(DgxfemError):
    pass


class NonPositiveError(DgxfemError):
    pass


class DegeneratePolygon(DgxfemError):
    pass
