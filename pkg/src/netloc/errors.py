"""Exception types shared across the package."""


class NetlocError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(NetlocError):
    """An input violates a documented invariant or precondition."""


class DegenerateGeometryError(NetlocError):
    """Coincident or otherwise degenerate point configuration."""


class ColinearityError(NetlocError):
    """A triple of nodes is (numerically) colinear where it must not be.

    ``triple`` identifies the offending nodes when known.
    """

    def __init__(self, message, triple=None):
        super().__init__(message)
        self.triple = triple


class NotEmbeddableError(NetlocError):
    """A distance/ratio matrix is not realizable in the requested dimension.

    ``spectrum`` carries the offending eigenvalues for diagnostics.
    """

    def __init__(self, message, spectrum=None):
        super().__init__(message)
        self.spectrum = spectrum


class InconsistentParametersError(NetlocError):
    """An angle-parameter set admits no real triangle."""


class InconsistentAnglesError(NetlocError):
    """Angle measurements give contradictory distance-ratio chains.

    ``max_discrepancy`` is the largest relative spread observed.
    """

    def __init__(self, message, max_discrepancy=None):
        super().__init__(message)
        self.max_discrepancy = max_discrepancy
