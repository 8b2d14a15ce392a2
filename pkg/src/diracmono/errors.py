"""Exception types shared across the package.

The CLI maps these onto its exit-code contract, so new failure modes should
reuse one of the classes below rather than raising bare exceptions.
"""


class DiracmonoError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DiracmonoError):
    """Invalid or inconsistent configuration (bad flags, unknown family, ...)."""


class DomainError(DiracmonoError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedRegimeError(DiracmonoError):
    """Physically meaningful input the solver does not handle (e.g. supercritical
    Coulomb coupling, where the origin exponent ceases to be real)."""


class NoSuchStateError(DiracmonoError):
    """No bound state with the requested node count was found.

    Carries the (E, nodes) pairs that *were* found so callers can report them.
    """

    def __init__(self, message, found=()):
        super().__init__(message)
        self.found = list(found)


class NumericalError(DiracmonoError):
    """Numerical failure inside the solver (integration breakdown, lost bracket)."""


class LevelCrossingError(NumericalError):
    """Node label changed across a parameter stencil; derivative estimates would
    silently bridge different eigenvalue branches, so we refuse."""


class GridMismatchError(DiracmonoError):
    """Arrays passed to a grid-bound operation do not live on the same grid."""


class PointwiseOrderError(DiracmonoError):
    """Two potentials are not pointwise ordered, so the comparison law does not apply."""


class SweepAbortedError(DiracmonoError):
    """A sweep failed part-way; partial records are attached."""

    def __init__(self, message, records, cause=None):
        super().__init__(message)
        self.records = list(records)
        self.cause = cause
