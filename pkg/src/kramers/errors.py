"""Exception types shared across the package."""


class KramersError(Exception):
    """Base class for all package-specific errors."""


class SingularSystem(KramersError):
    """A linear system involving the friction matrix is numerically singular.

    Raised when the friction matrix fails its positive-definiteness
    requirement at the evaluation point, or is so ill-conditioned that
    inversion / the Lyapunov solve cannot be trusted.
    """


class HorizonTooShort(KramersError):
    """The quadrature horizon does not reach the exponential tail bound."""


class BoundaryTooClose(KramersError):
    """A finite-difference stencil would cross the domain boundary."""


class ParameterDomain(KramersError):
    """A model parameter violates its admissible range."""


class DomainMismatch(KramersError):
    """A coefficient map is undefined or invalid somewhere on the domain."""


class SamplingFailure(KramersError):
    """A requested sampling region contains no representable points."""


class DomainError(KramersError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class QuarantineExceeded(KramersError):
    """Too many Monte Carlo paths aborted with non-finite samples."""
