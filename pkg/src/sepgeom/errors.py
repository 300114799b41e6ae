"""Exception hierarchy.

Every error raised deliberately by the package derives from :class:`SepGeomError`
so callers (and the CLI) can map failures to exit codes by category.
"""


class SepGeomError(Exception):
    """Base class for all package errors."""


class DomainError(SepGeomError, ValueError):
    """Argument outside the domain of a chart or formula."""


class InfeasiblePoint(DomainError):
    """Parameter point inside the bounding box but not a valid density matrix."""


class DimensionError(DomainError):
    """Matrix has the wrong dimension for the requested operation."""


class NonHermitianInput(DomainError):
    """Matrix is not Hermitian within tolerance."""


class BoundaryPoint(DomainError):
    """Finite-difference stencil leaves the feasible set."""


class DegenerateState(DomainError):
    """A metric coefficient diverges (vanishing eigenvalue pair with nonzero numerator)."""


class UndefinedBranch(DomainError):
    """Piecewise closed form evaluated where no branch applies."""


class ConvergenceError(SepGeomError, RuntimeError):
    """Numerical procedure failed to reach the requested accuracy."""


class NonConvergence(ConvergenceError):
    """Region integration exhausted its evaluation budget."""


class QuadratureFailure(ConvergenceError):
    """Sphere or radial quadrature did not stabilise under refinement."""


class DegenerateTotal(ConvergenceError):
    """Total volume is consistent with zero, ratio undefined."""


class NormalizationFailure(SepGeomError, ArithmeticError):
    """A density could not be normalised (zero or infinite mass)."""


class SupportMismatch(NormalizationFailure):
    """Relative entropy integrand diverges non-integrably."""


class DivergenceError(NormalizationFailure):
    """Requested normalisation over an unbounded range diverges."""
