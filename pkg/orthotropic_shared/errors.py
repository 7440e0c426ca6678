"""Exception hierarchy shared by the core and the front-ends."""

from __future__ import annotations


class OrthotropicError(ValueError):
    """Base class for every domain error raised by the package."""


class GeometryError(OrthotropicError):
    """A grid, ball or cutoff violates its construction invariants."""


class FieldError(OrthotropicError):
    """A field is malformed or incompatible with the requested operation."""


class ParameterError(OrthotropicError):
    """Exponent, regularization or tolerance outside its admissible range."""


class SingularEvaluationError(OrthotropicError, ArithmeticError):
    """The degenerate flux was evaluated where a gradient component vanishes."""


class SolverError(OrthotropicError):
    """Newton minimization could not make progress."""


class LadderError(OrthotropicError):
    """A regularization ladder level failed or the ladder is malformed."""


class VerificationError(OrthotropicError):
    """A check received inputs that violate its preconditions."""


class MonotonicityViolation(VerificationError, ArithmeticError):
    """The scalar flux failed strict monotonicity on a sampled pair."""


class ConfigError(OrthotropicError):
    """A run configuration is invalid."""


class ArtifactError(OrthotropicError):
    """Expected run artifacts are missing or unreadable."""
