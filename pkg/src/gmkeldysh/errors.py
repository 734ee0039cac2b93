"""Exception hierarchy.

Every error raised by the package derives from :class:`GMKError` so callers
(and the CLI) can catch the whole family at once.
"""


class GMKError(Exception):
    """Base class for all package errors."""


class CoefficientError(GMKError, ValueError):
    """A coefficient field could not be evaluated or returned non-finite values."""


class ConsistencyError(GMKError, ArithmeticError):
    """Two independent computations of the same quantity disagree."""


class DegenerateLineError(GMKError, ValueError):
    """Evaluation on one of the lines y**2 == 1."""


class TransformSingularError(DegenerateLineError):
    """The right-hand-side transform is not invertible at the point."""


class InvalidDirectionError(GMKError, ValueError):
    """A zero direction vector was supplied."""


class NormalizationError(GMKError, ValueError):
    """A normal vector does not have unit length."""


class ParameterError(GMKError, ValueError):
    """A geometric or numerical parameter is outside its admissible range."""


class CapSolveError(GMKError, RuntimeError):
    """Fixed-point iteration for the cap radius did not converge."""


class ClassificationError(GMKError, ValueError):
    """A point handed to the arc classifier is not on the boundary."""


class ClassificationMismatchError(GMKError, ValueError):
    """The arc class is inconsistent with the sign of the normal."""


class MeshDomainError(GMKError, ValueError):
    """The domain is not star-shaped about the origin."""


class MeshQualityError(GMKError, ValueError):
    """The mesh contains a degenerate or inverted triangle."""


class NonConvergenceError(GMKError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The residual history up to the failure is kept on ``residual_history``.
    """

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class ConfigError(GMKError, ValueError):
    """Invalid run configuration."""
