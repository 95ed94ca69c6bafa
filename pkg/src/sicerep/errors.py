"""Exception types shared across the package."""


class SicerepError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(SicerepError):
    """Input matrix is not finite, not square, or otherwise malformed."""


class NotPositiveDefinite(SicerepError):
    """Matrix required to be SPD has a non-positive eigenvalue."""


class DimensionError(SicerepError):
    """Operands have incompatible dimensions."""


class SingularityError(SicerepError):
    """Unpenalized estimation requested on a singular covariance."""


class NotConverged(SicerepError):
    """Iteration budget exhausted before reaching the requested tolerance.

    Carries the best iterate so callers can inspect or continue from it.
    """

    def __init__(self, message, estimate=None, residual=None, iterations=None,
                 level=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations
        self.level = level


class DegenerateInput(SicerepError):
    """Input carries no usable signal (e.g. an all-zero covariance)."""


class FormatError(SicerepError):
    """Malformed data file or manifest row."""


class TooShort(SicerepError):
    """Sequence has too few frames for the requested feature."""


class IndefiniteKernel(SicerepError):
    """Kernel matrix is indefinite beyond the configured shift policy."""


class DegenerateLabels(SicerepError):
    """Binary subproblem received samples from a single class."""


class StaleDuals(SicerepError):
    """Dual solutions passed to a gradient no longer satisfy feasibility."""


class InsufficientClass(SicerepError):
    """A class has too few training samples."""


class ModelMismatch(SicerepError):
    """Sample representation does not match the trained model's layout."""


class NotFound(SicerepError):
    """Requested sample id or level does not exist."""


class ConfigError(SicerepError):
    """Experiment configuration is invalid."""


class SpecError(SicerepError):
    """Synthetic data specification produced an unusable structure."""
