"""Exception types raised by qident."""

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class RangeError(ValueError):
    """A quantized level is outside ``0..m``."""


class FactorizationError(ValueError):
    """A covariance matrix is not symmetric positive definite."""


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class DimensionError(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid experiment configuration."""
