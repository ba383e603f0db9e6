class QHBootError(Exception):
    """Base class for errors raised by this package."""


class NonCDF(QHBootError, ValueError):
    """A step function is not a (sub-)probability distribution function."""


class Divergent(QHBootError, ArithmeticError):
    """An integral that defines a functional or derivative is not finite."""


class NotApplicable(QHBootError, ValueError):
    """A check does not apply to the given distribution."""


class IllConditioned(QHBootError, ArithmeticError):
    """A covariance matrix could not be factorized even after jitter."""


class ConfigError(QHBootError, ValueError):
    """Invalid experiment or CLI configuration."""
