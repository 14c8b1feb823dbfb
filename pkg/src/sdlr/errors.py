"""Exception types shared across the package."""


class SdlrError(Exception):
    """Base class for all package errors."""


class DimensionError(SdlrError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(SdlrError, ValueError):
    """Input violates a mathematical precondition (sign, parity, definiteness)."""


class RankError(SdlrError, ValueError):
    """Matrix is rank-deficient where full column rank is required."""


class SingularityError(SdlrError, RuntimeError):
    """A reduced covariance became singular during time stepping."""


class NumericError(SdlrError, RuntimeError):
    """Non-finite values appeared during evaluation."""


class ConfigError(SdlrError, ValueError):
    """Experiment configuration is invalid; message carries the field path."""
