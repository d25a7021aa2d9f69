"""Exception hierarchy shared by all romforge modules."""


class RomforgeError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(RomforgeError, ValueError):
    """Invalid sizes, ranges, or option combinations."""


class DuplicateParameterError(ConfigurationError):
    """Two snapshot matrices carry the same dwell time."""


class ShapeError(RomforgeError, ValueError):
    """Array dimensions do not match the operation's contract."""


class UnknownParameterError(RomforgeError, KeyError):
    """A requested dwell time does not exist in the dataset."""


class SplitError(RomforgeError, ValueError):
    """Train and test dwell-time lists overlap."""


class FormatError(RomforgeError, ValueError):
    """A file does not start with the expected magic bytes or version."""


class CorruptionError(RomforgeError, ValueError):
    """A file is internally inconsistent (truncated, dimension mismatch)."""


class DataError(RomforgeError, ValueError):
    """Payload values are unusable (NaN or Inf)."""


class DegenerateBasisError(RomforgeError, ValueError):
    """The centered snapshot matrix has no energy; no modes exist."""


class ConditioningError(RomforgeError, ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""


class DivergenceError(RomforgeError, ArithmeticError):
    """Training produced a non-finite loss."""


class DegenerateMetricError(RomforgeError, ValueError):
    """A metric is undefined for the given inputs (e.g. zero-norm truth)."""
