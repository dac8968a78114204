"""Exception types shared across the package."""


class PaviseError(Exception):
    """Base class for everything raised deliberately by this package."""


class InvalidThreshold(PaviseError, ValueError):
    """Corruption budget t is out of range for the given worker count."""


class InvalidWorkerCount(PaviseError, ValueError):
    """Worker count m is too small or nodes are degenerate."""


class DimensionMismatch(PaviseError, ValueError):
    """An operand's shape does not match the encoded geometry."""


class OutOfRange(PaviseError, IndexError):
    """A worker or column index falls outside the valid range."""


class BudgetExceeded(PaviseError, RuntimeError):
    """Decoding found more suspects than the configured budget allows,
    or no sparse hypothesis explained the syndromes at all."""


class RankDeficient(PaviseError, RuntimeError):
    """The surviving honest rows do not determine the result uniquely."""


class BudgetViolation(PaviseError, ValueError):
    """A cluster configuration asks for more corruption or straggling
    than the code can absorb."""


class ConfigError(PaviseError, ValueError):
    """A config file could not be parsed or contains unknown keys."""


class IOFailure(PaviseError, OSError):
    """A dataset or output file could not be read or written."""
