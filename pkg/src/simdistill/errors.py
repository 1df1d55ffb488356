"""Exception types shared across the package."""


class SimDistillError(Exception):
    """Base class for all package errors."""


class ShapeError(SimDistillError, ValueError):
    """Operand shapes are incompatible."""


class NumericDomainError(SimDistillError, ValueError):
    """Input values outside the numeric domain of an operation."""


class ContractError(SimDistillError, RuntimeError):
    """A documented precondition or invariant was violated."""


class DegenerateDistributionError(SimDistillError, ValueError):
    """Too few anchors to form a meaningful similarity distribution."""


class EmptyBankError(SimDistillError, RuntimeError):
    """Snapshot requested from a bank holding no rows."""


class ColdStartError(SimDistillError, RuntimeError):
    """Training step attempted before the anchor bank was pre-filled."""


class FormatError(SimDistillError, ValueError):
    """Malformed binary file (bad magic, wrong type code, bad structure)."""


class LengthError(FormatError):
    """Binary payload shorter or longer than its header declares."""


class CheckpointError(SimDistillError, ValueError):
    """Checkpoint unreadable or incompatible with the requested model."""


class ConfigError(SimDistillError, ValueError):
    """Run configuration missing, unparsable, or self-contradictory."""
