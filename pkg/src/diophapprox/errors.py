"""Exception taxonomy shared by all modules.

Exit-code mapping used by the CLI: usage errors exit 2 (argparse),
precondition/saturation errors exit 3, internal invariant failures exit 4.
"""


class DiophApproxError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(DiophApproxError, ValueError):
    """An argument violates an operation's precondition."""


class ResourceLimitError(DiophApproxError):
    """A requested computation exceeds the configured memory/size budget."""


class SaturationError(DiophApproxError):
    """A radius exceeds 1/(2q), so the approximation set would be trivial."""


class PreconditionError(DiophApproxError):
    """A harness-level precondition (e.g. a weight window) is violated."""


class PrecisionError(DiophApproxError):
    """The working precision cannot certify the requested output."""


class InternalInvariantError(DiophApproxError):
    """A certified internal check failed; indicates a defect, not bad input."""
