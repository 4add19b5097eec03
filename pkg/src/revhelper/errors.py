"""Shared exception types.

The CLI maps these onto exit codes: contract and validation failures exit 1,
I/O and transport failures exit 2.
"""


class RevHelperError(Exception):
    """Base class for all package errors."""


class ContractError(RevHelperError):
    """A caller violated an operation precondition."""


class CorpusParseError(RevHelperError):
    """Corpus document is structurally malformed (bad JSON or missing fields)."""


class CorpusValidationError(RevHelperError):
    """Corpus parsed but one or more invariants do not hold."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DiffParseError(RevHelperError):
    """Unified diff text could not be parsed."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ConfigError(RevHelperError):
    """Invalid configuration value."""


class AuthError(RevHelperError):
    """The forge rejected our credentials."""


class RateLimitError(RevHelperError):
    """The forge asked us to back off.

    ``retry_after`` carries the server's wait hint in seconds when given.
    """

    def __init__(self, message, retry_after=None):
        self.retry_after = retry_after
        super().__init__(message)


class TransportError(RevHelperError):
    """Network-level failure talking to the forge."""


class ImputationError(RevHelperError):
    """A feature could not be imputed (missing in every row)."""


class DegenerateDataError(RevHelperError):
    """Data has no variance where variance is required."""
