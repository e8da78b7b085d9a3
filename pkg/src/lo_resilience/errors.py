"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ResilienceError(Exception):
    exit_code = 1


class UsageError(ResilienceError, ValueError):
    """Malformed input: bad file, bad flag value, unparsable signs."""

    exit_code = 2


class DimensionError(UsageError):
    """Weight sequence, sign vector and index set disagree on length."""


class ParityUnfixableError(UsageError):
    pass


class MisuseError(UsageError):
    """An operation was handed a sequence lacking the metadata it needs."""


class ResourceLimitError(ResilienceError):
    exit_code = 3


class ConstructionError(ResilienceError, ValueError):
    """A family generator was asked for a size below its threshold."""

    exit_code = 4
