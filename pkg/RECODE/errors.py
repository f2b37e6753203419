"""
Exception hierarchy of RECODE.

Every error raised on purpose by the package derives from `RecodeError`, so a
caller (or the command line) can catch the whole family at once.
"""


def _raise(exception_type, msg):
    raise exception_type(msg)


class RecodeError(Exception):
    """Base class of all RECODE errors."""


class InvalidInput(RecodeError, ValueError):
    """Non-finite values or mismatched lengths in user-supplied data."""


class NumericalFailure(RecodeError, ArithmeticError):
    """A decomposition did not converge or failed its residual check."""


class InvalidRank(RecodeError, ValueError):
    """A truncation rank outside the admissible range."""


class InvalidShape(RecodeError, ValueError):
    """Matrix or vector dimensions that do not fit the operation."""


class InsufficientData(RecodeError, ValueError):
    """Too few snapshots, nights or values to carry out the operation."""


class MissingControl(RecodeError, ValueError):
    """DMDc was requested on snapshots that carry no control matrix."""


class InvalidEmbedding(RecodeError, ValueError):
    """Embedding dimension incompatible with the series length."""


class SchemaError(RecodeError, ValueError):
    """A mapped column is missing from a site file."""


class ConfigError(RecodeError, ValueError):
    """Invalid experiment, synthetic-site or config-file settings."""


class ParseError(RecodeError, ValueError):
    """
        A value in a site file could not be parsed.

        Parameters:
        -----------
        msg : str;
            description of the problem.
        line : int, None;
            1-based line number in the file (header is line 1).
    """
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


class WindowSkipped(RecodeError):
    """A sliding window could not be scored; `reason` says why."""
    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class EmptyExperiment(RecodeError):
    """
        No window of an experiment could be scored.

        `filter_name` names the step that removed the data (e.g. "quality",
        "season", "night_length", "windows").
    """
    def __init__(self, msg, filter_name=None):
        self.filter_name = filter_name
        super().__init__(msg)
