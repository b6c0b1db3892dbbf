"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: bad input data -> 2, bad
configuration -> 3, failures at run time -> 4.
"""


class RacecastError(Exception):
    """Base class for every error raised by this package."""


class InputDataError(RacecastError):
    """Malformed or out-of-contract input data (series, files, tokens)."""


class ConfigurationError(RacecastError):
    """Invalid parameter value, filter spec, or config file content."""


class ExecutionError(RacecastError):
    """A predictor or orchestration step failed while running."""


class UndefinedMetricError(InputDataError):
    """A metric denominator is zero; the score is undefined for this input."""
