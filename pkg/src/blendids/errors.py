"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
``TrainingError`` -> 3.
"""


class BlendIDSError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BlendIDSError, ValueError):
    """Invalid run configuration or schema file."""


class DataError(BlendIDSError, ValueError):
    """Problem with input data: schema, parsing, encoding or shape."""


class SchemaMismatchError(DataError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class LabelEncodingError(DataError):
    pass


class PreconditionError(DataError):
    """An operation was called on data that violates its precondition."""


class StratificationError(DataError):
    pass


class ShapeError(DataError):
    pass


class TrainingError(BlendIDSError, RuntimeError):
    """Model fitting failed or diverged."""


class FitError(TrainingError):
    pass


class BlendSplitError(TrainingError):
    pass
