"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failure families
to distinct process exit statuses.
"""


class UCSError(Exception):
    exit_code = 1


class ConfigError(UCSError):
    exit_code = 2


class ConfigurationError(ConfigError):
    """A mock plan or backend was configured incorrectly."""


class DataError(UCSError):
    exit_code = 7


class SchemaError(DataError):
    def __init__(self, message, line=None, role=None):
        self.line = line
        self.role = role
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateIdError(DataError):
    pass


class StratificationError(DataError):
    pass


class GatewayError(UCSError):
    exit_code = 3

    def __init__(self, message, attempts=None):
        self.attempts = attempts
        if attempts is not None:
            message = f"{message} (after {attempts} attempts)"
        super().__init__(message)


class FixtureMissingError(GatewayError):
    pass


class ParseError(UCSError):
    exit_code = 4

    def __init__(self, message, raw=None):
        self.raw = raw
        super().__init__(message)


class GenerationError(ParseError):
    pass


class CountRangeError(ParseError):
    pass


class FormatError(ParseError):
    pass


class VersionError(FormatError):
    pass


class AggregationError(ParseError):
    pass


class ScoringError(UCSError):
    exit_code = 4


class AlignmentError(UCSError):
    exit_code = 5


class TrainingError(UCSError):
    exit_code = 5


class DivergenceError(TrainingError):
    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class MetricError(UCSError):
    exit_code = 6
