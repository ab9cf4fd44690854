"""Exception hierarchy shared by every module of the engine."""


class ParityEngineError(Exception):
    """Base class for all engine errors."""


class DomainError(ParityEngineError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class ParseError(ParityEngineError):
    """A file could not be parsed. ``row`` is the 1-based data row, if known."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ValidationError(ParityEngineError, ValueError):
    """Input parsed but violates a data invariant."""


class InsufficientData(ParityEngineError, ValueError):
    pass


class MissingProbability(ParityEngineError, ValueError):
    pass


class DimensionMismatch(ParityEngineError, ValueError):
    pass


class NonFiniteDensity(ParityEngineError, RuntimeError):
    pass


class InsufficientDraws(ParityEngineError, ValueError):
    pass


class SchemaVersionError(ParityEngineError):
    pass


class EmptyDraws(ParityEngineError, ValueError):
    pass


class SingleClass(ParityEngineError, ValueError):
    pass


class MissingFit(ParityEngineError, KeyError):
    pass


class TooFewTeams(ParityEngineError, ValueError):
    pass


class ConfigError(ParityEngineError, ValueError):
    pass


class InsufficientTeams(InsufficientData):
    pass


class EmptySet(ParityEngineError, ValueError):
    pass
