"""Exception types shared across the package."""


class SpanexError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SpanexError):
    """Semantically invalid input: bad span, alphabet mismatch, etc."""


class FormatError(SpanexError):
    """Malformed serialized automaton, regex or expression."""


class RegexSyntaxError(FormatError):
    """Regex text does not conform to the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class PreconditionError(SpanexError):
    """An operation was called on an automaton outside its contract."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class ClassificationTooLarge(PreconditionError):
    """Classification state space exceeds the configured variable cap."""
