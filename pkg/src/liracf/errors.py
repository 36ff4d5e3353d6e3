"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input violates a documented precondition (bad rating value, bad grid, ...)."""


class ParseError(ValueError):
    """A ratings file could not be parsed.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyProfileError(DomainError):
    """An operation required a user with at least one rating."""


class EmptyEvaluationError(DomainError):
    """Error metrics were requested for an empty set of predictions."""
