"""Exception hierarchy shared across the package."""


class LifeMomentsError(Exception):
    """Base class for all errors raised by this package."""


class DslError(LifeMomentsError):
    """Malformed expression source (syntax, unknown identifier, bad literal)."""

    def __init__(self, message: str, source: str = "", position: int = 0):
        self.position = position
        self.source = source
        super().__init__(f"{message} (at position {position})" if source else message)


class EvalDomainError(LifeMomentsError):
    """Expression evaluation left the real domain (log of non-positive, etc.)."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} at t={t!r}")


class SchemaError(LifeMomentsError):
    """Model document violates the expected structure."""


class ValidationError(LifeMomentsError):
    """Model content fails a semantic check (negative intensity, bad index)."""


class NumericalError(LifeMomentsError):
    """A numerical sweep produced non-finite or inconsistent values."""


class CapExceededError(LifeMomentsError):
    """Requested moment order would exceed the configured block-dimension cap."""
