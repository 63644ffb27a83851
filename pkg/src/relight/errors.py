"""Exception types shared across the package."""


class RelightError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RelightError):
    """An input value violates a documented invariant or range."""


class FormatError(ValidationError):
    """A file's structure cannot be parsed (bad header, truncated payload)."""


class InitializationError(RelightError):
    """Light initialization cannot produce the requested number of seeds."""
