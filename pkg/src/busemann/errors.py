"""Exception types shared across the package."""


class BusemannError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(BusemannError, ValueError):
    """Malformed, non-finite or out-of-range arguments."""


class DomainError(BusemannError, ValueError):
    """A point lies on or outside the boundary of the open unit ball."""


class FormatError(BusemannError, ValueError):
    """A file could not be parsed (bad magic, ragged rows, truncation...)."""


class NumericError(BusemannError, ArithmeticError):
    """A numerical routine (e.g. quadrature) failed to reach its tolerance."""
