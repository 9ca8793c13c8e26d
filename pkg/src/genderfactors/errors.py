"""Exception hierarchy shared across the package."""


class GenderFactorsError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GenderFactorsError):
    """An input file or stream violates its documented format."""


class ValidationError(GenderFactorsError):
    """Well-formed input that violates a contract (lengths, ranges, vocabularies)."""
