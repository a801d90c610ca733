"""Exception hierarchy shared by every module."""


class CoevolveError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(CoevolveError, ValueError):
    """An argument is outside its documented range."""


class ParseError(CoevolveError, ValueError):
    """Input text could not be parsed."""


class ValidationError(CoevolveError, ValueError):
    """Parsed data violates a domain invariant."""


class ContractError(CoevolveError, ValueError):
    """Arguments are individually valid but inconsistent with each other."""


class NumericError(CoevolveError, ArithmeticError):
    """A non-finite value reached a place that requires finite numbers."""


class ExtractionError(CoevolveError, ValueError):
    """No usable boxed answer was found in generated text."""
