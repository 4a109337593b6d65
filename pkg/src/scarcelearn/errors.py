"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ``DataError`` subclasses exit 2,
``DivergenceError`` exits 3.
"""


class ScarceLearnError(Exception):
    """Base class for every error raised by this package."""


class DataError(ScarceLearnError, ValueError):
    """Invalid input data or parameters."""


class ParameterError(DataError):
    pass


class InputError(DataError):
    pass


class ShapeError(DataError):
    pass


class DomainError(DataError):
    """A value lies outside the domain an operation accepts (e.g. non-binary h)."""


class ChannelError(DataError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown channel {self.name!r}"


class StructureError(DataError):
    pass


class SizeError(DataError):
    pass


class SplitError(DataError):
    pass


class DivergenceError(ScarceLearnError, ArithmeticError):
    """Training produced non-finite parameters or loss."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class LeakageError(ScarceLearnError, AssertionError):
    """A test row was passed to a fit call."""
