"""Exception types raised by the engine."""


class RepeaterError(Exception):
    """Base class for all engine errors."""


class LengthMismatchError(RepeaterError, ValueError):
    pass


class EmptyInputError(RepeaterError, ValueError):
    pass


class NumericalError(RepeaterError, ArithmeticError):
    """A numerical result violated a guard (negative mass, singular divisor)."""


class NumericalSingularityError(NumericalError):
    """``1 - F[pf]`` vanished: the attempt can never succeed."""


class UnsupportedCombinationError(RepeaterError, ValueError):
    """E.g. a fidelity cut-off requested on the separable (fast) backend."""


class ConfigError(RepeaterError, ValueError):
    """Invalid configuration document or protocol tree.

    ``line`` and ``column`` are set for JSON syntax errors, ``field`` for
    semantic errors.
    """

    def __init__(self, message, *, line=None, column=None, field=None):
        super().__init__(message)
        self.line = line
        self.column = column
        self.field = field


class NoKeyError(RepeaterError, ValueError):
    """The truncated distribution carries no probability mass."""
