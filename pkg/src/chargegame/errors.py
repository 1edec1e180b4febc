"""Exception types shared across the package."""


class ChargeGameError(Exception):
    """Base class for all package errors."""


class SpecError(ChargeGameError, ValueError):
    """A game instance, flow or profile violates a structural invariant."""


class DomainError(ChargeGameError, ValueError):
    """A cost function was evaluated outside its validity interval."""


class UndefinedAverageError(ChargeGameError, ValueError):
    """An average cost or gradient was requested for a zero-mass group."""


class UnsupportedInstanceError(ChargeGameError, ValueError):
    """An operation was called on an instance shape it does not support."""


class BracketingError(ChargeGameError, ArithmeticError):
    """A root bracket failed to enclose a sign change.

    Raised by the closed-form solver when the stationarity function does
    not change sign on its guaranteed bracket, which signals that the cost
    family violates the convex/increasing shape requirements.
    """


class NumericsError(ChargeGameError, ArithmeticError):
    """A numerical computation produced non-finite values."""
