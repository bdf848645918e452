"""Exception hierarchy shared across the package."""


class RicsolveError(Exception):
    """Base class for all errors raised by ricsolve."""


class MatrixMarketError(RicsolveError, ValueError):
    """Malformed Matrix Market input. ``lineno`` is 1-based when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SingularOperatorError(RicsolveError, ArithmeticError):
    """A Lyapunov operator or a shifted matrix is (numerically) singular."""


class StabilizabilityError(RicsolveError, ArithmeticError):
    """No stabilizing solution could be extracted (ill-posed Riccati data)."""


class ConvergenceError(RicsolveError, ArithmeticError):
    """A solve finished with a residual above its tolerance."""


class NotStableError(RicsolveError, ValueError):
    """A matrix required to be stable has an eigenvalue in the closed right half-plane."""


class FormulaInvalidError(RicsolveError, ArithmeticError):
    """The cheap residual formula cannot be used because the reduced solve is inaccurate."""
