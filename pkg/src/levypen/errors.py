"""Exception types raised by levypen."""


class LevyPenError(Exception):
    """Base class for all library errors."""


class ModelError(LevyPenError, ValueError):
    """Invalid model parameters (transient process, non-positive scale, ...)."""


class DomainError(LevyPenError, ValueError):
    """Arguments outside the domain of an operation (coincident points, ...)."""


class QuadratureError(LevyPenError, ArithmeticError):
    """Quadrature did not converge within its budget.

    Attributes
    ----------
    estimate : float
        Best value obtained before giving up.
    error : float
        Achieved error estimate for ``estimate``.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(f"{message} (estimate={estimate!r}, error={error:.3g})")
        self.estimate = estimate
        self.error = error


class SingularSystemError(LevyPenError, ArithmeticError):
    """A linear system could not be solved and no fallback was allowed."""


class UnsupportedSizeError(LevyPenError, ValueError):
    """The point set is too large for an identity-based formula."""


class ConsistencyError(LevyPenError, ArithmeticError):
    """An internal invariant failed (e.g. a non-positive martingale density)."""
