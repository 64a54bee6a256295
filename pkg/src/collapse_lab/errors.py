"""Exception types shared across the package."""


class CollapseLabError(Exception):
    """Base class for all domain errors raised by this package."""


class ModelValidationError(CollapseLabError):
    """Model inputs failed a structural check."""


class OutOfRangeSymbolError(CollapseLabError):
    """Sample data contains a symbol outside {1, ..., k}."""


class InfeasibleAlphaError(CollapseLabError):
    """Target moments lie outside the convex hull of the feature map."""


class BoundaryAlphaError(CollapseLabError):
    """Target moments sit on the hull boundary, so no interior solution exists."""


class SingularHessianError(CollapseLabError):
    """Dual Hessian is rank deficient (collinear features)."""


class MaxIterationsError(CollapseLabError):
    """Solver exhausted its iteration budget."""


class GuardError(CollapseLabError):
    """A size guard refused an enumeration or dense-table request."""


class EmptyFeasibleSetError(CollapseLabError):
    """No type satisfies the moment constraints at the given tolerance.

    Carries ``min_tau``, the smallest tolerance that would admit at least
    one type at this sample size.
    """

    def __init__(self, message: str, min_tau: float):
        super().__init__(message)
        self.min_tau = float(min_tau)


class EmptyWindowError(CollapseLabError):
    """No feasible type falls inside the localization window."""


class SingularPushforwardError(CollapseLabError):
    """Pushforward metric is singular; carries an offending null direction."""

    def __init__(self, message: str, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class SingularMatrixError(CollapseLabError):
    """A matrix that must be invertible is numerically singular."""
