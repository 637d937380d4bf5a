"""Exception hierarchy shared by the package."""


class RTOError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RTOError, ValueError):
    """An argument is outside its admissible range."""


class GeometryError(RTOError):
    """Degenerate element geometry (non-positive Jacobian)."""


class InadmissibleStateError(RTOError):
    """Deformation state with J <= 0 passed to the constitutive model."""


class ConfigurationError(RTOError):
    """Inconsistent problem definition (e.g. a load on a fixed DOF)."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        msg = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {msg}"
        return msg


class DegenerateFieldError(RTOError):
    """Random field correlation matrix has no positive spectrum."""


class SolverFailure(RTOError):
    """Nonlinear equilibrium could not be reached, even with c = 1."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class RankDeficiencyError(RTOError):
    """The tangent stiffness factorization is singular."""


class OracleUnreliableError(RTOError):
    """Too many Monte Carlo samples failed to converge."""
