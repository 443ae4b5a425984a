"""Exception hierarchy for the solver and the verification tools."""


class VortexSheetError(Exception):
    """Base class for all package errors."""


class ResolutionTooLow(VortexSheetError, ValueError):
    """A sample grid is too coarse to represent the requested modes."""


class SymmetryViolation(VortexSheetError, ValueError):
    """Coefficients do not describe a real-valued function."""


class ParameterDomainError(VortexSheetError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class NegativeRadicand(VortexSheetError, ArithmeticError):
    """The weighted energy integral is negative (hyperbolicity margin violated)."""


class InadmissibleData(VortexSheetError, ValueError):
    """Initial data fail a precondition of the Cauchy problem."""


class BackgroundGap(VortexSheetError, ValueError):
    """A background trajectory does not cover a requested time."""


class CutoffInfeasible(VortexSheetError, ValueError):
    """No spectral cutoff reaches the requested regularization accuracy."""


class SolverError(VortexSheetError, RuntimeError):
    """A time integration stopped early.

    The states computed before the failure are kept in ``trajectory`` so the
    caller can inspect how the run degraded.
    """

    def __init__(self, message, t=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class StabilityLost(SolverError):
    """The hyperbolicity margin dropped below the configured floor."""

    def __init__(self, message, t=None, margin=None, trajectory=None):
        super().__init__(message, t=t, trajectory=trajectory)
        self.margin = margin


class NonFinite(SolverError):
    """Coefficients overflowed or became NaN."""


class ConfigError(VortexSheetError, ValueError):
    """A configuration file is malformed or names an unknown key."""
