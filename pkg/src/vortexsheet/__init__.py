"""Spectral solver and verification harness for a nonlocal quadratic wave
equation on the circle, ``varphi_tt - mu varphi_xx = (1/2 H[phi^2]_xx + phi varphi_xx)_x``
with ``phi = H[varphi]``.
"""
from .errors import (
    BackgroundGap,
    ConfigError,
    CutoffInfeasible,
    InadmissibleData,
    NegativeRadicand,
    NonFinite,
    ParameterDomainError,
    ResolutionTooLow,
    SolverError,
    StabilityLost,
    SymmetryViolation,
    VortexSheetError,
)
from .evolution import (
    LinearProblem,
    SolverConfig,
    Trajectory,
    energy_identity_residual,
    higher_energy_identity_residual,
    solve_linear,
    solve_nonlinear,
    t0_default,
)
from .experiments import (
    ExperimentConfig,
    run_continuous_dependence,
    run_illposed_probe,
    run_resolution_study,
    run_triangulation,
)
from .inequalities import RatioReport, run_campaign
from .operators import Form, acceleration, margin, quadratic_Q
from .spectral import (
    SampleGrid,
    TrigPoly,
    analyze,
    bessel,
    derivative,
    hilbert,
    multiply,
    random_trig,
    sobolev_norm,
    synthesize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
