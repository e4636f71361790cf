"""Dense LP engine: two-phase simplex and L1 projection."""
from .core import (
    BACKEND,
    FEAS_TOL,
    OPT_TOL,
    DenseLp,
    LpError,
    LpNumericalError,
    LpOutcome,
    LpStatus,
    MaxPivotsExceeded,
    ProjectionInfeasible,
    project_l1,
    solve_lp,
)

__all__ = [
    "BACKEND",
    "FEAS_TOL",
    "OPT_TOL",
    "DenseLp",
    "LpError",
    "LpNumericalError",
    "LpOutcome",
    "LpStatus",
    "MaxPivotsExceeded",
    "ProjectionInfeasible",
    "project_l1",
    "solve_lp",
]
