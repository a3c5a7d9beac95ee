"""switchgrowth: solver and closed-form oracle toolkit for optimal
technology-switching growth models."""

__version__ = "0.1.0"

from .problem import (
    AkRegime,
    Preferences,
    StationaryProblem,
    SwitchingCostMatrix,
    ValidationReport,
    validate_problem,
)
from .regions import RegionReport, SwitchInterval
from .solver import (
    DiscretizedSolution,
    Grid,
    SolverConfig,
    VanishingSolution,
    extract_regions,
    qvi_residual,
    solve_qvi,
    solve_vanishing,
)
from .simulate import (
    AnalyticPolicy,
    GridPolicy,
    SimConfig,
    Trajectory,
    dpp_check,
    dynamics_probes,
    euler_residual,
    simulate,
    total_utility,
)

__all__ = [
    "__version__",
    "AkRegime", "Preferences", "StationaryProblem", "SwitchingCostMatrix",
    "ValidationReport", "validate_problem",
    "RegionReport", "SwitchInterval",
    "Grid", "SolverConfig", "DiscretizedSolution", "VanishingSolution",
    "solve_qvi", "solve_vanishing", "extract_regions", "qvi_residual",
    "SimConfig", "Trajectory", "AnalyticPolicy", "GridPolicy",
    "simulate", "total_utility", "dpp_check", "euler_residual", "dynamics_probes",
]
