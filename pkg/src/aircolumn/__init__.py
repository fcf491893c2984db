"""Solver for coupled advection-diffusion-reaction systems on a
semi-infinite vertical column, via a tanh stretch onto the unit interval
and an exponentially fitted finite volume scheme with fully implicit
Newton time stepping."""

__version__ = "1.0.0"

from .convergence import RateTable, runge_rates
from .fvm import CoefficientTable, assemble_coefficients
from .grid import SpatialGrid, TimeGrid, build_time_grid, build_uniform_grid
from .problem import (
    PhysicalProblem,
    ProblemValidationError,
    Profile,
    ReactionNetwork,
    SpeciesSpec,
    TransformedProblem,
    transform_problem,
    validate_problem,
)
from .reference import CompareReport, TruncatedConfig, compare, solve_truncated
from .solver import (
    NewtonConvergenceError,
    PositivityReport,
    SingularBlockError,
    Solution,
    SolverConfig,
    check_positivity_conditions,
    march,
)
from .source import SourceConfig, delta_hat, source_values
from .transform import CoefficientSample, eval_coefficients, xi_to_z, z_to_xi

__all__ = [
    "CoefficientSample",
    "CoefficientTable",
    "CompareReport",
    "NewtonConvergenceError",
    "PhysicalProblem",
    "PositivityReport",
    "ProblemValidationError",
    "Profile",
    "RateTable",
    "ReactionNetwork",
    "SingularBlockError",
    "Solution",
    "SolverConfig",
    "SourceConfig",
    "SpatialGrid",
    "SpeciesSpec",
    "TimeGrid",
    "TransformedProblem",
    "TruncatedConfig",
    "assemble_coefficients",
    "build_time_grid",
    "build_uniform_grid",
    "check_positivity_conditions",
    "compare",
    "delta_hat",
    "eval_coefficients",
    "march",
    "runge_rates",
    "solve_truncated",
    "source_values",
    "transform_problem",
    "validate_problem",
    "xi_to_z",
    "z_to_xi",
]
