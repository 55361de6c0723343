"""Optimal resource distribution for the logistic diffusive equation.

Maximises ``F(m) = integral(theta - c m)`` over resources ``0 <= m <= kappa``
on [0, 1], where ``-mu theta'' = theta (m - theta)`` with Neumann ends.
"""

__version__ = "0.1.0"

from .adjoint import (AdjointSolution, SwitchingData, directional_derivative, gateaux_gradient,
                      hamiltonian, solve_adjoint, switching)
from .crenels import SweepResult, argmax_band, log_mu_grid, maximize_over_crenels, sweep_G
from .errors import (DegenerateState, InvalidInput, KPPError, NonConvergence, SingularSystem,
                     StructureViolation)
from .grid import (Grid, GridField, ResourceProfile, auto_grid_size, constant, crenel,
                   derivative, integrate, jump_count, make_grid, mass, sample_resource,
                   total_variation)
from .optimize import (OptimizerConfig, OptimizerResult, bathtub_update, default_seeds,
                       multistart, objective, pontryagin_maximize)
from .state import SolverOptions, StateSolution, solve_state
from .symmetry import (QuasiMaximizerReport, build_quasi_maximizer, critical_points,
                       detect_symmetry, fold, quasi_pipeline, tile_k_symmetric)

__all__ = [
    "AdjointSolution",
    "argmax_band",
    "auto_grid_size",
    "bathtub_update",
    "build_quasi_maximizer",
    "constant",
    "crenel",
    "critical_points",
    "default_seeds",
    "DegenerateState",
    "derivative",
    "detect_symmetry",
    "directional_derivative",
    "fold",
    "gateaux_gradient",
    "Grid",
    "GridField",
    "hamiltonian",
    "integrate",
    "InvalidInput",
    "jump_count",
    "KPPError",
    "log_mu_grid",
    "make_grid",
    "mass",
    "maximize_over_crenels",
    "multistart",
    "NonConvergence",
    "objective",
    "OptimizerConfig",
    "OptimizerResult",
    "pontryagin_maximize",
    "quasi_pipeline",
    "QuasiMaximizerReport",
    "ResourceProfile",
    "sample_resource",
    "SingularSystem",
    "solve_adjoint",
    "solve_state",
    "SolverOptions",
    "StateSolution",
    "StructureViolation",
    "sweep_G",
    "SweepResult",
    "switching",
    "SwitchingData",
    "tile_k_symmetric",
    "total_variation",
]
