"""Finite-difference solvers for the example field equations and grid post-processing."""

from .analysis import (GAUGES, DivergenceCheck, ResidualNorms, divergence_check, el_residual_on_grid,
                       evaluate_on_grid, observed_order, reconstruct_s_fields)
from .elliptic import SORResult, laplace_exponential_solution, solve_damped_laplace
from .presets import PRESET_NAMES, PresetRun, preset_grid, run_preset
from .grid import Axis, FieldSolution, GridError, GridSpec, centered_derivative
from .hyperbolic import (BoundaryConditions, CFLError, ManufacturedWave, WaveParams, hyperbolic_grid,
                         manufactured_coupled_solution, manufactured_string_solution,
                         manufactured_telegrapher_solution, solve_coupled_strings, solve_damped_string,
                         solve_telegrapher, solve_wave, telegrapher_coefficients)

__all__ = [
    "GAUGES", "DivergenceCheck", "ResidualNorms", "divergence_check", "el_residual_on_grid",
    "evaluate_on_grid", "observed_order", "reconstruct_s_fields", "SORResult",
    "laplace_exponential_solution", "solve_damped_laplace", "Axis", "FieldSolution", "GridError",
    "GridSpec", "centered_derivative", "BoundaryConditions", "CFLError", "ManufacturedWave",
    "WaveParams", "hyperbolic_grid", "manufactured_coupled_solution", "manufactured_string_solution",
    "manufactured_telegrapher_solution", "solve_coupled_strings", "solve_damped_string",
    "solve_telegrapher", "solve_wave", "telegrapher_coefficients", "PRESET_NAMES", "PresetRun",
    "preset_grid", "run_preset",
]
