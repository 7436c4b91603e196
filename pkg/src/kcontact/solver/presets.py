"""Named simulation presets with manufactured boundary data and exact oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import laplace_exponential_solution, solve_damped_laplace
from .grid import FieldSolution, GridSpec
from .hyperbolic import (BoundaryConditions, hyperbolic_grid, manufactured_coupled_solution,
                         manufactured_string_solution, manufactured_telegrapher_solution, solve_coupled_strings,
                         solve_damped_string, solve_telegrapher)

__all__ = ["PresetRun", "run_preset", "preset_grid", "PRESET_NAMES"]

PRESET_NAMES = ("damped-string", "telegrapher", "coupled-strings", "damped-laplace")


@dataclass
class PresetRun:
    preset: str
    solution: FieldSolution
    exact: FieldSolution | None
    meta: dict

    def max_error(self, margin: int = 0) -> float | None:
        if self.exact is None:
            return None
        sl = (slice(None),) + self.solution.grid.interior(margin) if margin else (Ellipsis,)
        return float(np.max(np.abs(self.solution.phi[sl] - self.exact.phi[sl])))


def preset_grid(preset: str, nt: int, nx: int, T: float = 1.0, length: float = 1.0) -> GridSpec:
    if preset == "damped-laplace":
        return GridSpec.uniform(("x", "y"), ((0.0, length), (0.0, length)), (nt, nx))
    return hyperbolic_grid(T, length, nt, nx)


def _scaled(wave, weights) -> BoundaryConditions:
    bc = wave.boundary_conditions()
    w = np.asarray(weights, dtype=float)[:, None]
    return BoundaryConditions(
        initial=lambda x: w * np.reshape(bc.initial(x), (1, -1)),
        initial_velocity=lambda x: w * np.reshape(bc.initial_velocity(x), (1, -1)),
        left=lambda t: w * np.reshape(bc.left(t), (1, -1)),
        right=lambda t: w * np.reshape(bc.right(t), (1, -1)),
    )


def run_preset(preset: str, params: dict, nt: int, nx: int, *, T: float = 1.0, length: float = 1.0,
               kernels: dict | None = None, kernel_kind: str | None = None) -> PresetRun:
    """Solve a preset problem with data traced from its manufactured solution.

    For ``damped-laplace`` the grid axes are ``(x, y)`` on ``[0, length]^2``
    and ``nt``/``nx`` are the node counts along them.
    """
    grid = preset_grid(preset, nt, nx, T, length)
    p = dict(params)
    p.setdefault("length", length)
    if preset == "damped-string":
        wave = manufactured_string_solution(p)
        sol = solve_damped_string(p, grid, wave.boundary_conditions())
        return PresetRun(preset, sol, wave.evaluate(grid), {"omega": wave.omega, **sol.meta})
    if preset == "telegrapher":
        wave = manufactured_telegrapher_solution(p)
        sol = solve_telegrapher(p, grid, wave.boundary_conditions())
        return PresetRun(preset, sol, wave.evaluate(grid), {"omega": wave.omega, **sol.meta})
    if preset == "coupled-strings":
        if not kernels or "C" not in kernels:
            raise ValueError("coupled-strings needs a kernel named 'C'")
        wave, weights = manufactured_coupled_solution(p)
        sol = solve_coupled_strings({"gamma": p.get("gamma", 0.0), "kernel": kernels["C"]}, grid,
                                    _scaled(wave, weights))
        exact = None
        if kernel_kind == "quadratic":
            one = wave.evaluate(grid)
            w = np.asarray(weights)
            exact = FieldSolution(grid, w[:, None, None] * one.phi[0], w[:, None, None, None] * one.jets[0],
                                  provenance="manufactured",
                                  second=w[:, None, None, None, None] * one.second[0])
        return PresetRun(preset, sol, exact, {"weights": list(weights), **sol.meta})
    if preset == "damped-laplace":
        g1 = float(p.get("gamma1", 0.0))
        f = laplace_exponential_solution(g1)
        res = solve_damped_laplace(p, grid, f)
        X, Y = grid.mesh()
        phi = f(X, Y)
        jets = np.stack([-g1 * phi, np.zeros_like(phi)])[None]
        second = np.array([[[g1 ** 2 * phi, np.zeros_like(phi)], [np.zeros_like(phi), np.zeros_like(phi)]]])
        exact = FieldSolution(grid, phi, jets, provenance="manufactured", second=second)
        return PresetRun(preset, res.solution, exact,
                         {"iterations": res.iterations, "residual": res.residual, "converged": res.converged})
    raise ValueError(f"unknown preset {preset!r}; expected one of {PRESET_NAMES}")
