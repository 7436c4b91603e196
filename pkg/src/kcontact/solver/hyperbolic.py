"""Explicit three-level schemes for damped wave equations on ``[0,T] x [0,l]``.

All hyperbolic presets share one stepping kernel for
``phi_tt - c^2 phi_xx + gamma phi_t + m^2 phi + S(phi) = 0``; the damping
term uses the centered difference ``(phi^{n+1} - phi^{n-1}) / (2 dt)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import FieldSolution, GridError, GridSpec

__all__ = [
    "BoundaryConditions", "CFLError", "WaveParams", "solve_wave", "solve_damped_string",
    "solve_telegrapher", "solve_coupled_strings", "telegrapher_coefficients",
    "ManufacturedWave", "manufactured_string_solution", "manufactured_telegrapher_solution",
    "manufactured_coupled_solution", "hyperbolic_grid",
]


class CFLError(ValueError):
    """Time step violates the stability bound ``c dt / dx <= 1``."""


@dataclass(frozen=True)
class BoundaryConditions:
    """Initial displacement and velocity plus Dirichlet traces at ``x = 0`` and ``x = l``.

    Callables act on numpy arrays; each returns values for every field
    (shape ``(n_fields, ...)``) or a single field's values.
    """

    initial: Callable
    initial_velocity: Callable
    left: Callable
    right: Callable

    @classmethod
    def homogeneous(cls, initial=None, initial_velocity=None) -> "BoundaryConditions":
        zero = lambda z: np.zeros_like(np.asarray(z, dtype=float))  # noqa: E731
        return cls(initial or zero, initial_velocity or zero, zero, zero)

    def check(self, x0: float, x1: float, n_fields: int, tol: float = 1e-9):
        """Corner compatibility of initial data with the Dirichlet traces."""
        for xe, side in ((x0, self.left), (x1, self.right)):
            a = np.reshape(self.initial(np.array([xe])), (n_fields, -1))[:, 0]
            b = np.reshape(side(np.array([0.0])), (n_fields, -1))[:, 0]
            if np.any(np.abs(a - b) > tol * max(1.0, float(np.max(np.abs(a))))):
                raise ValueError(f"initial data and boundary trace disagree at x={xe}")


@dataclass(frozen=True)
class WaveParams:
    c2: float
    gamma: float = 0.0
    m2: float = 0.0
    source: Callable | None = None  # S(phi) with phi of shape (n_fields, nx)


def hyperbolic_grid(T: float, length: float, nt: int, nx: int) -> GridSpec:
    return GridSpec.uniform(("t", "x"), ((0.0, T), (0.0, length)), (nt, nx))


def _as_fields(v, n_fields: int, nx: int) -> np.ndarray:
    return np.broadcast_to(np.reshape(np.asarray(v, dtype=float), (n_fields, -1)), (n_fields, nx)).copy()


def _accel(phi: np.ndarray, vel: np.ndarray | None, p: WaveParams, dx: float) -> np.ndarray:
    """``c^2 phi_xx - m^2 phi - S(phi)`` at interior nodes (damping added by the caller)."""
    lap = (phi[:, 2:] - 2.0 * phi[:, 1:-1] + phi[:, :-2]) / dx ** 2
    acc = p.c2 * lap - p.m2 * phi[:, 1:-1]
    if p.source is not None:
        acc = acc - p.source(phi)[:, 1:-1]
    return acc


def solve_wave(p: WaveParams, grid: GridSpec, bc: BoundaryConditions, n_fields: int = 1,
               *, check_bc: bool = True) -> FieldSolution:
    if grid.ndim != 2:
        raise GridError("hyperbolic solvers need a (t, x) grid")
    if p.gamma < 0:
        raise ValueError("damping must be non-negative")
    (tax, xax) = grid.axes
    dt, dx = tax.h, xax.h
    cfl = math.sqrt(p.c2) * dt / dx
    if cfl > 1.0 + 1e-12:
        raise CFLError(f"CFL number {cfl:.6g} exceeds 1 (dt={dt:.6g}, dx={dx:.6g})")
    if check_bc:
        bc.check(xax.start, xax.stop, n_fields)
    t = tax.nodes
    x = xax.nodes
    nt, nx = tax.n, xax.n
    u = np.empty((n_fields, nt, nx))
    u[:, 0] = _as_fields(bc.initial(x), n_fields, nx)
    psi = _as_fields(bc.initial_velocity(x), n_fields, nx)

    def set_bc(level: int):
        u[:, level, 0] = _as_fields(bc.left(np.array([t[level]])), n_fields, 1)[:, 0]
        u[:, level, -1] = _as_fields(bc.right(np.array([t[level]])), n_fields, 1)[:, 0]

    # Taylor seed with phi_tt from the equation
    phi0 = u[:, 0]
    phitt = _accel(phi0, psi, p, dx) - p.gamma * psi[:, 1:-1]
    u[:, 1, 1:-1] = phi0[:, 1:-1] + dt * psi[:, 1:-1] + 0.5 * dt ** 2 * phitt
    set_bc(1)
    a = 1.0 + 0.5 * p.gamma * dt
    b = 1.0 - 0.5 * p.gamma * dt
    for n in range(1, nt - 1):
        cur = u[:, n]
        u[:, n + 1, 1:-1] = (2.0 * cur[:, 1:-1] - b * u[:, n - 1, 1:-1] + dt ** 2 * _accel(cur, None, p, dx)) / a
        set_bc(n + 1)
        if not np.all(np.isfinite(u[:, n + 1])):
            raise FloatingPointError(f"solution blew up at step {n + 1}")
    return FieldSolution(grid, u, provenance="computed",
                         meta={"cfl": cfl, "c2": p.c2, "gamma": p.gamma, "m2": p.m2})


# ---------------------------------------------------------------------------
# presets


def solve_damped_string(params: dict, grid: GridSpec, bc: BoundaryConditions) -> FieldSolution:
    rho, tau, gamma = float(params["rho"]), float(params["tau"]), float(params.get("gamma", 0.0))
    return solve_wave(WaveParams(c2=tau / rho, gamma=gamma), grid, bc)


def telegrapher_coefficients(params: dict) -> tuple[float, float, float]:
    """``(c^2, gamma, m^2)`` from line constants ``L, C, R, G``."""
    L, C, R, G = (float(params[k]) for k in ("L", "C", "R", "G"))
    lc = L * C
    return 1.0 / lc, (L * G + R * C) / lc, R * G / lc


def solve_telegrapher(params: dict, grid: GridSpec, bc: BoundaryConditions) -> FieldSolution:
    c2, gamma, m2 = telegrapher_coefficients(params)
    return solve_wave(WaveParams(c2=c2, gamma=gamma, m2=m2), grid, bc)


def coupling_source(d1: Callable, limit: float | None, zmin: float = 1e-12) -> Callable:
    """``S(phi)^i = C'(z) phi^i / z`` with ``C'(z)/z`` replaced by ``limit`` near ``z = 0``."""

    def source(phi: np.ndarray) -> np.ndarray:
        z = np.sqrt(np.sum(phi ** 2, axis=0))
        small = z < zmin
        if np.any(small) and limit is None:
            raise ValueError("coupling kernel needs a declared limit of C'(z)/z at z=0")
        zs = np.where(small, 1.0, z)
        ratio = np.where(small, limit if limit is not None else 0.0, np.asarray(d1(zs), dtype=float) / zs)
        return ratio * phi

    return source


def solve_coupled_strings(params: dict, grid: GridSpec, bc: BoundaryConditions) -> FieldSolution:
    """Two strings with unit wave speed coupled through ``C(z)``, ``z = |phi|``.

    ``params["kernel"]`` is a :class:`kcontact.chart.Kernel` whose first
    derivative implementation and ``limit_d1_over_z`` are used.
    """
    gamma = float(params.get("gamma", 0.0))
    kern = params["kernel"]
    d1 = kern.implementation(1)
    if d1 is None:
        raise ValueError(f"kernel {kern.name!r} has no first-derivative implementation")
    src = coupling_source(d1, kern.limit_d1_over_z)
    return solve_wave(WaveParams(c2=1.0, gamma=gamma, source=src), grid, bc, n_fields=2)


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class ManufacturedWave:
    """``phi = e^{-gamma t/2} sin(pi x/l) [cos(w t) + gamma/(2w) sin(w t)]``
    solving ``phi_tt - c^2 phi_xx + gamma phi_t + m^2 phi = 0``."""

    c2: float
    gamma: float
    length: float
    m2: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.omega2 <= 0:
            raise ValueError("parameters are not underdamped: need c^2 pi^2/l^2 + m^2 > gamma^2/4")

    @property
    def kappa(self) -> float:
        return math.pi / self.length

    @property
    def omega2(self) -> float:
        return self.c2 * self.kappa ** 2 + self.m2 - self.gamma ** 2 / 4

    @property
    def omega(self) -> float:
        return math.sqrt(self.omega2)

    def _time(self, t):
        g, w = self.gamma, self.omega
        e = np.exp(-0.5 * g * t)
        T = e * (np.cos(w * t) + g / (2 * w) * np.sin(w * t))
        Tt = -e * np.sin(w * t) * (w ** 2 + g ** 2 / 4) / w
        Ttt = -g * Tt - (self.c2 * self.kappa ** 2 + self.m2) * T
        return T, Tt, Ttt

    def phi(self, t, x):
        return self.amplitude * self._time(t)[0] * np.sin(self.kappa * x)

    def evaluate(self, grid: GridSpec) -> FieldSolution:
        t, x = grid.mesh()
        T, Tt, Ttt = self._time(t)
        k = self.kappa
        S, Sx = np.sin(k * x), k * np.cos(k * x)
        A = self.amplitude
        phi = A * T * S
        jets = A * np.stack([Tt * S, T * Sx])[None]
        second = A * np.array([[[Ttt * S, Tt * Sx], [Tt * Sx, -k ** 2 * T * S]]])
        return FieldSolution(grid, phi, jets, provenance="manufactured", second=second)

    def boundary_conditions(self) -> BoundaryConditions:
        A = self.amplitude
        zero = lambda z: np.zeros_like(np.asarray(z, dtype=float))  # noqa: E731
        return BoundaryConditions(
            initial=lambda x: A * np.sin(self.kappa * x),
            initial_velocity=zero,
            left=zero,
            right=lambda tt: A * self._time(tt)[0] * np.sin(self.kappa * self.length),
        )


def manufactured_string_solution(params: dict) -> ManufacturedWave:
    rho, tau = float(params["rho"]), float(params["tau"])
    return ManufacturedWave(c2=tau / rho, gamma=float(params.get("gamma", 0.0)),
                            length=float(params.get("length", 1.0)))


def manufactured_telegrapher_solution(params: dict) -> ManufacturedWave:
    c2, gamma, m2 = telegrapher_coefficients(params)
    return ManufacturedWave(c2=c2, gamma=gamma, length=float(params.get("length", 1.0)), m2=m2)


def manufactured_coupled_solution(params: dict, weights=(0.6, 0.8)) -> tuple[ManufacturedWave, tuple]:
    """For ``C(z) = z^2/2`` each string obeys ``phi_tt - phi_xx + gamma phi_t + phi = 0``.

    Returns the scalar wave and the per-field weights: ``phi^i = weights[i] * wave``.
    """
    wave = ManufacturedWave(c2=1.0, gamma=float(params.get("gamma", 0.0)),
                            length=float(params.get("length", 1.0)), m2=1.0)
    return wave, tuple(weights)
