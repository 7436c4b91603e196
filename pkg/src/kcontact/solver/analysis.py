"""Post-processing of gridded solutions: action fields, residuals, convergence orders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..expr import ZERO, Expr, diff, evaluate
from ..lagrangian import Lagrangian, euler_lagrange_residuals
from .grid import FieldSolution, GridError, centered_derivative

__all__ = [
    "GAUGES", "reconstruct_s_fields", "divergence_check", "DivergenceCheck", "ResidualNorms",
    "el_residual_on_grid", "observed_order", "evaluate_on_grid",
]

GAUGES = ("first", "even-split")


def evaluate_on_grid(e: Expr, pt: dict, shape, kernels=None) -> np.ndarray:
    if e == ZERO:
        return np.zeros(shape)
    return np.broadcast_to(np.asarray(evaluate(e, pt, kernels), dtype=float), shape)


def _sliced(pt: dict, idx) -> dict:
    return {k: (v[idx] if isinstance(v, np.ndarray) and v.ndim else v) for k, v in pt.items()}


def _integrate_axis(lag: Lagrangian, sol: FieldSolution, s: np.ndarray, alpha: int, weight: float,
                    kernels, newton_iters: int = 20) -> None:
    """Trapezoidal integration of ``d s^alpha / dt^alpha = weight * L`` from zero at the
    start of axis ``alpha``; implicit in ``s^alpha`` (Newton), explicit in the rest."""
    ch = lag.chart
    L = lag.L
    dL = diff(L, ch.s(alpha))
    h = sol.grid.spacing[alpha]
    pt = sol.point_arrays(ch)
    for b in range(ch.k):
        pt[ch.s(b)] = s[b]
    n = sol.grid.shape[alpha]
    sa = ch.s(alpha)

    def level(m):
        idx = [slice(None)] * sol.grid.ndim
        idx[alpha] = m
        return tuple(idx)

    s[alpha][level(0)] = 0.0
    prev_pt = _sliced(pt, level(0))
    prev_pt[sa] = s[alpha][level(0)]
    shape = s[alpha][level(0)].shape
    f_prev = weight * evaluate_on_grid(L, prev_pt, shape, kernels)
    for m in range(1, n):
        cur = _sliced(pt, level(m))
        y = s[alpha][level(m - 1)] + h * f_prev
        for _ in range(newton_iters):
            cur[sa] = y
            F = y - s[alpha][level(m - 1)] - 0.5 * h * (f_prev + weight * evaluate_on_grid(L, cur, shape, kernels))
            J = 1.0 - 0.5 * h * weight * evaluate_on_grid(dL, cur, shape, kernels)
            step = F / J
            y = y - step
            if np.max(np.abs(step)) <= 1e-15 * (1.0 + np.max(np.abs(y))):
                break
        cur[sa] = y
        s[alpha][level(m)] = y
        f_prev = weight * evaluate_on_grid(L, cur, shape, kernels)


def reconstruct_s_fields(lag: Lagrangian, sol: FieldSolution, gauge: str = "first", *, kernels=None,
                         max_sweeps: int = 100, tol: float = 1e-13) -> FieldSolution:
    """Fill ``s`` so that ``sum_a d s^a / dt^a = L`` along the solution.

    ``first``: ``s^a = 0`` for ``a > 1`` and ``s^1`` integrated along the
    first axis.  ``even-split``: every ``s^a`` carries ``L / k`` along its
    own axis; the coupling through ``L``'s dependence on ``s`` is resolved by
    fixed-point sweeps.
    """
    ch = lag.chart
    if sol.n_fields != ch.n or sol.grid.ndim != ch.k:
        raise GridError("solution grid does not match the chart")
    kernels = kernels if kernels is not None else ch.kernels
    k = ch.k
    s = np.zeros((k,) + sol.grid.shape)
    if gauge == "first":
        _integrate_axis(lag, sol, s, 0, 1.0, kernels)
        return sol.with_s(s)
    if gauge == "even-split":
        for _ in range(max_sweeps):
            old = s.copy()
            for a in range(k):
                _integrate_axis(lag, sol, s, a, 1.0 / k, kernels)
            if np.max(np.abs(s - old)) <= tol * (1.0 + np.max(np.abs(s))):
                break
        return sol.with_s(s)
    raise ValueError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")


@dataclass
class DivergenceCheck:
    residual: np.ndarray
    estimate: np.ndarray
    mask: tuple

    @property
    def worst_ratio(self) -> float:
        r = np.abs(self.residual[self.mask])
        e = self.estimate[self.mask]
        return float(np.max(r / e))

    def within(self, factor: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.residual[self.mask]) <= factor * self.estimate[self.mask]))


def divergence_check(lag: Lagrangian, sol: FieldSolution, *, kernels=None, floor: float = 1e-13) -> DivergenceCheck:
    """Centered ``sum_a d s^a/dt^a - L`` against the trapezoid truncation estimate
    ``sum_a h_a^2/4 |d^2 (L/k_a) / (dt^a)^2|`` at interior nodes."""
    ch = lag.chart
    kernels = kernels if kernels is not None else ch.kernels
    pt = sol.point_arrays(ch)
    Lg = evaluate_on_grid(lag.L, pt, sol.grid.shape, kernels)
    r = sol.s_jets()
    div = sum(r[a, a] for a in range(ch.k))
    hs = sol.grid.spacing
    est = np.full(sol.grid.shape, floor * (1.0 + float(np.max(np.abs(Lg)))))
    for a in range(ch.k):
        if not np.any(sol.s[a]):
            continue
        sa = centered_derivative(sol.s[a], hs[a], a)
        est = est + hs[a] ** 2 / 4 * np.abs(centered_derivative(centered_derivative(sa, hs[a], a), hs[a], a))
    return DivergenceCheck(div - Lg, est, sol.grid.interior())


@dataclass
class ResidualNorms:
    linf: list
    l2: list
    divergence_linf: float | None = None
    divergence_l2: float | None = None

    @property
    def max(self) -> float:
        return max(self.linf)


def el_residual_on_grid(lag: Lagrangian, sol: FieldSolution, *, kernels=None, margin: int = 1) -> ResidualNorms:
    """Evaluate the jet residual system at interior nodes."""
    ch = lag.chart
    if sol.n_fields != ch.n or sol.grid.ndim != ch.k:
        raise GridError("solution grid does not match the chart")
    if min(sol.grid.shape) < 2 * margin + 1:
        raise GridError("grid has no interior nodes for this margin")
    kernels = kernels if kernels is not None else ch.kernels
    system = euler_lagrange_residuals(lag)
    pt = dict(ch.parameter_values())
    for i in range(ch.n):
        pt[ch.q(i)] = sol.phi[i]
        for a in range(ch.k):
            pt[ch.a(i, a)] = sol.jets[i, a]
    w = sol.second_jets()
    for i in range(ch.n):
        for a in range(ch.k):
            for b in range(a, ch.k):
                pt[ch.w(i, a, b)] = w[i, a, b]
    if sol.s is not None:
        r = sol.s_jets()
        for a in range(ch.k):
            pt[ch.s(a)] = sol.s[a]
            for b in range(ch.k):
                pt[ch.r(a, b)] = r[a, b]
    mesh = sol.grid.mesh()
    for a in range(ch.k):
        pt[ch.t(a)] = mesh[a]
    sl = sol.grid.interior(margin)
    linf, l2 = [], []
    for R in system.residuals:
        v = np.abs(evaluate_on_grid(R, pt, sol.grid.shape, kernels)[sl])
        linf.append(float(v.max()))
        l2.append(float(np.sqrt(np.mean(v ** 2))))
    out = ResidualNorms(linf, l2)
    if sol.s is not None:
        v = np.abs(evaluate_on_grid(system.divergence, pt, sol.grid.shape, kernels)[sl])
        out.divergence_linf = float(v.max())
        out.divergence_l2 = float(np.sqrt(np.mean(v ** 2)))
    return out


def observed_order(hs, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(hs) < 2 or np.any(errors <= 0):
        return float("nan")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
