"""Symmetry classes of a k-contact Lagrangian and the dissipation laws they produce.

Each check returns a :class:`SymmetryVerdict` listing every defining
condition with its own zero-test verdict.  Dynamical symmetries are only
probed numerically (:func:`dynamical_symmetry_probe`); the symbolic
necessary condition ``i_[X, Gamma_a] eta^a = 0`` is available through
:func:`dynamical_precheck`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bundle import (BaseVectorField, BundleVectorField, OneForm, Sopde, complete_lift, d,
                     exterior_derivative, flow, interior_product, lie_bracket, lie_derivative,
                     vertical_lift)
from .chart import ChartError
from .dissipation import DissipationLaw
from .expr import ZERO, Expr, Verdict, add, as_expr, is_zero, mul, neg, sub, to_text
from .expr.zero import DEFAULT_SEED
from .lagrangian import Lagrangian, contact_forms, energy
from .solver.analysis import evaluate_on_grid
from .solver.grid import FieldSolution, GridError, centered_derivative

__all__ = [
    "Condition", "SymmetryVerdict", "is_natural_symmetry", "is_k_contact_symmetry", "cartan_like_check",
    "is_newtonoid", "newtonoid_corollary_check", "corollary_law", "dynamical_precheck",
    "ProbeError", "ProbeReport", "dynamical_symmetry_probe", "probe_slope",
]


@dataclass(frozen=True)
class Condition:
    name: str
    expr: Expr
    verdict: Verdict

    @property
    def holds(self) -> bool:
        return self.verdict.is_zero

    def to_dict(self) -> dict:
        return {"condition": self.name, "expression": to_text(self.expr), "verdict": str(self.verdict)}


@dataclass
class SymmetryVerdict:
    kind: str
    conditions: list
    law: DissipationLaw | None = None
    precheck: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.conditions)

    @property
    def failed_conditions(self) -> list:
        return [c for c in self.conditions if not c.holds]

    def to_dict(self) -> dict:
        return {
            "class": self.kind,
            "passed": self.passed,
            "conditions": [c.to_dict() for c in self.conditions],
            "precheck": [c.to_dict() for c in self.precheck],
            "law": None if self.law is None else [to_text(f) for f in self.law],
            "notes": list(self.notes),
        }

    def __str__(self):
        lines = [f"{self.kind}: {'pass' if self.passed else 'fail'}"]
        for c in self.conditions:
            lines.append(f"  [{c.verdict}] {c.name}: {to_text(c.expr)}")
        for c in self.precheck:
            lines.append(f"  (precheck) [{c.verdict}] {c.name}: {to_text(c.expr)}")
        if self.law is not None:
            lines.append("  F = (" + ", ".join(to_text(f) for f in self.law) + ")")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _cond(name: str, e: Expr, kernels, seed) -> Condition:
    return Condition(name, e, is_zero(e, kernels=kernels, seed=seed))


def _kernels(lag: Lagrangian, kernels):
    return lag.chart.kernels if kernels is None else kernels


def _form_conditions(label: str, form: OneForm, kernels, seed) -> list:
    ch = form.chart
    return [_cond(f"{label} [d{c}]", form.coeff(c), kernels, seed) for c in ch.coords()]


# ---------------------------------------------------------------------------
# symbolic classes


def is_natural_symmetry(lag: Lagrangian, Z: BaseVectorField, *, kernels=None,
                        seed: int = DEFAULT_SEED) -> SymmetryVerdict:
    """``Z^C(L) = 0``; the law is ``F^a = Z^{V_a}(L)``."""
    ch = lag.chart
    kernels = _kernels(lag, kernels)
    c = _cond("Z^C(L)", complete_lift(Z)(lag.L), kernels, seed)
    out = SymmetryVerdict("natural symmetry", [c])
    if c.holds:
        out.law = DissipationLaw(tuple(vertical_lift(Z, a)(lag.L) for a in range(ch.k)))
    return out


def is_k_contact_symmetry(lag: Lagrangian, X: BundleVectorField, *, kernels=None,
                          seed: int = DEFAULT_SEED) -> SymmetryVerdict:
    """``L_X eta^a = 0`` for every ``a`` and ``L_X E = 0``; the law is ``F^a = -i_X eta^a``."""
    kernels = _kernels(lag, kernels)
    etas = contact_forms(lag)
    conds = []
    for a, eta in enumerate(etas):
        conds += _form_conditions(f"L_X eta^{a + 1}", lie_derivative(X, eta), kernels, seed)
    conds.append(_cond("L_X E", X(energy(lag)), kernels, seed))
    out = SymmetryVerdict("k-contact symmetry", conds)
    if out.passed:
        out.law = DissipationLaw(tuple(neg(interior_product(X, eta)) for eta in etas))
    return out


def cartan_like_check(lag: Lagrangian, Z: BundleVectorField, g: Sequence, *, kernels=None,
                      seed: int = DEFAULT_SEED) -> SymmetryVerdict:
    """``L_Z eta^a = dg^a`` and ``Z(E) + g^a dL/ds^a = 0``; the law is ``F^a = g^a - i_Z eta^a``."""
    ch = lag.chart
    if len(g) != ch.k:
        raise ChartError(f"expected {ch.k} functions g, got {len(g)}")
    g = [ch.check(as_expr(e), allow_jets=False) for e in g]
    kernels = _kernels(lag, kernels)
    etas = contact_forms(lag)
    conds = []
    for a, eta in enumerate(etas):
        conds += _form_conditions(f"L_Z eta^{a + 1} - dg^{a + 1}", lie_derivative(Z, eta) - d(ch, g[a]),
                                  kernels, seed)
    e_cond = add(Z(energy(lag)), *[mul(g[a], lag.ds(a)) for a in range(ch.k)])
    conds.append(_cond("Z(E) + g^a dL/ds^a", e_cond, kernels, seed))
    out = SymmetryVerdict("Cartan-like symmetry", conds)
    if out.passed:
        out.law = DissipationLaw(tuple(sub(g[a], interior_product(Z, eta)) for a, eta in enumerate(etas)))
    return out


def is_newtonoid(gamma: Sopde, X: BundleVectorField, *, kernels=None, seed: int = DEFAULT_SEED) -> SymmetryVerdict:
    """``Gamma_a(X^i) = X^i_a`` for every ``i`` and ``a``."""
    ch = gamma.chart
    if X.chart != ch:
        raise ChartError("objects live on different charts")
    kernels = ch.kernels if kernels is None else kernels
    conds = []
    for a in range(ch.k):
        for i in range(ch.n):
            e = sub(gamma[a](X.comp(ch.q(i))), X.comp(ch.v(i, a)))
            conds.append(_cond(f"Gamma_{a + 1}(X^{ch.q(i)}) - X^{ch.v(i, a)}", e, kernels, seed))
    return SymmetryVerdict("Newtonoid", conds)


def corollary_law(lag: Lagrangian, Z: BaseVectorField, K: Sequence) -> DissipationLaw:
    """``F^a = Z^{V_a}(L) - K^a``."""
    ch = lag.chart
    if len(K) != ch.k:
        raise ChartError(f"expected {ch.k} constants, got {len(K)}")
    return DissipationLaw(tuple(sub(vertical_lift(Z, a)(lag.L), as_expr(float(K[a]))) for a in range(ch.k)))


def newtonoid_corollary_check(lag: Lagrangian, Z: BaseVectorField, K: Sequence, *, kernels=None,
                              seed: int = DEFAULT_SEED) -> SymmetryVerdict:
    """``X = Z^C + K^a d/ds^a`` with constant ``K``: requires ``X(L) = 0`` and then the
    k-contact conditions; the law is ``Z^{V_a}(L) - K^a``."""
    ch = lag.chart
    if len(K) != ch.k:
        raise ChartError(f"expected {ch.k} constants, got {len(K)}")
    kernels = _kernels(lag, kernels)
    X = complete_lift(Z) + BundleVectorField(ch, {ch.s(a): as_expr(float(K[a])) for a in range(ch.k)})
    first = _cond("X(L)", X(lag.L), kernels, seed)
    out = SymmetryVerdict("Newtonoid corollary", [first])
    if not first.holds:
        out.notes.append("X(L) does not vanish; k-contact conditions not evaluated")
        return out
    kc = is_k_contact_symmetry(lag, X, kernels=kernels, seed=seed)
    out.conditions.extend(kc.conditions)
    if out.passed:
        out.law = corollary_law(lag, Z, K)
    return out


def dynamical_precheck(lag: Lagrangian, X: BundleVectorField, gamma: Sopde, *, kernels=None,
                       seed: int = DEFAULT_SEED) -> Condition:
    """Necessary condition for a dynamical symmetry: ``sum_a i_[X, Gamma_a] eta^a = 0``."""
    kernels = _kernels(lag, kernels)
    etas = contact_forms(lag)
    e = add(*[interior_product(lie_bracket(X, gamma[a]), eta) for a, eta in enumerate(etas)])
    return _cond("i_[X,Gamma_a] eta^a", e, kernels, seed)


# ---------------------------------------------------------------------------
# numeric probe


class ProbeError(ValueError):
    """The probe cannot run on the given solution."""


@dataclass
class ProbeReport:
    eps: float
    baseline_form: float
    baseline_s: float
    excess_form: float
    excess_s: float
    margin: int

    @property
    def baseline(self) -> float:
        return max(self.baseline_form, self.baseline_s)

    @property
    def excess(self) -> float:
        return max(self.excess_form, self.excess_s)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "baseline_form": self.baseline_form, "baseline_s": self.baseline_s,
                "excess_form": self.excess_form, "excess_s": self.excess_s, "margin": self.margin}


class _SectionResidual:
    """Numeric residual of the section-form field equations.

    For a section with tangent vectors ``Y_a = d psi / dt^a`` the one-form part is
    ``i_{Y_a} d eta^a - dE - (dL/ds^a) eta^a`` and the scalar part is
    ``i_{Y_a} eta^a + E``.
    """

    def __init__(self, lag: Lagrangian, kernels):
        self.lag = lag
        self.kernels = kernels
        self.etas = contact_forms(lag)
        self.detas = [exterior_derivative(eta) for eta in self.etas]
        self.E = energy(lag)
        self.dE = d(lag.chart, self.E)

    def __call__(self, state: dict, hs, shape):
        ch = self.lag.chart
        cs = ch.coords()
        pt = dict(ch.parameter_values())
        pt.update(state)
        ev = lambda e: evaluate_on_grid(e, pt, shape, self.kernels)  # noqa: E731
        Y = [{b: centered_derivative(state[b], hs[a], a) for b in cs} for a in range(ch.k)]
        form = {}
        for c in cs:
            acc = -ev(self.dE.coeff(c))
            for a in range(ch.k):
                for b in cs:
                    w = self.detas[a].coeff(b, c)
                    if w != ZERO:
                        acc = acc + Y[a][b] * ev(w)
                eta = self.etas[a].coeff(c)
                if eta != ZERO and self.lag.ds(a) != ZERO:
                    acc = acc - ev(mul(self.lag.ds(a), eta))
            form[c] = np.array(acc)
        scal = ev(self.E)
        for a in range(ch.k):
            for b in cs:
                eta = self.etas[a].coeff(b)
                if eta != ZERO:
                    scal = scal + Y[a][b] * ev(eta)
        return form, np.array(scal)


def dynamical_symmetry_probe(lag: Lagrangian, X: BundleVectorField, sol: FieldSolution, eps: float, *,
                             kernels=None, margin: int = 2, substeps: int = 8,
                             admissible: float = 0.05) -> ProbeReport:
    """Transport the prolonged solution along the flow of ``X`` and measure the extra residual.

    Each node's ``(q, v, s)`` tuple is moved by RK4 for time ``eps``; the
    section-form residual is recomputed with centered differences of the
    moved grid.  ``admissible`` bounds the baseline one-form residual relative
    to the size of ``dE`` on the grid; beyond it the input is not treated as
    a solution.
    """
    ch = lag.chart
    if X.chart != ch:
        raise ChartError("objects live on different charts")
    if sol.n_fields != ch.n or sol.grid.ndim != ch.k:
        raise GridError("solution grid does not match the chart")
    if sol.s is None:
        raise ProbeError("the probe needs reconstructed s fields")
    if min(sol.grid.shape) < 2 * margin + 1:
        raise ProbeError("grid too small for the probe margin")
    kernels = _kernels(lag, kernels)
    shape = sol.grid.shape
    hs = sol.grid.spacing
    state = {}
    for i in range(ch.n):
        state[ch.q(i)] = np.array(sol.phi[i], dtype=float)
        for a in range(ch.k):
            state[ch.v(i, a)] = np.array(sol.jets[i, a], dtype=float)
    for a in range(ch.k):
        state[ch.s(a)] = np.array(sol.s[a], dtype=float)
    res = _SectionResidual(lag, kernels)
    sl = sol.grid.interior(margin)
    f0, s0 = res(state, hs, shape)
    base_form = max(float(np.max(np.abs(v[sl]))) for v in f0.values())
    base_s = float(np.max(np.abs(s0[sl])))
    pt = dict(ch.parameter_values())
    pt.update(state)
    scale = max(float(np.max(np.abs(evaluate_on_grid(res.dE.coeff(c), pt, shape, kernels)[sl])))
                for c in ch.coords())
    if base_form > admissible * max(scale, 1.0):
        raise ProbeError(f"input does not satisfy the field equations (residual {base_form:.3g})")
    if eps == 0.0 or X.is_structurally_zero():
        moved = state
    else:
        moved = flow(X, state, eps, kernels=kernels, substeps=substeps)
    f1, s1 = res(moved, hs, shape)
    ex_form = max(float(np.max(np.abs((f1[c] - f0[c])[sl]))) for c in f0)
    ex_s = float(np.max(np.abs((s1 - s0)[sl])))
    return ProbeReport(float(eps), base_form, base_s, ex_form, ex_s, margin)


def probe_slope(lag: Lagrangian, X: BundleVectorField, sol: FieldSolution, eps_values: Sequence, *,
                part: str = "s", **kw) -> dict:
    """Fit ``excess = slope * eps + c`` over ``eps_values``; returns slope, intercept, R^2 and reports."""
    reports = [dynamical_symmetry_probe(lag, X, sol, e, **kw) for e in eps_values]
    y = np.array([r.excess_s if part == "s" else r.excess_form for r in reports])
    x = np.array([float(e) for e in eps_values])
    slope, icpt = np.polyfit(x, y, 1)
    fit = slope * x + icpt
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return {"slope": float(slope), "intercept": float(icpt), "r2": r2, "reports": reports}
