"""Vector fields, k-vector fields and low-degree forms on the phase bundle.

Components live in dicts keyed by coordinate symbols of a :class:`BundleChart`
(zero components are simply absent).  Two-form coefficients are keyed by
ordered pairs ``(a, b)`` with ``a`` before ``b`` in :meth:`BundleChart.coords`
order, which makes antisymmetry canonical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .chart import BundleChart, ChartError
from .expr import (ZERO, Expr, Sym, Verdict, add, as_expr, combine_verdicts, diff, evaluate,
                   free_symbols, is_zero, mul, neg, sub, to_text)

__all__ = [
    "BaseVectorField", "BundleVectorField", "KVectorField", "Sopde", "OneForm", "TwoForm",
    "vertical_lift", "complete_lift", "liouville", "apply_k_tangent", "lie_bracket",
    "d", "exterior_derivative", "interior_product", "lie_derivative", "is_sopde",
    "check_integrability", "IntegrabilityReport", "FlowError", "flow", "numeric_lie_derivative",
]


def _clean(comps: Mapping) -> dict:
    return {c: e for c, e in ((c, as_expr(e)) for c, e in comps.items()) if e != ZERO}


def _same_chart(*objs):
    ch = objs[0].chart
    for o in objs[1:]:
        if o.chart != ch:
            raise ChartError("objects live on different charts")
    return ch


@dataclass(frozen=True, eq=False)
class BaseVectorField:
    """``Z = Z^i d/dq^i`` on the configuration space."""

    chart: BundleChart
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        comps = _clean(self.components)
        allowed = set(self.chart.qs())
        for c, e in comps.items():
            if c not in allowed:
                raise ChartError(f"{c} is not a base coordinate")
            self.chart.check(e)
            for s in free_symbols(e):
                if s.kind not in ("q", "p"):
                    raise ChartError(f"base vector field component depends on {s}")
        object.__setattr__(self, "components", comps)

    def comp(self, i: int) -> Expr:
        return self.components.get(self.chart.q(i), ZERO)

    def __call__(self, f: Expr) -> Expr:
        return add(*[mul(e, diff(f, c)) for c, e in self.components.items()])

    def __eq__(self, other):
        return isinstance(other, BaseVectorField) and self.chart == other.chart and self.components == other.components

    def __hash__(self):
        return hash(frozenset(self.components.items()))


@dataclass(frozen=True, eq=False)
class BundleVectorField:
    """A vector field on the phase bundle, components along (q, v, s)."""

    chart: BundleChart
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        comps = _clean(self.components)
        pos = self.chart._coord_positions()
        for c, e in comps.items():
            if c not in pos:
                raise ChartError(f"{c} is not a phase-bundle coordinate")
            self.chart.check(e, allow_jets=False)
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, chart: BundleChart) -> "BundleVectorField":
        return cls(chart, {})

    def comp(self, c: Sym) -> Expr:
        return self.components.get(c, ZERO)

    def __call__(self, f: Expr) -> Expr:
        """Derivative of the function ``f`` along this field."""
        return add(*[mul(e, diff(f, c)) for c, e in self.components.items()])

    def __add__(self, other: "BundleVectorField") -> "BundleVectorField":
        _same_chart(self, other)
        keys = set(self.components) | set(other.components)
        return BundleVectorField(self.chart, {c: add(self.comp(c), other.comp(c)) for c in keys})

    def __sub__(self, other: "BundleVectorField") -> "BundleVectorField":
        return self + other.scale(-1.0)

    def scale(self, f) -> "BundleVectorField":
        return BundleVectorField(self.chart, {c: mul(f, e) for c, e in self.components.items()})

    def is_structurally_zero(self) -> bool:
        return not self.components

    def __eq__(self, other):
        return isinstance(other, BundleVectorField) and self.chart == other.chart and self.components == other.components

    def __hash__(self):
        return hash(frozenset(self.components.items()))

    def __str__(self):
        if not self.components:
            return "0"
        order = self.chart.coords()
        return " + ".join(f"({to_text(self.components[c])})*d/d{to_text(c)}" for c in order if c in self.components)


@dataclass(frozen=True, eq=False)
class KVectorField:
    """An ordered k-tuple ``(X_1, ..., X_k)`` of bundle vector fields."""

    chart: BundleChart
    fields: tuple = ()

    def __post_init__(self):
        fs = tuple(self.fields)
        if len(fs) != self.chart.k:
            raise ChartError(f"expected {self.chart.k} vector fields, got {len(fs)}")
        for f in fs:
            _same_chart(self, f)
        object.__setattr__(self, "fields", fs)

    def __getitem__(self, alpha: int) -> BundleVectorField:
        return self.fields[alpha]

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self.fields)


class Sopde(KVectorField):
    """Second-order PDE k-vector field.

    ``Gamma_a = v^i_a d/dq^i + G[i,a,b] d/dv^i_b + S[a,b] d/ds^b``.
    ``G`` is keyed by ``(i, a, b)`` and ``S`` by ``(a, b)`` (zero based); the
    q-components are fixed to the velocities at construction.
    """

    def __init__(self, chart: BundleChart, G: Mapping | None = None, S: Mapping | None = None):
        G = {key: as_expr(e) for key, e in (G or {}).items()}
        S = {key: as_expr(e) for key, e in (S or {}).items()}
        n, k = chart.n, chart.k
        for (i, a, b) in G:
            if not (0 <= i < n and 0 <= a < k and 0 <= b < k):
                raise ChartError(f"G index {(i, a, b)} out of range")
        for (a, b) in S:
            if not (0 <= a < k and 0 <= b < k):
                raise ChartError(f"S index {(a, b)} out of range")
        fs = []
        for a in range(k):
            comps = {chart.q(i): chart.v(i, a) for i in range(n)}
            for i in range(n):
                for b in range(k):
                    comps[chart.v(i, b)] = G.get((i, a, b), ZERO)
            for b in range(k):
                comps[chart.s(b)] = S.get((a, b), ZERO)
            fs.append(BundleVectorField(chart, comps))
        super().__init__(chart, tuple(fs))
        object.__setattr__(self, "G", {key: e for key, e in G.items() if e != ZERO})
        object.__setattr__(self, "S", {key: e for key, e in S.items() if e != ZERO})

    def g(self, i: int, a: int, b: int) -> Expr:
        return self.G.get((i, a, b), ZERO)

    def s(self, a: int, b: int) -> Expr:
        return self.S.get((a, b), ZERO)

    @classmethod
    def from_kvector(cls, X: KVectorField) -> "Sopde":
        """Reinterpret ``X`` as a Sopde; raises if its q-components are not the velocities."""
        if not is_sopde(X):
            raise ChartError("k-vector field is not a sopde")
        ch = X.chart
        G = {(i, a, b): X[a].comp(ch.v(i, b)) for a in range(ch.k) for i in range(ch.n) for b in range(ch.k)}
        S = {(a, b): X[a].comp(ch.s(b)) for a in range(ch.k) for b in range(ch.k)}
        return cls(ch, G, S)


# ---------------------------------------------------------------------------
# lifts and canonical structures


def vertical_lift(Z: BaseVectorField, alpha: int) -> BundleVectorField:
    ch = Z.chart
    return BundleVectorField(ch, {ch.v(i, alpha): Z.comp(i) for i in range(ch.n)})


def complete_lift(Z: BaseVectorField) -> BundleVectorField:
    ch = Z.chart
    comps = {ch.q(i): Z.comp(i) for i in range(ch.n)}
    for i in range(ch.n):
        for a in range(ch.k):
            comps[ch.v(i, a)] = add(*[mul(ch.v(j, a), diff(Z.comp(i), ch.q(j))) for j in range(ch.n)])
    return BundleVectorField(ch, comps)


def liouville(chart: BundleChart) -> BundleVectorField:
    return BundleVectorField(chart, {v: v for v in chart.vs()})


def apply_k_tangent(alpha: int, X: BundleVectorField) -> BundleVectorField:
    """``J^alpha(X)``: moves the q-components onto the alpha-velocities."""
    ch = X.chart
    if not 0 <= alpha < ch.k:
        raise ChartError(f"field index {alpha} out of range")
    return BundleVectorField(ch, {ch.v(i, alpha): X.comp(ch.q(i)) for i in range(ch.n)})


def lie_bracket(X: BundleVectorField, Y: BundleVectorField) -> BundleVectorField:
    ch = _same_chart(X, Y)
    return BundleVectorField(ch, {c: sub(X(Y.comp(c)), Y(X.comp(c))) for c in ch.coords()})


def is_sopde(X: KVectorField, **zero_kw) -> bool:
    ch = X.chart
    for a in range(ch.k):
        for i in range(ch.n):
            if not is_zero(sub(X[a].comp(ch.q(i)), ch.v(i, a)), **zero_kw).is_zero:
                return False
    return True


@dataclass
class IntegrabilityReport:
    """Bracket components ``[X_a, X_b]`` for every ``a < b`` with their verdicts."""

    pairs: dict

    @property
    def verdict(self) -> Verdict:
        return combine_verdicts(v for comps in self.pairs.values() for _, v in comps.values())

    @property
    def integrable(self) -> bool:
        return self.verdict.is_zero

    def nonzero_components(self) -> dict:
        return {pair: {c: e for c, (e, v) in comps.items() if not v.is_zero}
                for pair, comps in self.pairs.items()}


def check_integrability(X: KVectorField, **zero_kw) -> IntegrabilityReport:
    ch = X.chart
    pairs = {}
    for a in range(ch.k):
        for b in range(a + 1, ch.k):
            br = lie_bracket(X[a], X[b])
            pairs[(a, b)] = {c: (br.comp(c), is_zero(br.comp(c), **zero_kw)) for c in ch.coords()}
    return IntegrabilityReport(pairs)


# ---------------------------------------------------------------------------
# forms


@dataclass(frozen=True, eq=False)
class OneForm:
    chart: BundleChart
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        cs = _clean(self.coeffs)
        pos = self.chart._coord_positions()
        for c, e in cs.items():
            if c not in pos:
                raise ChartError(f"{c} is not a phase-bundle coordinate")
            self.chart.check(e, allow_jets=False)
        object.__setattr__(self, "coeffs", cs)

    def coeff(self, c: Sym) -> Expr:
        return self.coeffs.get(c, ZERO)

    def __add__(self, other: "OneForm") -> "OneForm":
        _same_chart(self, other)
        keys = set(self.coeffs) | set(other.coeffs)
        return OneForm(self.chart, {c: add(self.coeff(c), other.coeff(c)) for c in keys})

    def __sub__(self, other: "OneForm") -> "OneForm":
        return self + other.scale(-1.0)

    def scale(self, f) -> "OneForm":
        return OneForm(self.chart, {c: mul(f, e) for c, e in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, OneForm) and self.chart == other.chart and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def __str__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"({to_text(self.coeffs[c])})*d{to_text(c)}" for c in self.chart.coords() if c in self.coeffs)


@dataclass(frozen=True, eq=False)
class TwoForm:
    chart: BundleChart
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = self.chart._coord_positions()
        cs: dict = {}
        for (a, b), e in self.coeffs.items():
            if a not in pos or b not in pos:
                raise ChartError(f"({a}, {b}) is not a coordinate pair")
            e = as_expr(e)
            if a == b:
                continue
            if pos[a] > pos[b]:
                a, b, e = b, a, neg(e)
            self.chart.check(e, allow_jets=False)
            cs[(a, b)] = add(cs.get((a, b), ZERO), e)
        object.__setattr__(self, "coeffs", _clean(cs))

    def coeff(self, a: Sym, b: Sym) -> Expr:
        pos = self.chart._coord_positions()
        if pos[a] <= pos[b]:
            return self.coeffs.get((a, b), ZERO)
        return neg(self.coeffs.get((b, a), ZERO))

    def __add__(self, other: "TwoForm") -> "TwoForm":
        _same_chart(self, other)
        keys = set(self.coeffs) | set(other.coeffs)
        return TwoForm(self.chart, {p: add(self.coeffs.get(p, ZERO), other.coeffs.get(p, ZERO)) for p in keys})

    def __sub__(self, other: "TwoForm") -> "TwoForm":
        return self + other.scale(-1.0)

    def scale(self, f) -> "TwoForm":
        return TwoForm(self.chart, {p: mul(f, e) for p, e in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, TwoForm) and self.chart == other.chart and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def __str__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"({to_text(e)})*d{to_text(a)}^d{to_text(b)}" for (a, b), e in self.coeffs.items())


def d(chart: BundleChart, f: Expr) -> OneForm:
    """Differential of a function."""
    f = as_expr(f)
    return OneForm(chart, {c: diff(f, c) for c in chart.coords()})


def exterior_derivative(omega):
    """``d`` of a function (given with its chart as a tuple) or of a OneForm."""
    if isinstance(omega, OneForm):
        ch = omega.chart
        cs = ch.coords()
        out = {}
        for x, a in enumerate(cs):
            for b in cs[x + 1:]:
                out[(a, b)] = sub(diff(omega.coeff(b), a), diff(omega.coeff(a), b))
        return TwoForm(ch, out)
    if isinstance(omega, TwoForm):
        raise NotImplementedError("forms of degree three are not supported")
    raise TypeError("use d(chart, f) for functions")


def interior_product(X: BundleVectorField, omega):
    _same_chart(X, omega)
    if isinstance(omega, OneForm):
        return add(*[mul(X.comp(c), e) for c, e in omega.coeffs.items()])
    if isinstance(omega, TwoForm):
        out: dict = {}
        for (a, b), e in omega.coeffs.items():
            out[b] = add(out.get(b, ZERO), mul(X.comp(a), e))
            out[a] = add(out.get(a, ZERO), neg(mul(X.comp(b), e)))
        return OneForm(X.chart, out)
    raise TypeError(f"cannot contract with {type(omega).__name__}")


def lie_derivative(X: BundleVectorField, omega):
    """Lie derivative of a function, OneForm or TwoForm along ``X``."""
    if isinstance(omega, OneForm):
        return interior_product(X, exterior_derivative(omega)) + d(X.chart, interior_product(X, omega))
    if isinstance(omega, TwoForm):
        ch = _same_chart(X, omega)
        cs = ch.coords()
        out = {}
        for x, a in enumerate(cs):
            for b in cs[x + 1:]:
                terms = [X(omega.coeff(a, b))]
                for c in cs:
                    terms.append(mul(omega.coeff(c, b), diff(X.comp(c), a)))
                    terms.append(mul(omega.coeff(a, c), diff(X.comp(c), b)))
                out[(a, b)] = add(*terms)
        return TwoForm(ch, out)
    return X(as_expr(omega))


# ---------------------------------------------------------------------------
# numerics: flows and a pullback-based Lie derivative


class FlowError(ArithmeticError):
    """The RK4 flow produced non-finite values."""


def _rhs(X: BundleVectorField, state: dict, env: dict, kernels):
    pt = dict(env)
    pt.update(state)
    out = {}
    for c in state:
        e = X.comp(c)
        out[c] = evaluate(e, pt, kernels) if e != ZERO else 0.0
    return out


def flow(X: BundleVectorField, state: Mapping, eps: float, *, params: Mapping | None = None,
         kernels=None, substeps: int = 8) -> dict:
    """Transport ``state`` (coordinate symbol -> float or array) along ``X`` for time ``eps``.

    Classical RK4 with ``substeps`` equal steps.  Values may be arrays, in
    which case every node is transported independently.
    """
    ch = X.chart
    env = dict(ch.parameter_values() if params is None else params)
    y = {c: np.asarray(state[c], dtype=float) for c in ch.coords()}
    h = eps / substeps
    for _ in range(substeps):
        k1 = _rhs(X, y, env, kernels)
        k2 = _rhs(X, {c: y[c] + 0.5 * h * k1[c] for c in y}, env, kernels)
        k3 = _rhs(X, {c: y[c] + 0.5 * h * k2[c] for c in y}, env, kernels)
        k4 = _rhs(X, {c: y[c] + h * k3[c] for c in y}, env, kernels)
        y = {c: y[c] + h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]) for c in y}
        if not all(np.all(np.isfinite(v)) for v in y.values()):
            raise FlowError("flow diverged")
    return y


def _pullback(X, omega: OneForm, p: dict, eps: float, params, kernels, h: float) -> np.ndarray:
    ch = X.chart
    cs = ch.coords()
    env = dict(ch.parameter_values() if params is None else params)
    base = flow(X, p, eps, params=env, kernels=kernels)
    pt = dict(env)
    pt.update(base)
    w = np.array([evaluate(omega.coeff(c), pt, kernels) for c in cs])
    jac = np.empty((len(cs), len(cs)))
    for j, c in enumerate(cs):
        plus = dict(p)
        minus = dict(p)
        plus[c] = p[c] + h
        minus[c] = p[c] - h
        fp = flow(X, plus, eps, params=env, kernels=kernels)
        fm = flow(X, minus, eps, params=env, kernels=kernels)
        jac[:, j] = [(fp[r] - fm[r]) / (2 * h) for r in cs]
    return w @ jac


def numeric_lie_derivative(X: BundleVectorField, omega: OneForm, point: Mapping, eps: float = 1e-4, *,
                           params: Mapping | None = None, kernels=None, h: float = 1e-5) -> np.ndarray:
    """Central difference quotient of the pulled-back form ``phi_eps^* omega`` at ``point``.

    Returns coefficients in :meth:`BundleChart.coords` order.
    """
    p = {c: float(point[c]) for c in X.chart.coords()}
    plus = _pullback(X, omega, p, eps, params, kernels, h)
    minus = _pullback(X, omega, p, -eps, params, kernels, h)
    return (plus - minus) / (2 * eps)
