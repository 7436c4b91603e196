"""Lagrangian derivations: energy, contact forms, Hessian, field equations.

Jet symbols follow the chart conventions: ``a[i,a]`` is the first derivative
of the field ``i`` along ``t^a``, ``w[i,a,b]`` the second derivative and
``r[a,b]`` the derivative of ``s^b`` along ``t^a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import KVectorField, OneForm, Sopde
from .chart import BundleChart, ChartError
from .expr import (ONE, ZERO, Expr, Sym, Verdict, add, diff, evaluate, free_symbols,
                   is_zero, mul, neg, parse, sub, subs)
from .expr.zero import DEFAULT_SEED, sample_points

__all__ = [
    "Lagrangian", "HessianMatrix", "RegularityReport", "JetResidualSystem", "GeometricResiduals",
    "CompatibilityReport", "FactorMatch", "energy", "contact_forms", "hessian", "is_regular",
    "euler_lagrange_residuals", "match_up_to_factor", "sopde_field_residuals",
    "geometric_equation_residuals", "solution_sopde_compatibility", "jet_substitution",
]


@dataclass(frozen=True, eq=False)
class Lagrangian:
    chart: BundleChart
    L: Expr

    def __post_init__(self):
        self.chart.check(self.L, allow_jets=False)

    @classmethod
    def from_text(cls, text: str, chart: BundleChart) -> "Lagrangian":
        return cls(chart, parse(text, chart))

    # cached partials -------------------------------------------------
    def dv(self, i: int, a: int) -> Expr:
        return self._d(self.chart.v(i, a))

    def dq(self, i: int) -> Expr:
        return self._d(self.chart.q(i))

    def ds(self, a: int) -> Expr:
        return self._d(self.chart.s(a))

    def _d(self, x: Sym) -> Expr:
        cache = self.__dict__.setdefault("_partials", {})
        if x not in cache:
            cache[x] = diff(self.L, x)
        return cache[x]

    def hess(self, i: int, a: int, j: int, b: int) -> Expr:
        """``d^2 L / dv^i_a dv^j_b``."""
        return diff(self.dv(i, a), self.chart.v(j, b))


def energy(lag: Lagrangian) -> Expr:
    ch = lag.chart
    return sub(add(*[mul(ch.v(i, a), lag.dv(i, a)) for i in range(ch.n) for a in range(ch.k)]), lag.L)


def contact_forms(lag: Lagrangian) -> list[OneForm]:
    ch = lag.chart
    out = []
    for a in range(ch.k):
        coeffs = {ch.s(a): ONE}
        for i in range(ch.n):
            coeffs[ch.q(i)] = neg(lag.dv(i, a))
        out.append(OneForm(ch, coeffs))
    return out


# ---------------------------------------------------------------------------
# Hessian and regularity


@dataclass(frozen=True)
class HessianMatrix:
    """Rows and columns indexed by ``(i, a)`` in i-major order."""

    chart: BundleChart
    entries: tuple

    @property
    def labels(self) -> list[tuple[int, int]]:
        return [(i, a) for i in range(self.chart.n) for a in range(self.chart.k)]

    def __getitem__(self, key) -> Expr:
        return self.entries[key[0]][key[1]]

    @property
    def size(self) -> int:
        return len(self.entries)

    def is_symmetric(self) -> bool:
        m = self.size
        return all(self.entries[r][c] == self.entries[c][r] for r in range(m) for c in range(m))

    def numeric(self, point) -> np.ndarray:
        return np.array([[float(evaluate(e, point)) for e in row] for row in self.entries])


def hessian(lag: Lagrangian) -> HessianMatrix:
    ch = lag.chart
    labels = [(i, a) for i in range(ch.n) for a in range(ch.k)]
    return HessianMatrix(ch, tuple(tuple(lag.hess(i, a, j, b) for (j, b) in labels) for (i, a) in labels))


def _determinant(rows: tuple) -> Expr:
    """Symbolic determinant by Laplace expansion with zero skipping."""
    m = len(rows)
    memo: dict = {}

    def det(r: int, cols: tuple) -> Expr:
        if r == m:
            return ONE
        key = (r, cols)
        if key in memo:
            return memo[key]
        terms = []
        for pos, c in enumerate(cols):
            e = rows[r][c]
            if e == ZERO:
                continue
            minor = det(r + 1, cols[:pos] + cols[pos + 1:])
            if minor == ZERO:
                continue
            t = mul(e, minor)
            terms.append(neg(t) if pos % 2 else t)
        memo[key] = out = add(*terms)
        return out

    return det(0, tuple(range(m)))


@dataclass
class RegularityReport:
    verdict: str  # "regular", "singular" or "pointwise"
    determinant: Expr
    zero_verdict: Verdict
    samples: list = field(default_factory=list)  # (point, det value, rank) for pointwise verdicts

    def __str__(self):
        return self.verdict


def is_regular(lag: Lagrangian, *, seed: int = DEFAULT_SEED, n_samples: int = 16, kernels=None) -> RegularityReport:
    """Regularity from the symbolic Hessian determinant.

    A determinant involving only parameters gives a global verdict; one that
    depends on phase-bundle coordinates gives ``pointwise`` with sampled
    determinant values and numeric ranks.
    """
    H = hessian(lag)
    det = _determinant(H.entries)
    kernels = kernels if kernels is not None else lag.chart.kernels
    zv = is_zero(det, seed=seed, kernels=kernels)
    if zv.is_zero:
        return RegularityReport("singular", det, zv)
    if all(s.kind == "p" for s in free_symbols(det)):
        return RegularityReport("regular", det, zv)
    rng = np.random.default_rng(seed)
    syms = sorted(set().union(*[free_symbols(e) for row in H.entries for e in row]) | free_symbols(det),
                  key=lambda s: (s.kind, s.name, s.idx))
    samples = []
    for _ in range(n_samples):
        pt = sample_points(syms, rng)
        try:
            val = float(evaluate(det, pt, kernels))
            rank = int(np.linalg.matrix_rank(np.array([[float(evaluate(e, pt, kernels)) for e in row]
                                                       for row in H.entries])))
        except ArithmeticError:
            continue
        samples.append((pt, val, rank))
    return RegularityReport("pointwise", det, zv, samples)


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals on jets


def jet_substitution(chart: BundleChart) -> dict:
    """Velocities replaced by first jets."""
    return {chart.v(i, a): chart.a(i, a) for i in range(chart.n) for a in range(chart.k)}


@dataclass(frozen=True)
class JetResidualSystem:
    chart: BundleChart
    residuals: tuple  # R_i
    divergence: Expr  # D = r[a,a] - L

    def __iter__(self):
        return iter(self.residuals + (self.divergence,))


def euler_lagrange_residuals(lag: Lagrangian) -> JetResidualSystem:
    ch = lag.chart
    n, k = ch.n, ch.k
    out = []
    for i in range(n):
        terms = []
        for a in range(k):
            p = lag.dv(i, a)
            for j in range(n):
                for b in range(k):
                    terms.append(mul(diff(p, ch.v(j, b)), ch.w(j, a, b)))
                terms.append(mul(diff(p, ch.q(j)), ch.v(j, a)))
            for b in range(k):
                terms.append(mul(diff(p, ch.s(b)), ch.r(a, b)))
            terms.append(neg(mul(lag.ds(a), p)))
        terms.append(neg(lag.dq(i)))
        out.append(subs(add(*terms), jet_substitution(ch)))
    D = sub(add(*[ch.r(a, a) for a in range(k)]), subs(lag.L, jet_substitution(ch)))
    return JetResidualSystem(ch, tuple(out), D)


@dataclass
class FactorMatch:
    factor: Expr
    difference: Expr
    verdict: Verdict
    factor_verdict: Verdict

    @property
    def matches(self) -> bool:
        return self.verdict.is_zero and self.factor_verdict.is_nonzero


def match_up_to_factor(residual: Expr, target: Expr, *, lead: Sym | None = None, **zero_kw) -> FactorMatch:
    """Check ``residual == c * target`` for a nonzero constant ``c``.

    ``c`` is read off the coefficient of the leading jet symbol (the first
    second jet of ``target`` unless ``lead`` is given).
    """
    if lead is None:
        cands = sorted((s for s in free_symbols(target) if s.kind == "w"), key=lambda s: (s.name, s.idx))
        if not cands:
            raise ValueError("target has no second-jet symbol to normalize by")
        lead = cands[0]
    c = mul(diff(residual, lead), _inverse(diff(target, lead)))
    fv = is_zero(c, **zero_kw)
    if any(s.kind not in ("p",) for s in free_symbols(c)):
        fv = Verdict.INDETERMINATE if fv.is_nonzero else fv
    diffe = sub(residual, mul(c, target))
    return FactorMatch(c, diffe, is_zero(diffe, **zero_kw), fv)


def _inverse(e: Expr) -> Expr:
    if e == ZERO:
        raise ZeroDivisionError("target does not contain the leading jet")
    return e ** -1


# ---------------------------------------------------------------------------
# k-vector field equations


def sopde_field_residuals(lag: Lagrangian, gamma: Sopde) -> tuple[list[Expr], Expr]:
    """Membership residuals of a Sopde: one per base coordinate plus the trace."""
    ch = lag.chart
    if gamma.chart != ch:
        raise ChartError("sopde and lagrangian live on different charts")
    first = []
    for i in range(ch.n):
        terms = []
        for a in range(ch.k):
            p = lag.dv(i, a)
            terms.append(gamma[a](p))
            terms.append(neg(mul(lag.ds(a), p)))
        terms.append(neg(lag.dq(i)))
        first.append(add(*terms))
    trace = sub(add(*[gamma.s(a, a) for a in range(ch.k)]), lag.L)
    return first, trace


@dataclass(frozen=True)
class GeometricResiduals:
    """The four local families of the k-contact field equations.

    ``action[b]`` is the ``ds^b`` family, ``velocity[(i, b)]`` the ``dv^i_b``
    family, ``base[i]`` the ``dq^i`` family and ``scalar`` the energy
    condition, written with the sign ``L + (X^j_a - v^j_a) dL/dv^j_a - X^a_a``.
    """

    action: tuple
    velocity: dict
    base: tuple
    scalar: Expr

    def all(self) -> list[Expr]:
        return list(self.action) + list(self.velocity.values()) + list(self.base) + [self.scalar]


def geometric_equation_residuals(lag: Lagrangian, X: KVectorField) -> GeometricResiduals:
    ch = lag.chart
    if X.chart != ch:
        raise ChartError("k-vector field and lagrangian live on different charts")
    n, k = ch.n, ch.k
    dev = {(j, a): sub(X[a].comp(ch.q(j)), ch.v(j, a)) for j in range(n) for a in range(k)}
    action = tuple(add(*[mul(dev[(j, a)], diff(lag.dv(j, a), ch.s(b))) for j in range(n) for a in range(k)])
                   for b in range(k))
    velocity = {(i, b): add(*[mul(dev[(j, a)], lag.hess(i, b, j, a)) for j in range(n) for a in range(k)])
                for i in range(n) for b in range(k)}
    base = []
    for i in range(n):
        terms = [lag.dq(i)]
        for a in range(k):
            p = lag.dv(i, a)
            terms.append(mul(lag.ds(a), p))
            for j in range(n):
                terms.append(mul(dev[(j, a)], diff(lag.dv(j, a), ch.q(i))))
                terms.append(neg(mul(X[a].comp(ch.q(j)), diff(p, ch.q(j)))))
                for b in range(k):
                    terms.append(neg(mul(X[a].comp(ch.v(j, b)), diff(p, ch.v(j, b)))))
            for b in range(k):
                terms.append(neg(mul(X[a].comp(ch.s(b)), diff(p, ch.s(b)))))
        base.append(add(*terms))
    scalar = add(lag.L, *[mul(dev[(j, a)], lag.dv(j, a)) for j in range(n) for a in range(k)],
                 *[neg(X[a].comp(ch.s(a))) for a in range(k)])
    return GeometricResiduals(action, velocity, tuple(base), scalar)


# ---------------------------------------------------------------------------
# compatibility of a Sopde with a gridded solution


@dataclass
class CompatibilityReport:
    """Grid norms of the Hessian-weighted mismatch (one per field) and of the trace conditions."""

    weighted_linf: list
    weighted_l2: list
    trace_linf: float
    trace_l2: float
    divergence_linf: float
    divergence_l2: float
    membership: tuple

    @property
    def linf(self) -> float:
        return max(self.weighted_linf + [self.trace_linf, self.divergence_linf])


def _norms(x: np.ndarray, sl) -> tuple[float, float]:
    v = np.abs(x[sl])
    return float(v.max()), float(np.sqrt(np.mean(v ** 2)))


def solution_sopde_compatibility(lag: Lagrangian, gamma: Sopde, sol, *, kernels=None,
                                 check_membership: bool = True) -> CompatibilityReport:
    """Evaluate the Sopde/solution compatibility conditions over interior nodes.

    ``sol`` is a :class:`kcontact.solver.FieldSolution` carrying ``phi``,
    first jets and ``s``; second jets and ``ds`` come from centered
    differences unless stored analytically.
    """
    ch = lag.chart
    if sol.n_fields != ch.n or sol.grid.ndim != ch.k:
        raise ChartError("solution grid does not match the chart")
    kernels = kernels if kernels is not None else ch.kernels
    membership = (Verdict.PROVEN_ZERO,)
    if check_membership:
        first, trace = sopde_field_residuals(lag, gamma)
        membership = tuple(is_zero(e, kernels=kernels) for e in first + [trace])
        if not all(v.is_zero for v in membership):
            raise ValueError("sopde is not a k-contact Lagrangian k-vector field for this Lagrangian")
    pt = sol.point_arrays(ch)
    w = sol.second_jets()
    r = sol.s_jets()
    sl = sol.grid.interior()

    def ev(e):
        return np.broadcast_to(evaluate(e, pt, kernels), sol.grid.shape)

    n, k = ch.n, ch.k
    w_inf, w_l2 = [], []
    for i in range(n):
        acc = np.zeros(sol.grid.shape)
        for a in range(k):
            for b in range(k):
                for j in range(n):
                    g = lag.hess(i, a, j, b)
                    if g != ZERO:
                        acc = acc + ev(g) * (ev(gamma.g(j, a, b)) - w[j, a, b])
                h = diff(lag.dv(i, a), ch.s(b))
                if h != ZERO:
                    acc = acc + ev(h) * (ev(gamma.s(a, b)) - r[a, b])
        m = _norms(acc, sl)
        w_inf.append(m[0])
        w_l2.append(m[1])
    div = sum(r[a, a] for a in range(k))
    tr = sum(ev(gamma.s(a, a)) for a in range(k)) - div
    dv = div - ev(lag.L)
    t_inf, t_l2 = _norms(tr, sl)
    d_inf, d_l2 = _norms(dv, sl)
    return CompatibilityReport(w_inf, w_l2, t_inf, t_l2, d_inf, d_l2, membership)
