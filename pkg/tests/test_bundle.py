from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcontact import BundleChart, ChartError
from kcontact.bundle import (BaseVectorField, BundleVectorField, KVectorField, OneForm, Sopde, TwoForm,
                             apply_k_tangent, check_integrability, complete_lift, d, exterior_derivative, flow,
                             interior_product, is_sopde, lie_bracket, lie_derivative, liouville,
                             numeric_lie_derivative, vertical_lift)
from kcontact.expr import ZERO, Num, Sym, Verdict, add, evaluate, is_zero, mul, parse, power, sub
from kcontact.lagrangian import contact_forms

CH = BundleChart(2, 2, ("q1", "q2"), {"c": 0.7}, ("t", "x"))



# ---------------------------------------------------------------------------
# lifts and canonical structures


def test_vertical_lift_of_translation(chart):
    Z = BaseVectorField(chart, {chart.q(0): 1.0})
    assert vertical_lift(Z, 0).components == {chart.v(0, 0): Num(1.0)}


def test_vertical_lift_of_zero(chart):
    assert vertical_lift(BaseVectorField(chart, {}), 1).is_structurally_zero()


def test_vertical_lift_of_rotation():
    q1, q2 = CH.q(0), CH.q(1)
    Z = BaseVectorField(CH, {q2: q1, q1: mul(-1.0, q2)})
    V = vertical_lift(Z, 0)
    assert V.comp(CH.v(1, 0)) == q1
    assert V.comp(CH.v(0, 0)) == mul(-1.0, q2)
    assert V.comp(CH.q(0)) == ZERO and V.comp(CH.v(0, 1)) == ZERO


def test_vertical_lift_index_out_of_range(chart):
    with pytest.raises(ChartError):
        vertical_lift(BaseVectorField(chart, {chart.q(0): 1.0}), 2)


def test_base_field_rejects_velocities(chart):
    with pytest.raises(ChartError):
        BaseVectorField(chart, {chart.q(0): chart.v(0, 0)})


def test_complete_lift_of_translation(chart):
    Z = BaseVectorField(chart, {chart.q(0): 1.0})
    assert complete_lift(Z) == BundleVectorField(chart, {chart.q(0): 1.0})


def test_complete_lift_of_scaling(chart):
    q = chart.q(0)
    X = complete_lift(BaseVectorField(chart, {q: q}))
    assert X == BundleVectorField(chart, {q: q, chart.v(0, 0): chart.v(0, 0), chart.v(0, 1): chart.v(0, 1)})


def test_complete_lift_of_zero(chart):
    assert complete_lift(BaseVectorField(chart, {})).is_structurally_zero()


def test_liouville(chart, lag, P):
    D = liouville(chart)
    assert D == BundleVectorField(chart, {chart.v(0, 0): chart.v(0, 0), chart.v(0, 1): chart.v(0, 1)})
    assert D(P("q^2 + gamma*s[1]")) == ZERO
    assert D(lag.L) == P("rho*v[q,1]^2 - tau*v[q,2]^2")


def test_k_tangent_examples(chart):
    dq = BundleVectorField(chart, {chart.q(0): 1.0})
    assert apply_k_tangent(0, dq) == BundleVectorField(chart, {chart.v(0, 0): 1.0})
    assert apply_k_tangent(1, BundleVectorField(chart, {chart.v(0, 0): 1.0})).is_structurally_zero()


def test_k_tangent_of_sopde_sums_to_liouville(string_model):
    G = string_model.sopde("paper")
    ch = G.chart
    total = BundleVectorField.zero(ch)
    for a in range(ch.k):
        total = total + apply_k_tangent(a, G[a])
    assert total == liouville(ch)


# ---------------------------------------------------------------------------
# brackets and sopdes


def test_bracket_with_itself(string_model):
    X = string_model.sopde("paper")[0]
    assert lie_bracket(X, X).is_structurally_zero()


def test_bracket_q_independent(chart):
    A = BundleVectorField(chart, {chart.q(0): 1.0})
    B = BundleVectorField(chart, {chart.q(0): chart.v(0, 0)})
    assert lie_bracket(A, B).is_structurally_zero()


def test_is_sopde(string_model, chart):
    assert is_sopde(string_model.sopde("paper"))
    D = liouville(chart)
    assert not is_sopde(KVectorField(chart, (D, D)))
    assert is_sopde(Sopde(chart, {(0, 0, 1): parse("q^3*s[2]", chart)}))


def test_sopde_round_trip(string_model):
    G = string_model.sopde("paper")
    H = Sopde.from_kvector(KVectorField(G.chart, tuple(G)))
    assert H.G == G.G and H.S == G.S


def test_integrability_constant_symmetric():
    G = {(0, 0, 1): 2.0, (0, 1, 0): 2.0, (1, 0, 0): -1.0, (1, 1, 1): 0.5}
    S = {(0, 0): 3.0, (1, 1): -1.0, (0, 1): 0.25}
    rep = check_integrability(Sopde(CH, G, S))
    assert rep.integrable
    assert rep.verdict == Verdict.PROVEN_ZERO


def test_integrability_k1_vacuous():
    ch = BundleChart(1, 1, ("q",))
    rep = check_integrability(Sopde(ch, {(0, 0, 0): parse("q^2*v[q,1]", ch)}))
    assert rep.integrable and rep.pairs == {}


def test_integrability_of_explicit_string_pair(string_model, chart, P):
    # The bracket of the explicit pair does not vanish; the v-component below
    # comes from brute-force expansion (recorded as a discrepancy).
    rep = check_integrability(string_model.sopde("paper"))
    assert not rep.integrable
    assert rep.verdict == Verdict.PROVEN_NONZERO
    comps = rep.nonzero_components()[(0, 1)]
    expected = P("-v[q,1]*s[1]*gamma*rho^2/tau + 0.5*v[q,1]^3*rho^3/tau")
    assert is_zero(sub(comps[chart.v(0, 1)], expected)) == Verdict.PROVEN_ZERO


def test_integrability_fails_from_quadratic_terms_alone(chart, P):
    G = {(0, 1, 1): P("-(rho^2/(2*tau))*v[q,1]^2")}
    S = {(0, 0): P("0.5*rho*v[q,1]^2"), (1, 1): P("-0.5*tau*v[q,2]^2")}
    G[(0, 0, 0)] = P("-0.5*rho*v[q,1]^2")
    rep = check_integrability(Sopde(chart, G, S))
    assert not rep.integrable


# ---------------------------------------------------------------------------
# forms


def test_d_eta_string(lag, chart):
    eta_t, eta_x = contact_forms(lag)
    deta = exterior_derivative(eta_t)
    q, vt = chart.q(0), chart.v(0, 0)
    assert deta.coeff(vt, q) == parse("-rho", chart)
    assert deta.coeff(q, vt) == parse("rho", chart)
    assert set(deta.coeffs) == {(q, vt)}


def test_interior_translation_eta(lag, chart, P):
    eta_t, _ = contact_forms(lag)
    assert interior_product(BundleVectorField(chart, {chart.q(0): 1.0}), eta_t) == P("-rho*v[q,1]")


def test_lie_derivative_zero_field(lag, chart):
    eta_t, _ = contact_forms(lag)
    L0 = lie_derivative(BundleVectorField.zero(chart), eta_t)
    assert all(e == ZERO for e in L0.coeffs.values())
    assert lie_derivative(BundleVectorField.zero(chart), lag.L) == ZERO


def test_exterior_derivative_of_two_form_unsupported(lag):
    with pytest.raises(NotImplementedError):
        exterior_derivative(exterior_derivative(contact_forms(lag)[0]))


def test_two_form_antisymmetry(chart):
    q, vt = chart.q(0), chart.v(0, 0)
    w = TwoForm(chart, {(vt, q): 2.0})
    assert w.coeff(q, vt) == Num(-2.0)
    assert w.coeff(q, q) == ZERO


def test_interior_product_two_form_is_antisymmetric_pairing(lag, chart):
    deta = exterior_derivative(contact_forms(lag)[0])
    X = BundleVectorField(chart, {chart.q(0): chart.v(0, 1), chart.v(0, 0): chart.s(1)})
    assert is_zero(interior_product(X, interior_product(X, deta))).is_zero


# ---------------------------------------------------------------------------
# random objects for properties

ATOMS = [CH.q(0), CH.q(1), CH.v(0, 0), CH.v(1, 1), CH.v(0, 1), CH.s(0), CH.s(1)]


@st.composite
def poly(draw, atoms=ATOMS, depth=2):
    if depth == 0 or draw(st.integers(0, 2)) == 0:
        if draw(st.booleans()):
            return Num(float(draw(st.integers(-2, 2))))
        return draw(st.sampled_from(atoms))
    a = draw(poly(atoms, depth - 1))
    b = draw(poly(atoms, depth - 1))
    return draw(st.sampled_from([add(a, b), mul(a, b), power(a, 2)]))


@st.composite
def bundle_fields(draw):
    comps = {}
    for c in draw(st.lists(st.sampled_from(CH.coords()), min_size=1, max_size=4, unique=True)):
        comps[c] = draw(poly())
    return BundleVectorField(CH, comps)


@st.composite
def base_fields(draw):
    qs = CH.qs()
    return BaseVectorField(CH, {q: draw(poly(atoms=qs)) for q in qs})


@settings(max_examples=40, deadline=None)
@given(bundle_fields(), st.integers(0, 1), st.integers(0, 1))
def test_k_tangent_squares_to_zero(X, a, b):
    assert apply_k_tangent(a, apply_k_tangent(b, X)).is_structurally_zero()


@settings(max_examples=40, deadline=None)
@given(base_fields(), st.integers(0, 1))
def test_k_tangent_of_complete_lift_is_vertical_lift(Z, a):
    assert apply_k_tangent(a, complete_lift(Z)) == vertical_lift(Z, a)


@settings(max_examples=40, deadline=None)
@given(poly(depth=3))
def test_d_squared_is_zero(f):
    dd = exterior_derivative(d(CH, f))
    assert all(is_zero(e) == Verdict.PROVEN_ZERO for e in dd.coeffs.values())


@settings(max_examples=15, deadline=None)
@given(bundle_fields(), bundle_fields(), bundle_fields())
def test_jacobi_identity(X, Y, Z):
    J = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
    assert all(is_zero(J.comp(c)) == Verdict.PROVEN_ZERO for c in CH.coords())


@settings(max_examples=25, deadline=None)
@given(bundle_fields(), poly())
def test_lie_derivative_commutes_with_d(X, f):
    lhs = lie_derivative(X, d(CH, f))
    rhs = d(CH, X(f))
    assert all(is_zero(sub(lhs.coeff(c), rhs.coeff(c))).is_zero for c in CH.coords())


def _linear_field(rng):
    comps = {}
    for c in CH.coords():
        terms = [mul(float(rng.uniform(-0.5, 0.5)), x) for x in rng.choice(CH.coords(), 2, replace=False)]
        comps[c] = add(float(rng.uniform(-0.5, 0.5)), *terms)
    return BundleVectorField(CH, comps)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cartan_formula_matches_flow_pullback(seed):
    rng = np.random.default_rng(seed)
    X = _linear_field(rng)
    X = X + BundleVectorField(CH, {CH.q(0): power(CH.q(1), 2)})
    omega = OneForm(CH, {CH.q(0): mul(CH.v(0, 0), CH.s(1)), CH.s(0): power(CH.q(0), 2), CH.v(1, 1): 1.0})
    point = {c: float(rng.uniform(-1, 1)) for c in CH.coords()}
    eps = 1e-4
    num = numeric_lie_derivative(X, omega, point, eps)
    sym = lie_derivative(X, omega)
    pt = {**CH.parameter_values(), **point}
    exact = np.array([evaluate(sym.coeff(c), pt) for c in CH.coords()])
    assert np.max(np.abs(num - exact)) < 1e-5


def test_flow_of_translation_and_arrays(chart):
    X = BundleVectorField(chart, {chart.q(0): 1.0, chart.s(0): chart.q(0)})
    state = {c: np.zeros(3) for c in chart.coords()}
    out = flow(X, state, 0.5)
    np.testing.assert_allclose(out[chart.q(0)], 0.5)
    np.testing.assert_allclose(out[chart.s(0)], 0.125)


def test_flow_of_scaling_matches_exponential(chart):
    q = chart.q(0)
    X = BundleVectorField(chart, {q: q})
    state = {c: 0.0 for c in chart.coords()}
    state[q] = 1.0
    assert abs(float(flow(X, state, 0.1)[q]) - np.exp(0.1)) < 1e-10


def test_objects_on_different_charts_rejected(chart):
    with pytest.raises(ChartError):
        lie_bracket(BundleVectorField(chart, {chart.q(0): 1.0}), BundleVectorField(CH, {CH.q(0): 1.0}))


def test_unknown_symbol_rejected(chart):
    with pytest.raises(ChartError):
        BundleVectorField(chart, {chart.q(0): Sym("q", "z")})
