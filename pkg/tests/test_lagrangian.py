from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcontact import BundleChart
from kcontact.bundle import BundleVectorField, KVectorField, Sopde, interior_product, liouville
from kcontact.expr import ZERO, Num, Sym, Verdict, add, diff, evaluate, is_zero, mul, neg, parse, power, sub
from kcontact.lagrangian import (Lagrangian, contact_forms, energy, euler_lagrange_residuals,
                                 geometric_equation_residuals, hessian, is_regular, match_up_to_factor,
                                 solution_sopde_compatibility, sopde_field_residuals)
from kcontact.solver import hyperbolic_grid, manufactured_string_solution, reconstruct_s_fields

from .conftest import STRING_PARAMS


# ---------------------------------------------------------------------------
# energy and forms


def test_string_energy(lag, P):
    assert energy(lag) == P("0.5*rho*v[q,1]^2 - 0.5*tau*v[q,2]^2 + gamma*s[1]")


def test_energy_of_degree_one_lagrangian(chart):
    assert energy(Lagrangian.from_text("v[q,1]", chart)) == ZERO


def test_telegrapher_energy(models):
    m = models["telegrapher"]
    expected = parse("0.5*v[q,1]^2 - v[q,2]^2/(2*L*C) + 0.5*(R*G/(L*C))*q^2 + ((L*G + R*C)/(L*C))*s[1]", m.chart)
    assert is_zero(sub(energy(m.lagrangian), expected)) == Verdict.PROVEN_ZERO


def test_string_contact_forms(lag, chart, P):
    eta_t, eta_x = contact_forms(lag)
    assert eta_t.coeffs == {chart.s(0): Num(1.0), chart.q(0): P("-rho*v[q,1]")}
    assert eta_x.coeffs == {chart.s(1): Num(1.0), chart.q(0): P("tau*v[q,2]")}


def test_contact_forms_without_velocities(chart):
    for a, eta in enumerate(contact_forms(Lagrangian.from_text("q^2 - s[2]", chart))):
        assert eta.coeffs == {chart.s(a): Num(1.0)}


def test_coupled_contact_forms(models):
    m = models["coupled_strings"]
    ch = m.chart
    eta_t = contact_forms(m.lagrangian)[0]
    assert eta_t.coeffs == {ch.s(0): Num(1.0), ch.q(0): neg(ch.v(0, 0)), ch.q(1): neg(ch.v(1, 0))}


def test_liouville_contraction_identity(lag, string_model):
    # i_Delta eta^a = -v dL/dv, hence i_{Gamma_a} eta^a + E = Gamma^a_a - L for any Sopde
    ch = lag.chart
    etas = contact_forms(lag)
    D = liouville(ch)
    for a, eta in enumerate(etas):
        assert interior_product(D, eta) == ZERO  # Delta has no dq component
    G = string_model.sopde("paper")
    lhs = add(*[interior_product(G[a], etas[a]) for a in range(ch.k)], energy(lag))
    rhs = sub(add(*[G.s(a, a) for a in range(ch.k)]), lag.L)
    assert is_zero(sub(lhs, rhs)) == Verdict.PROVEN_ZERO


# ---------------------------------------------------------------------------
# Hessian and regularity


def test_string_hessian(lag, P):
    H = hessian(lag)
    assert H[0, 0] == P("rho") and H[1, 1] == P("-tau") and H[0, 1] == ZERO
    assert H.is_symmetric()


def test_string_regular_iff_parameters_nonzero(chart):
    free = chart.with_parameters(rho=None, tau=None, gamma=None)
    lag = Lagrangian.from_text("(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]", free)
    rep = is_regular(lag)
    assert rep.verdict == "regular"
    assert rep.determinant == parse("-rho*tau", free)
    degenerate = Lagrangian.from_text("(rho/2)*v[q,1]^2 - gamma*s[1]", free)
    assert is_regular(degenerate).verdict == "singular"


def test_telegrapher_hessian(models):
    m = models["telegrapher"]
    H = hessian(m.lagrangian)
    assert is_zero(sub(H[1, 1], parse("-1/(L*C)", m.chart))) == Verdict.PROVEN_ZERO
    assert is_regular(m.lagrangian).verdict == "regular"


def test_affine_lagrangian_singular(chart):
    rep = is_regular(Lagrangian.from_text("v[q,1] + q*v[q,2]", chart))
    assert rep.verdict == "singular"
    assert all(e == ZERO for row in hessian(Lagrangian.from_text("v[q,1]", chart)).entries for e in row)


def test_pointwise_regularity(chart):
    rep = is_regular(Lagrangian.from_text("q*v[q,1]^2 + v[q,2]^2", chart))
    assert rep.verdict == "pointwise"
    assert rep.samples


@pytest.mark.parametrize("name", ["damped_string", "telegrapher", "coupled_strings", "damped_laplace"])
def test_example_lagrangians_regular(models, name):
    assert is_regular(models[name].lagrangian).verdict == "regular"


V_ATOMS = ["v[q,1]", "v[q,2]", "q", "s[1]", "s[2]"]


@st.composite
def poly_text(draw, depth=3):
    if depth == 0 or draw(st.integers(0, 2)) == 0:
        return draw(st.sampled_from(V_ATOMS + ["1", "2", "-0.5"]))
    a, b = draw(poly_text(depth=depth - 1)), draw(poly_text(depth=depth - 1))
    return draw(st.sampled_from([f"({a})+({b})", f"({a})*({b})", f"({a})^2"]))


@settings(max_examples=100, deadline=None)
@given(poly_text())
def test_hessian_symmetric_for_random_lagrangians(text):
    ch = BundleChart(1, 2, ("q",))
    assert hessian(Lagrangian.from_text(text, ch)).is_symmetric()


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals


def test_string_residuals(lag, chart):
    R, = euler_lagrange_residuals(lag).residuals
    assert str(R) == "w[q,1,1]*rho - w[q,2,2]*tau + a[q,1]*gamma*rho"
    m = match_up_to_factor(R, parse("w[q,1,1] - (tau/rho)*w[q,2,2] + gamma*a[q,1]", chart))
    assert m.matches and m.factor == parse("rho", chart)


def test_string_divergence_constraint(lag, chart):
    D = euler_lagrange_residuals(lag).divergence
    expected = sub(parse("r[1,1] + r[2,2]", chart), parse("(rho/2)*a[q,1]^2 - (tau/2)*a[q,2]^2 - gamma*s[1]", chart))
    assert is_zero(sub(D, expected)) == Verdict.PROVEN_ZERO


def test_telegrapher_residual(models):
    m = models["telegrapher"]
    R, = euler_lagrange_residuals(m.lagrangian).residuals
    target = parse("w[q,1,1] - w[q,2,2]/(L*C) + ((L*G + R*C)/(L*C))*a[q,1] + (R*G/(L*C))*q", m.chart)
    assert match_up_to_factor(R, target).matches


def test_coupled_residuals(models):
    m = models["coupled_strings"]
    ch = m.chart
    R = euler_lagrange_residuals(m.lagrangian).residuals
    for i, name in enumerate(("q1", "q2")):
        target = parse(f"w[{name},1,1] - w[{name},2,2] + gamma*a[{name},1] "
                       f"+ C'(sqrt(q1^2 + q2^2))*{name}/sqrt(q1^2 + q2^2)", ch)
        assert match_up_to_factor(R[i], target).matches


def test_laplace_residual(models):
    m = models["damped_laplace"]
    R, = euler_lagrange_residuals(m.lagrangian).residuals
    target = parse("w[q,1,1] + w[q,2,2] + gamma1*a[q,1] + gamma2*a[q,2]", m.chart)
    assert match_up_to_factor(R, target).matches


def test_factor_mismatch_detected(lag, chart):
    R, = euler_lagrange_residuals(lag).residuals
    assert not match_up_to_factor(R, parse("w[q,1,1] - w[q,2,2] + gamma*a[q,1]", chart)).matches


def test_residual_linear_in_second_jets(models):
    for m in models.values():
        system = euler_lagrange_residuals(m.lagrangian)
        ch = m.chart
        for i, R in enumerate(system.residuals):
            for j in range(ch.n):
                for a in range(ch.k):
                    for b in range(a, ch.k):
                        c = diff(R, ch.w(j, a, b))
                        assert all(diff(c, ch.w(jj, aa, bb)) == ZERO
                                   for jj in range(ch.n) for aa in range(ch.k) for bb in range(aa, ch.k))


# ---------------------------------------------------------------------------
# Sopde membership


def test_paper_sopde_is_member(lag, string_model):
    first, trace = sopde_field_residuals(lag, string_model.sopde("paper"))
    assert all(is_zero(e) == Verdict.PROVEN_ZERO for e in first)
    assert is_zero(trace) == Verdict.PROVEN_ZERO


def test_zero_sopde_fails_trace(lag, chart):
    first, trace = sopde_field_residuals(lag, Sopde(chart))
    assert trace == neg(lag.L)
    assert is_zero(trace).is_nonzero


def test_free_lagrangian_sopde():
    ch = BundleChart(1, 1, ("q",), independent_names=("t",))
    lag = Lagrangian.from_text("0.5*v[q,1]^2", ch)
    first, trace = sopde_field_residuals(lag, Sopde(ch, {}, {(0, 0): lag.L}))
    assert first == [ZERO] and trace == ZERO


def test_geometric_residuals_zero_field_gives_minus_energy(lag, chart):
    res = geometric_equation_residuals(lag, KVectorField(chart, (BundleVectorField.zero(chart),) * 2))
    assert is_zero(sub(res.scalar, neg(energy(lag)))) == Verdict.PROVEN_ZERO
    assert is_zero(res.scalar).is_nonzero


def test_geometric_residuals_on_paper_fixture(lag, string_model):
    res = geometric_equation_residuals(lag, string_model.sopde("paper"))
    assert all(is_zero(e) == Verdict.PROVEN_ZERO for e in res.all())


def test_geometric_and_sopde_residuals_agree(lag, chart, P):
    G = Sopde(chart, {(0, 0, 0): P("q*s[2]"), (0, 1, 1): P("v[q,2]^2")}, {(0, 0): P("q"), (1, 1): P("s[1]")})
    geo = geometric_equation_residuals(lag, G)
    first, trace = sopde_field_residuals(lag, G)
    assert is_zero(add(geo.base[0], first[0])) == Verdict.PROVEN_ZERO
    assert is_zero(add(geo.scalar, trace)) == Verdict.PROVEN_ZERO


@pytest.mark.parametrize("name", ["damped_string", "telegrapher"])
def test_regular_lagrangian_forces_sopde(models, name):
    m = models[name]
    base = m.chart
    # unknown q-components X^q_a as extra parameters
    extra = {f"Xq{a + 1}": None for a in range(base.k)}
    ch = BundleChart(base.n, base.k, base.base_names, {**base.parameters, **extra}, base.independent_names)
    lag = Lagrangian(ch, m.lagrangian.L)
    unknowns = [Sym("p", f"Xq{a + 1}") for a in range(ch.k)]
    fields = tuple(BundleVectorField(ch, {ch.q(0): unknowns[a], ch.v(0, a): ch.s(1)}) for a in range(ch.k))
    res = geometric_equation_residuals(lag, KVectorField(ch, fields))
    eqs = [res.velocity[(0, b)] for b in range(ch.k)]
    M = [[diff(e, u) for u in unknowns] for e in eqs]
    rng = np.random.default_rng(5)
    for _ in range(5):
        pt = {**ch.parameter_values(), **{c: float(rng.uniform(-2, 2)) for c in ch.coords()}}
        pt.update({u: 0.0 for u in unknowns})
        A = np.array([[evaluate(e, pt) for e in row] for row in M])
        rhs = -np.array([evaluate(e, pt) for e in eqs])
        sol = np.linalg.solve(A, rhs)
        np.testing.assert_allclose(sol, [pt[ch.v(0, a)] for a in range(ch.k)], atol=1e-12)


# ---------------------------------------------------------------------------
# compatibility with gridded solutions


def _string_solution(lag, n=51, perturb=0.0):
    mw = manufactured_string_solution(STRING_PARAMS)
    sol = mw.evaluate(hyperbolic_grid(1.0, 1.0, n, n))
    if perturb:
        t, x = sol.grid.mesh()
        bump = perturb * np.sin(3 * np.pi * x) * np.cos(2 * t)
        sol.phi = sol.phi + bump
        sol.jets = sol.jets + perturb * np.stack([np.sin(3 * np.pi * x) * -2 * np.sin(2 * t),
                                                  3 * np.pi * np.cos(3 * np.pi * x) * np.cos(2 * t)])[None]
        sol.second = None
    return reconstruct_s_fields(lag, sol)


def test_compatibility_converges_on_manufactured_solution(lag, string_model):
    G = string_model.sopde("paper")
    reps = [solution_sopde_compatibility(lag, G, _string_solution(lag, n)) for n in (41, 81)]
    assert reps[1].linf < reps[0].linf / 3.5
    assert max(reps[1].weighted_linf) < 1e-12  # analytic second jets
    assert reps[1].trace_linf < 2e-3


def test_compatibility_zero_field(lag, string_model, chart):
    from kcontact.solver import FieldSolution
    grid = hyperbolic_grid(1.0, 1.0, 21, 21)
    sol = FieldSolution(grid, np.zeros(grid.shape)).with_s(np.zeros((2,) + grid.shape))
    rep = solution_sopde_compatibility(lag, string_model.sopde("paper"), sol)
    assert rep.trace_linf == 0.0 and rep.divergence_linf == 0.0


def test_compatibility_detects_perturbation(lag, string_model):
    G = string_model.sopde("paper")
    eps = 1e-2
    clean = solution_sopde_compatibility(lag, G, _string_solution(lag, 81))
    dirty = solution_sopde_compatibility(lag, G, _string_solution(lag, 81, perturb=eps))
    assert max(dirty.weighted_linf) > 0.5 * eps
    assert max(dirty.weighted_linf) > 100 * max(clean.weighted_linf + [1e-12])


def test_compatibility_rejects_non_member(lag, chart):
    with pytest.raises(ValueError):
        solution_sopde_compatibility(lag, Sopde(chart), _string_solution(lag, 21))
