from __future__ import annotations

import numpy as np
import pytest

from kcontact.bundle import BaseVectorField, BundleVectorField, Sopde, complete_lift
from kcontact.dissipation import verify_symbolic
from kcontact.expr import ZERO, Verdict, add, is_zero, mul, parse, sub
from kcontact.lagrangian import Lagrangian
from kcontact.solver import reconstruct_s_fields, run_preset
from kcontact.symmetry import (ProbeError, cartan_like_check, corollary_law, dynamical_precheck,
                               dynamical_symmetry_probe, is_k_contact_symmetry, is_natural_symmetry, is_newtonoid,
                               newtonoid_corollary_check, probe_slope)

from .conftest import STRING_PARAMS


def _random_poly(rng, chart, coords=None, terms=3):
    coords = chart.coords() if coords is None else coords
    out = [float(rng.uniform(-1, 1))]
    for _ in range(terms):
        x, y = rng.choice(coords, 2)
        out.append(mul(float(rng.uniform(-1, 1)), x, y) if rng.random() < 0.5 else mul(float(rng.uniform(-1, 1)), x))
    return add(*out)


def _random_sopde(rng, chart):
    G = {(i, a, b): _random_poly(rng, chart) for i in range(chart.n) for a in range(chart.k) for b in range(chart.k)}
    S = {(a, b): _random_poly(rng, chart) for a in range(chart.k) for b in range(chart.k)}
    return Sopde(chart, G, S)


# ---------------------------------------------------------------------------
# natural symmetries


def test_translation_is_natural(lag, string_model):
    v = is_natural_symmetry(lag, string_model.basefield("dq"))
    assert v.passed
    assert v.law == string_model.law("F1")


def test_scaling_is_not_natural(lag, string_model, P):
    v = is_natural_symmetry(lag, string_model.basefield("scale"))
    assert not v.passed and v.law is None
    assert is_zero(sub(v.conditions[0].expr, P("rho*v[q,1]^2 - tau*v[q,2]^2"))) == Verdict.PROVEN_ZERO


def test_rotation_is_natural_for_coupled_strings(models):
    m = models["coupled_strings"]
    v = is_natural_symmetry(m.lagrangian, m.basefield("rot"))
    assert v.passed
    # sign of the x component follows from -tau = -1 in the x kinetic term
    assert v.law == m.law("rotation")
    assert is_zero(sub(v.law[0], parse("q1*v[q2,1] - q2*v[q1,1]", m.chart))) == Verdict.PROVEN_ZERO
    assert is_zero(sub(v.law[1], parse("q2*v[q1,2] - q1*v[q2,2]", m.chart))) == Verdict.PROVEN_ZERO


# ---------------------------------------------------------------------------
# k-contact symmetries


def test_translation_is_k_contact(lag, string_model):
    v = is_k_contact_symmetry(lag, string_model.vectorfield("dq"))
    assert v.passed
    assert len(v.conditions) == 2 * len(lag.chart.coords()) + 1
    assert v.law == string_model.law("F1")


def test_zero_field_is_k_contact_with_zero_law(models):
    for m in models.values():
        v = is_k_contact_symmetry(m.lagrangian, BundleVectorField.zero(m.chart))
        assert v.passed
        assert all(F == ZERO for F in v.law)


def test_action_shift_is_not_k_contact(lag, string_model, P):
    v = is_k_contact_symmetry(lag, string_model.vectorfield("ds1"))
    assert not v.passed and v.law is None
    energy_cond = v.conditions[-1]
    assert energy_cond.name == "L_X E" and energy_cond.expr == P("gamma")
    assert v.failed_conditions == [energy_cond]


def test_natural_and_k_contact_laws_coincide(lag, string_model):
    Z = string_model.basefield("dq")
    nat = is_natural_symmetry(lag, Z)
    kc = is_k_contact_symmetry(lag, complete_lift(Z))
    assert nat.law == kc.law


# ---------------------------------------------------------------------------
# Cartan-like fields


def test_cartan_field_with_unit_constant(lag, string_model, P):
    v = cartan_like_check(lag, string_model.vectorfield("cartan"), [P("1"), P("q^2")])
    assert v.passed
    assert is_zero(sub(v.law[0], P("rho*v[q,1]"))) == Verdict.PROVEN_ZERO
    assert is_zero(sub(v.law[1], P("-tau*v[q,2]"))) == Verdict.PROVEN_ZERO


def test_cartan_field_wrong_constant_fails(lag, chart, P):
    Z = BundleVectorField(chart, {chart.q(0): P("1"), chart.s(0): P("3")})
    v = cartan_like_check(lag, Z, [P("1"), P("0")])
    assert not v.passed


def test_cartan_field_doubled_constant(lag, chart, P):
    # Z = dq + 2 ds^t with g^t = 2: the energy condition reads -2 gamma + 2 gamma = 0
    Z = BundleVectorField(chart, {chart.q(0): P("1"), chart.s(0): P("2")})
    v = cartan_like_check(lag, Z, [P("2"), P("0")])
    assert v.passed
    assert is_zero(sub(v.law[0], P("2 + rho*v[q,1] - 2"))) == Verdict.PROVEN_ZERO


def test_cartan_g_count_checked(lag, string_model, P):
    with pytest.raises(Exception):
        cartan_like_check(lag, string_model.vectorfield("cartan"), [P("1")])


def test_cartan_with_zero_g_matches_k_contact_on_random_pairs(chart):
    rng = np.random.default_rng(11)
    base = ["v[q,1]^2", "v[q,2]^2", "v[q,1]*v[q,2]", "q^2", "q*v[q,1]", "s[1]", "s[2]", "q*s[2]"]
    for _ in range(20):
        picks = rng.choice(base, 3, replace=False)
        text = " + ".join(f"({float(rng.uniform(-1, 1))})*{t}" for t in picks)
        lag = Lagrangian.from_text(text, chart)
        comps = {c: _random_poly(rng, chart, terms=1) for c in rng.choice(chart.coords(), 2, replace=False)}
        X = BundleVectorField(chart, comps)
        kc = is_k_contact_symmetry(lag, X)
        cl = cartan_like_check(lag, X, [ZERO, ZERO])
        assert [c.verdict for c in kc.conditions] == [c.verdict for c in cl.conditions]
        assert kc.passed == cl.passed


# ---------------------------------------------------------------------------
# Newtonoid fields


def test_lift_plus_constant_action_shift_is_newtonoid_for_random_sopdes(chart):
    rng = np.random.default_rng(3)
    for _ in range(20):
        Z = BaseVectorField(chart, {chart.q(0): _random_poly(rng, chart, coords=[chart.q(0)], terms=2)})
        K = rng.uniform(-2, 2, chart.k)
        X = complete_lift(Z) + BundleVectorField(chart, {chart.s(a): float(K[a]) for a in range(chart.k)})
        assert is_newtonoid(_random_sopde(rng, chart), X).passed


def test_velocity_field_is_not_newtonoid(chart):
    G = _random_sopde(np.random.default_rng(8), chart)
    X = BundleVectorField(chart, {chart.v(0, 0): 1.0})
    assert not is_newtonoid(G, X).passed


def test_zero_field_is_newtonoid(chart):
    assert is_newtonoid(_random_sopde(np.random.default_rng(9), chart), BundleVectorField.zero(chart)).passed


def test_k_contact_symmetries_are_newtonoid_for_fixture(lag, string_model, P, chart):
    G = string_model.sopde("paper")
    candidates = [string_model.vectorfield(n) for n in ("dq", "scale", "ds1", "cartan", "newt")]
    candidates.append(BundleVectorField.zero(chart))
    found = [X for X in candidates if is_k_contact_symmetry(lag, X).passed]
    assert len(found) == 2
    for X in found:
        assert is_newtonoid(G, X).passed


# ---------------------------------------------------------------------------
# corollary laws


def test_corollary_with_zero_constants(lag, string_model):
    v = newtonoid_corollary_check(lag, string_model.basefield("dq"), [0, 0])
    assert v.passed
    assert v.law == string_model.law("F1")


def test_corollary_law_construction(lag, string_model):
    F = corollary_law(lag, string_model.basefield("dq"), [1, 1])
    assert F == string_model.law("K11")


def test_corollary_rejects_non_invariant_lift(lag, string_model):
    v = newtonoid_corollary_check(lag, string_model.basefield("scale"), [0, 0])
    assert not v.passed and v.law is None
    assert len(v.conditions) == 1 and v.notes


def test_corollary_with_action_shift_breaks_invariance(lag, string_model):
    # X = dq + ds^t + ds^x gives X(L) = -gamma, so the combined check rejects it
    v = newtonoid_corollary_check(lag, string_model.basefield("dq"), [1, 1])
    assert not v.passed


def test_every_emitted_law_is_a_dissipation_law(lag, string_model, models, P):
    laws = [
        is_natural_symmetry(lag, string_model.basefield("dq")).law,
        is_k_contact_symmetry(lag, string_model.vectorfield("dq")).law,
        cartan_like_check(lag, string_model.vectorfield("cartan"), [P("1"), P("q^2")]).law,
        newtonoid_corollary_check(lag, string_model.basefield("dq"), [0, 0]).law,
    ]
    for F in laws:
        assert verify_symbolic(lag, F).verdict == "pass"
    m = models["coupled_strings"]
    F = is_natural_symmetry(m.lagrangian, m.basefield("rot")).law
    assert verify_symbolic(m.lagrangian, F).verdict == "pass"


def test_verdict_serialization(lag, string_model):
    v = is_k_contact_symmetry(lag, string_model.vectorfield("dq"))
    d = v.to_dict()
    assert d["passed"] is True
    assert len(d["conditions"]) == len(v.conditions)
    assert "L_X E" in str(v)


# ---------------------------------------------------------------------------
# dynamical symmetries


def test_precheck_holds_for_translation(lag, string_model):
    assert dynamical_precheck(lag, string_model.vectorfield("dq"), string_model.sopde("paper")).holds


def test_precheck_zero_field(lag, string_model, chart):
    assert dynamical_precheck(lag, BundleVectorField.zero(chart), string_model.sopde("paper")).holds


@pytest.fixture(scope="module")
def string_solution(lag):
    run = run_preset("damped-string", STRING_PARAMS, 101, 101)
    return reconstruct_s_fields(lag, run.solution)


def test_probe_translation_within_discretization(lag, string_model, string_solution):
    rep = dynamical_symmetry_probe(lag, string_model.vectorfield("dq"), string_solution, 1e-3)
    assert rep.excess < 2 * rep.baseline


def test_probe_zero_field_exact(lag, chart, string_solution):
    rep = dynamical_symmetry_probe(lag, BundleVectorField.zero(chart), string_solution, 1e-2)
    assert rep.excess == 0.0


def test_probe_scaling_grows_linearly(lag, string_model, string_solution):
    out = probe_slope(lag, string_model.vectorfield("scale"), string_solution, [1e-4, 1e-3, 1e-2])
    assert out["slope"] > 0 and out["r2"] > 0.99


def test_probe_rejects_non_solution(lag, string_model, string_solution):
    # the gate reads the one-form residual, which does not see s for this Lagrangian
    t, x = string_solution.grid.mesh()
    bad = string_solution.with_s(string_solution.s)
    bad.jets = bad.jets + np.sin(3 * np.pi * x) * np.cos(5 * t)
    with pytest.raises(ProbeError):
        dynamical_symmetry_probe(lag, string_model.vectorfield("dq"), bad, 1e-3)
