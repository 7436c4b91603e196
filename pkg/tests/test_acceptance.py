"""Acceptance criteria.  Each test prints one ``CRITERION n: PASS|FAIL`` line, then asserts."""

from __future__ import annotations

import time

import numpy as np
import pytest

from kcontact.bundle import BaseVectorField, BundleVectorField, Sopde, check_integrability, complete_lift, is_sopde
from kcontact.dissipation import refinement_study, verify_on_solution, verify_symbolic
from kcontact.expr import Verdict, add, is_zero, mul, parse, sub
from kcontact.lagrangian import (Lagrangian, contact_forms, energy, euler_lagrange_residuals, hessian, is_regular,
                                 match_up_to_factor, sopde_field_residuals)
from kcontact.solver import hyperbolic_grid, manufactured_string_solution, observed_order, reconstruct_s_fields, \
    run_preset
from kcontact.symmetry import (cartan_like_check, corollary_law, dynamical_symmetry_probe, is_k_contact_symmetry,
                               is_natural_symmetry, is_newtonoid, probe_slope)

from .conftest import STRING_PARAMS

GRIDS = (51, 101, 201)


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, f"criterion {n}: {detail}"
    return emit


# ---------------------------------------------------------------------------


def test_criterion_1_symbolic_derivation_fidelity(models, report):
    start = time.perf_counter()
    targets = {
        "damped_string": ["w[q,1,1] - (tau/rho)*w[q,2,2] + gamma*a[q,1]"],
        "telegrapher": ["w[q,1,1] - w[q,2,2]/(L*C) + ((L*G + R*C)/(L*C))*a[q,1] + (R*G/(L*C))*q"],
        "coupled_strings": [f"w[{c},1,1] - w[{c},2,2] + gamma*a[{c},1] + C'(sqrt(q1^2 + q2^2))*{c}/sqrt(q1^2 + q2^2)"
                            for c in ("q1", "q2")],
        "damped_laplace": ["w[q,1,1] + w[q,2,2] + gamma1*a[q,1] + gamma2*a[q,2]"],
    }
    ok = True
    for name, texts in targets.items():
        m = models[name]
        residuals = euler_lagrange_residuals(m.lagrangian).residuals
        for R, text in zip(residuals, texts):
            match = match_up_to_factor(R, parse(text, m.chart))
            ok = ok and match.matches and is_zero(match.factor).is_nonzero
            ok = ok and is_zero(sub(R, mul(match.factor, parse(text, m.chart)))).is_zero
    elapsed = time.perf_counter() - start
    report(1, ok and elapsed < 5.0, f"4 examples matched up to a nonzero factor in {elapsed:.2f} s")


def test_criterion_2_geometric_object_fidelity(models, report):
    m = models["damped_string"]
    ch, lag = m.chart, m.lagrangian
    E_ok = energy(lag) == parse("(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 + gamma*s[1]", ch)
    eta_t, eta_x = contact_forms(lag)
    eta_ok = (eta_t.coeffs == {ch.s(0): parse("1", ch), ch.q(0): parse("-rho*v[q,1]", ch)}
              and eta_x.coeffs == {ch.s(1): parse("1", ch), ch.q(0): parse("tau*v[q,2]", ch)})
    H = hessian(lag)
    H_ok = H[0, 0] == parse("rho", ch) and H[1, 1] == parse("-tau", ch) and H[0, 1] == parse("0", ch)
    verdicts = {name: is_regular(models[name].lagrangian).verdict for name in models}
    reg_ok = all(v == "regular" for v in verdicts.values())
    report(2, E_ok and eta_ok and H_ok and reg_ok,
           f"energy {E_ok}, contact forms {eta_ok}, Hessian {H_ok}, regularity {verdicts}")


def test_criterion_3_paper_sopde_fixture(models, report):
    m = models["damped_string"]
    G = m.sopde("paper")
    first, trace = sopde_field_residuals(m.lagrangian, G)
    member = all(is_zero(e) == Verdict.PROVEN_ZERO for e in first + [trace])
    integ = check_integrability(G)
    # the bracket verdict is recorded, not required
    report(3, is_sopde(G) and member,
           f"is_sopde {is_sopde(G)}, membership residuals proven zero {member}, "
           f"integrability bracket verdict {integ.verdict}")


def test_criterion_4_dissipation_laws(models, report):
    m = models["damped_string"]
    reps = {n: verify_symbolic(m.lagrangian, m.law(n)) for n in ("F1", "F2", "broken")}
    ok = (reps["F1"].passed and reps["F1"].max_residual < 1e-8 and reps["F2"].passed
          and reps["F2"].max_residual < 1e-8 and not reps["broken"].passed)
    report(4, ok, ", ".join(f"{n} {r.verdict} (max {r.max_residual:.2e})" for n, r in reps.items()))


def test_criterion_5_symmetry_to_law_pipeline(models, report):
    m = models["damped_string"]
    ch, lag = m.chart, m.lagrangian
    F1 = m.law("F1")
    nat = is_natural_symmetry(lag, m.basefield("dq"))
    kc = is_k_contact_symmetry(lag, m.vectorfield("dq"))
    sym_ok = nat.passed and kc.passed and nat.law == F1 and kc.law == F1
    cartan = cartan_like_check(lag, m.vectorfield("cartan"), [parse("1", ch), parse("q^2", ch)])
    cartan_ok = cartan.passed and all(is_zero(sub(a, b)) == Verdict.PROVEN_ZERO for a, b in zip(cartan.law, F1))
    K11 = corollary_law(lag, m.basefield("dq"), [1, 1])
    cor = verify_symbolic(lag, K11)
    report(5, sym_ok and cartan_ok and cor.passed,
           f"dq natural/k-contact law F1 {sym_ok}, Cartan-like law F1 {cartan_ok}, "
           f"corollary K=(1,1) law {K11} verify_symbolic {cor.verdict} (max {cor.max_residual:.3g})")


def test_criterion_6_numeric_convergence(report):
    start = time.perf_counter()
    hs, errs = [], []
    for n in GRIDS:
        run = run_preset("damped-string", STRING_PARAMS, n, n)
        hs.append(run.solution.grid.spacing[0])
        errs.append(run.max_error())
    order = observed_order(hs, errs)
    elapsed = time.perf_counter() - start
    report(6, abs(order - 2.0) <= 0.3 and elapsed < 60.0,
           f"observed order {order:.3f} over {GRIDS}, errors {[f'{e:.2e}' for e in errs]}, {elapsed:.2f} s")


def test_criterion_7_discrete_dissipation_identity(models, report):
    m = models["damped_string"]
    lag = m.lagrangian
    sols = [reconstruct_s_fields(lag, run_preset("damped-string", STRING_PARAMS, n, n).solution) for n in GRIDS]
    order = refinement_study(lag, m.law("F1"), sols)["order"]
    # conservative limit: the right side vanishes
    params = {**STRING_PARAMS, "gamma": 0.0}
    ch0 = m.chart.with_parameters(gamma=0.0)
    lag0 = Lagrangian(ch0, lag.L)
    F0 = m.law("F1")
    cons = []
    for n in GRIDS:
        sol = manufactured_string_solution(params).evaluate(hyperbolic_grid(1.0, 1.0, n, n))
        sol = reconstruct_s_fields(lag0, sol)
        cons.append(verify_on_solution(lag0, F0, sol).max_residual)
    h2 = [2 * (1.0 / (n - 1)) ** 2 for n in GRIDS]
    trunc = all(r < m.calibration["F1"] * h for r, h in zip(cons, h2))
    report(7, order >= 1.7 and trunc,
           f"F1 residual order {order:.3f}; gamma=0 conservation residuals {[f'{c:.2e}' for c in cons]}")


def test_criterion_8_newtonoid_properties(models, report):
    m = models["damped_string"]
    ch, lag = m.chart, m.lagrangian
    rng = np.random.default_rng(0xC0FFEE)

    def poly(coords, terms):
        out = [float(rng.uniform(-1, 1))]
        for _ in range(terms):
            x, y = rng.choice(coords, 2)
            out.append(mul(float(rng.uniform(-1, 1)), x, y))
        return add(*out)

    random_ok = True
    for _ in range(20):
        G = Sopde(ch, {(0, a, b): poly(ch.coords(), 3) for a in range(2) for b in range(2)},
                  {(a, b): poly(ch.coords(), 3) for a in range(2) for b in range(2)})
        Z = BaseVectorField(ch, {ch.q(0): poly([ch.q(0)], 2)})
        K = rng.uniform(-2, 2, 2)
        X = complete_lift(Z) + BundleVectorField(ch, {ch.s(a): float(K[a]) for a in range(2)})
        random_ok = random_ok and is_newtonoid(G, X).passed
    candidates = {n: m.vectorfields[n] for n in m.vectorfields}
    found = [n for n, X in candidates.items() if is_k_contact_symmetry(lag, X).passed]
    fixture_ok = bool(found) and all(is_newtonoid(m.sopde("paper"), candidates[n]).passed for n in found)
    report(8, random_ok and fixture_ok,
           f"20 random Sopdes {random_ok}; k-contact symmetries {found} Newtonoid for fixture {fixture_ok}")


def test_criterion_9_probe_behavior(models, report):
    m = models["damped_string"]
    lag = m.lagrangian
    sol = reconstruct_s_fields(lag, run_preset("damped-string", STRING_PARAMS, 101, 101).solution)
    rep = dynamical_symmetry_probe(lag, m.vectorfield("dq"), sol, 1e-3)
    trans_ok = rep.excess < 2 * rep.baseline
    scal = probe_slope(lag, m.vectorfield("scale"), sol, [1e-4, 1e-3, 1e-2])
    scal_ok = scal["slope"] > 0 and scal["r2"] > 0.99
    report(9, trans_ok and scal_ok,
           f"dq excess {rep.excess:.2e} vs baseline {rep.baseline:.2e}; "
           f"q dq s-excess slope {scal['slope']:.3f} R^2 {scal['r2']:.6f}")
