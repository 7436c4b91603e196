"""``kcontact`` command line: derive, check, verify, simulate.

Exit codes: 0 pass, 1 a check failed, 2 usage, parse or runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bundle import BaseVectorField, BundleVectorField, complete_lift
from .chart import ChartError
from .dissipation import refinement_study, verify_on_solution, verify_symbolic
from .expr import DEFAULT_SEED, ParseError, parse, to_text
from .lagrangian import Lagrangian, contact_forms, energy, euler_lagrange_residuals, hessian, is_regular
from .models import ModelError, ModelFile, load_model, parse_model
from .solver import (CFLError, GridError, el_residual_on_grid, observed_order, reconstruct_s_fields,
                     run_preset)
from .symmetry import (cartan_like_check, is_k_contact_symmetry, is_natural_symmetry, is_newtonoid,
                       newtonoid_corollary_check)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    """User-facing error; reported with exit code 2."""


# ---------------------------------------------------------------------------
# helpers


def _emit(args, report: dict, text: str) -> None:
    out = json.dumps(report, indent=2, default=str) if args.format == "json" else text
    print(out)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        name = f"{args.command}.{'json' if args.format == 'json' else 'txt'}"
        (d / name).write_text(out + "\n")


def _model(args) -> ModelFile:
    m = load_model(args.model)
    overrides = dict(getattr(args, "param", None) or [])
    if getattr(args, "gamma", None) is not None:
        key = "gamma" if "gamma" in m.chart.parameters else "gamma1"
        overrides[key] = args.gamma
    if overrides:
        try:
            chart = m.chart.with_parameters(**overrides)
        except ChartError as exc:
            raise CliError(str(exc)) from None
        m.chart = chart
        m.lagrangian = Lagrangian(chart, m.lagrangian.L)
    return m


def _param(text: str):
    name, eq, val = text.partition("=")
    if not eq:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number in {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None
    if len(vals) < 2:
        raise argparse.ArgumentTypeError("a refinement needs at least two grid sizes")
    return vals


def _field(m: ModelFile, ref: str):
    """Named basefield or vectorfield, or an inline component list ``"q = 1; s[1] = 1"``."""
    if ref in m.basefields:
        return m.basefields[ref]
    if ref in m.vectorfields:
        return m.vectorfields[ref]
    if "=" in ref:
        text = f"model inline\nbase_dim {m.chart.n}\nfield_dim {m.chart.k}\n"
        text += "coords " + " ".join(m.chart.base_names) + "\n"
        text += "indep " + " ".join(m.chart.independent_names) + "\n"
        if m.chart.parameters:
            text += "params " + " ".join(k if v is None else f"{k}={v!r}" for k, v in m.chart.parameters.items()) + "\n"
        for name, kind in m.kernel_kinds.items():
            text += f"kernel {name} {kind}\n"
        text += "lagrangian 0\nvectorfield inline " + ref + "\n"
        X = parse_model(text, "<inline field>").vectorfields["inline"]
        return BundleVectorField(m.chart, dict(X.components))
    known = sorted(m.basefields) + sorted(m.vectorfields)
    raise CliError(f"no vector field named {ref!r} (known: {', '.join(known) or 'none'})")


def _as_bundle(X):
    return complete_lift(X) if isinstance(X, BaseVectorField) else X


def _exprs(m: ModelFile, text: str) -> list:
    parts = [p.strip() for p in text.split(";") if p.strip()]
    try:
        return [m.chart.check(parse(p, m.chart), allow_jets=False) for p in parts]
    except (ParseError, ChartError) as exc:
        raise CliError(f"--g: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_derive(args) -> int:
    m = _model(args)
    lag = m.lagrangian
    ch = m.chart
    E = energy(lag)
    etas = contact_forms(lag)
    H = hessian(lag)
    reg = is_regular(lag, seed=args.seed)
    el = euler_lagrange_residuals(lag)
    labels = [f"v[{ch.base_names[i]},{a + 1}]" for i, a in H.labels]
    report = {
        "model": m.name,
        "energy": to_text(E),
        "contact_forms": [str(eta) for eta in etas],
        "hessian": {"labels": labels, "entries": [[to_text(H[r, c]) for c in range(H.size)] for r in range(H.size)]},
        "regularity": {"verdict": reg.verdict, "determinant": to_text(reg.determinant)},
        "euler_lagrange": [to_text(r) for r in el.residuals],
        "divergence": to_text(el.divergence),
    }
    lines = [f"model {m.name}", f"E_L = {report['energy']}"]
    lines += [f"eta^{a + 1} = {s}" for a, s in enumerate(report["contact_forms"])]
    lines.append("hessian (" + ", ".join(labels) + "):")
    lines += ["  [" + ", ".join(row) + "]" for row in report["hessian"]["entries"]]
    lines.append(f"regularity: {reg.verdict} (det = {report['regularity']['determinant']})")
    lines += [f"EL[{ch.base_names[i]}] = {r}" for i, r in enumerate(report["euler_lagrange"])]
    lines.append(f"D = {report['divergence']}")
    _emit(args, report, "\n".join(lines))
    return EXIT_PASS


def cmd_check(args) -> int:
    m = _model(args)
    lag = m.lagrangian
    verdicts = []
    if args.symmetry:
        X = _field(m, args.symmetry)
        if isinstance(X, BaseVectorField):
            verdicts.append(is_natural_symmetry(lag, X, seed=args.seed))
        verdicts.append(is_k_contact_symmetry(lag, _as_bundle(X), seed=args.seed))
    elif args.newtonoid:
        if not args.sopde:
            raise CliError("--newtonoid needs --sopde NAME")
        try:
            gamma = m.sopde(args.sopde)
        except ModelError as exc:
            raise CliError(str(exc)) from None
        verdicts.append(is_newtonoid(gamma, _as_bundle(_field(m, args.newtonoid)), seed=args.seed))
    elif args.cartan:
        if args.g is None:
            raise CliError("--cartan needs --g 'g1; g2; ...'")
        verdicts.append(cartan_like_check(lag, _as_bundle(_field(m, args.cartan)), _exprs(m, args.g),
                                          seed=args.seed))
    elif args.corollary:
        Z = _field(m, args.corollary)
        if not isinstance(Z, BaseVectorField):
            raise CliError("--corollary needs a basefield")
        try:
            K = [float(x) for x in (args.K or "").replace(",", " ").split()]
        except ValueError:
            raise CliError("--K expects numbers") from None
        if len(K) != m.chart.k:
            raise CliError(f"--K needs {m.chart.k} constants")
        verdicts.append(newtonoid_corollary_check(lag, Z, K, seed=args.seed))
    else:
        raise CliError("choose one of --symmetry, --newtonoid, --cartan, --corollary")
    passed = all(v.passed for v in verdicts)
    report = {"model": m.name, "passed": passed, "verdicts": [v.to_dict() for v in verdicts]}
    _emit(args, report, "\n".join(str(v) for v in verdicts))
    return EXIT_PASS if passed else EXIT_FAIL


def _solutions(m: ModelFile, args, sizes):
    if m.preset is None:
        raise CliError(f"model {m.name!r} has no preset solver")
    out = []
    for nt, nx in sizes:
        run = run_preset(m.preset, m.parameters(), nt, nx, T=args.T, length=args.length,
                         kernels=m.chart.kernels, kernel_kind=m.kernel_kinds.get("C"))
        out.append((run, reconstruct_s_fields(m.lagrangian, run.solution, args.gauge)))
    return out


def cmd_verify(args) -> int:
    m = _model(args)
    try:
        F = m.law(args.law)
    except ModelError as exc:
        raise CliError(str(exc)) from None
    lag = m.lagrangian
    if args.mode == "symbolic":
        rep = verify_symbolic(lag, F, seed=args.seed)
        report = {"model": m.name, "law": args.law, "mode": "symbolic", "passed": rep.passed,
                  "max_residual": rep.max_residual, "tolerance": rep.tolerance, "samples": len(rep.residuals),
                  "certificate": rep.details.get("certificate"), "notes": rep.notes}
        text = (f"law {args.law} = {F}\nsymbolic: {rep.verdict} (max residual {rep.max_residual:.3e}, "
                f"tolerance {rep.tolerance:.0e}, {len(rep.residuals)} samples)")
        text += "".join(f"\n  note: {n}" for n in rep.notes)
        _emit(args, report, text)
        return EXIT_PASS if rep.passed else EXIT_FAIL

    constant = args.constant if args.constant is not None else m.calibration.get(args.law)
    if args.refine:
        sizes = [(n, n) for n in args.refine]
        sols = [s for _, s in _solutions(m, args, sizes)]
        st = refinement_study(lag, F, sols)
        finest = verify_on_solution(lag, F, sols[-1], constant=constant)
        passed = st["order"] >= args.min_order and (constant is None or finest.passed)
        report = {"model": m.name, "law": args.law, "mode": "numeric", "sizes": args.refine, "h": st["h"],
                  "linf": st["linf"], "l2": st["l2"], "order": st["order"], "min_order": args.min_order,
                  "constant": constant, "finest_tolerance": finest.tolerance, "passed": passed}
        lines = [f"law {args.law} = {F}", "   n        h            linf          l2"]
        lines += [f"{n:5d}  {h:.4e}  {a:.6e}  {b:.6e}" for n, h, a, b in zip(args.refine, st["h"], st["linf"], st["l2"])]
        lines.append(f"observed order {st['order']:.3f} (required >= {args.min_order})")
        if constant is not None:
            lines.append(f"finest grid: linf {finest.max_residual:.3e} vs {finest.tolerance:.3e}")
        lines.append("numeric: " + ("pass" if passed else "fail"))
        _emit(args, report, "\n".join(lines))
        return EXIT_PASS if passed else EXIT_FAIL

    (_, sol), = _solutions(m, args, [(args.nt, args.nx)])
    rep = verify_on_solution(lag, F, sol, tolerance=args.tolerance, constant=constant)
    if rep.tolerance != rep.tolerance:  # nan: no criterion
        raise CliError("numeric mode needs --tolerance, --constant, a calibrated law or --refine")
    report = {"model": m.name, "law": args.law, "mode": "numeric", "nt": args.nt, "nx": args.nx,
              **rep.details, "tolerance": rep.tolerance, "passed": rep.passed}
    _emit(args, report, f"law {args.law} = {F}\nnumeric: {rep.verdict} (linf {rep.details['linf']:.3e}, "
                        f"l2 {rep.details['l2']:.3e}, tolerance {rep.tolerance:.3e})")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    m = _model(args)
    preset = args.preset or m.preset
    if preset is None:
        raise CliError("no preset given and the model declares none")
    if args.preset and m.preset and args.preset != m.preset:
        raise CliError(f"model {m.name!r} is set up for preset {m.preset!r}")
    m.preset = preset
    sizes = [(n, n) for n in args.refine] if args.refine else [(args.nt, args.nx)]
    runs = _solutions(m, args, sizes)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for (run, sol), (nt, nx) in zip(runs, sizes):
        norms = el_residual_on_grid(m.lagrangian, sol)
        err = run.max_error()
        rows.append({"nt": nt, "nx": nx, "h": sol.grid.spacing, "el_linf": norms.linf, "el_l2": norms.l2,
                     "divergence_linf": norms.divergence_linf, "error_linf": err,
                     **{k: v for k, v in run.meta.items() if isinstance(v, (int, float, bool))}})
    run, sol = runs[-1]
    stem = f"{m.name}_{sizes[-1][0]}x{sizes[-1][1]}"
    sol.to_csv(out / f"{stem}.csv")
    sol.to_json(out / f"{stem}.json")
    report = {"model": m.name, "preset": preset, "files": [str(out / f"{stem}.csv"), str(out / f"{stem}.json")],
              "levels": rows}
    if len(rows) > 1 and all(r["error_linf"] for r in rows):
        report["error_order"] = observed_order([r["h"][0] for r in rows], [r["error_linf"] for r in rows])
    lines = [f"preset {preset}: wrote {report['files'][0]} and {report['files'][1]}"]
    lines.append("    nt    nx   EL linf       error linf")
    for r in rows:
        e = "n/a" if r["error_linf"] is None else f"{r['error_linf']:.6e}"
        lines.append(f"{r['nt']:6d}{r['nx']:6d}   {max(r['el_linf']):.6e}  {e}")
    if "error_order" in report:
        lines.append(f"observed order {report['error_order']:.3f}")
    print(json.dumps(report, indent=2, default=str) if args.format == "json" else "\n".join(lines))
    (out / f"{stem}_summary.json").write_text(json.dumps(report, indent=2, default=str) + "\n")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED,
                        help="RNG seed for sampled checks (default 0xC0FFEE)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap; computations here run on one thread")
    common.add_argument("--out", default=None, help="directory for reports and grid files")
    common.add_argument("--param", action="append", type=_param, metavar="NAME=VALUE",
                        help="override a model parameter")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--nt", type=int, default=101, help="nodes along the first axis")
    grid.add_argument("--nx", type=int, default=101, help="nodes along the second axis")
    grid.add_argument("--T", type=float, default=1.0, help="final time")
    grid.add_argument("--length", type=float, default=1.0, help="spatial extent")
    grid.add_argument("--gamma", type=float, default=None, help="damping override")
    grid.add_argument("--gauge", choices=("first", "even-split"), default="first")
    grid.add_argument("--refine", type=_int_list, default=None, metavar="N1,N2,...",
                      help="square grids for a refinement study")

    p = argparse.ArgumentParser(prog="kcontact", description="k-contact Lagrangian field theory toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("derive", parents=[common], help="energy, contact forms, Hessian, field equations")
    d.add_argument("model")

    c = sub.add_parser("check", parents=[common], help="symmetry and Newtonoid checks")
    c.add_argument("model")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--symmetry", metavar="FIELD")
    g.add_argument("--newtonoid", metavar="FIELD")
    g.add_argument("--cartan", metavar="FIELD")
    g.add_argument("--corollary", metavar="BASEFIELD")
    c.add_argument("--sopde", metavar="NAME")
    c.add_argument("--g", metavar="EXPRS", help="Cartan functions separated by ';'")
    c.add_argument("--K", metavar="CONSTANTS", help="corollary constants, comma separated")

    v = sub.add_parser("verify", parents=[common, grid], help="verify a dissipation law")
    v.add_argument("model")
    v.add_argument("--law", required=True)
    v.add_argument("--mode", choices=("symbolic", "numeric"), default="symbolic")
    v.add_argument("--tolerance", type=float, default=None, help="absolute linf tolerance (numeric)")
    v.add_argument("--constant", type=float, default=None, help="tolerance constant C in C*(sum h^2)")
    v.add_argument("--min-order", type=float, default=1.7)

    s = sub.add_parser("simulate", parents=[common, grid], help="run a preset solver and write grids")
    s.add_argument("model")
    s.add_argument("--preset", choices=("damped-string", "telegrapher", "coupled-strings", "damped-laplace"))
    return p


COMMANDS = {"derive": cmd_derive, "check": cmd_check, "verify": cmd_verify, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_ERROR
    if args.threads < 1:
        print("kcontact: error: --threads must be positive", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (CliError, ModelError, ParseError, ChartError, GridError, CFLError, ValueError,
            ArithmeticError) as exc:
        print(f"kcontact: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
