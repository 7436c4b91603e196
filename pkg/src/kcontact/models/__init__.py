"""Line-oriented model files (``.kc``) and the fixtures shipped with the package.

One stanza per line; ``#`` starts a comment::

    model damped_string
    base_dim 1
    field_dim 2
    coords q
    indep t x
    params rho=1 tau=0.64 gamma=0.1
    lagrangian (rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]
    basefield dq q = 1
    vectorfield X q = 1; s[1] = 1
    law F1 rho*v[q,1]; -tau*v[q,2]
    sopde G1 G[q,1,1] = 0; S[1,1] = ...
    kernel C quadratic
    preset damped-string
    calibrate F1 5.0

Component indices are one based, as everywhere in the DSL.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..bundle import BaseVectorField, BundleVectorField, Sopde
from ..chart import BundleChart, ChartError, Kernel
from ..dissipation import DissipationLaw
from ..expr import ParseError, parse, parse_symbol
from ..lagrangian import Lagrangian

__all__ = ["ModelError", "ModelFile", "load_model", "parse_model", "fixture_path", "FIXTURES", "KERNEL_LIBRARY",
           "PRESETS"]

PRESETS = ("damped-string", "telegrapher", "coupled-strings", "damped-laplace")
FIXTURES = ("damped_string", "telegrapher", "coupled_strings", "damped_laplace")


def _kernel_library() -> dict:
    one = lambda z: np.ones_like(np.asarray(z, dtype=float))  # noqa: E731
    zero = lambda z: np.zeros_like(np.asarray(z, dtype=float))  # noqa: E731
    return {
        # C(z) = z^2/2: the linear coupling
        "quadratic": ((lambda z: 0.5 * np.asarray(z) ** 2, lambda z: np.asarray(z, dtype=float), one, zero), 1.0),
        # C(z) = z^4/4
        "quartic": ((lambda z: 0.25 * np.asarray(z) ** 4, lambda z: np.asarray(z) ** 3,
                     lambda z: 3.0 * np.asarray(z) ** 2, lambda z: 6.0 * np.asarray(z)), 0.0),
        "zero": ((zero, zero, zero, zero), 0.0),
        # declared but not evaluable: zero tests sample a random smooth function
        "opaque": ((), None),
    }


KERNEL_LIBRARY = _kernel_library()


class ModelError(ValueError):
    def __init__(self, msg: str, path: str = "<model>", line: int | None = None):
        self.path, self.line = path, line
        where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + msg)


@dataclass
class ModelFile:
    name: str
    chart: BundleChart
    lagrangian: Lagrangian
    basefields: dict = field(default_factory=dict)
    vectorfields: dict = field(default_factory=dict)
    laws: dict = field(default_factory=dict)
    sopdes: dict = field(default_factory=dict)
    kernel_kinds: dict = field(default_factory=dict)
    preset: str | None = None
    calibration: dict = field(default_factory=dict)
    source: str = "<model>"

    def _get(self, table: dict, what: str, key: str):
        if key not in table:
            known = ", ".join(sorted(table)) or "none"
            raise ModelError(f"no {what} named {key!r} (known: {known})", self.source)
        return table[key]

    def basefield(self, key: str) -> BaseVectorField:
        return self._get(self.basefields, "basefield", key)

    def vectorfield(self, key: str) -> BundleVectorField:
        return self._get(self.vectorfields, "vectorfield", key)

    def law(self, key: str) -> DissipationLaw:
        return self._get(self.laws, "law", key)

    def sopde(self, key: str) -> Sopde:
        return self._get(self.sopdes, "sopde", key)

    def parameters(self) -> dict:
        return {k: v for k, v in self.chart.parameters.items() if v is not None}


_HEADER = ("model", "base_dim", "field_dim", "coords", "indep", "params", "kernel")
_BODY = ("lagrangian", "basefield", "vectorfield", "law", "sopde", "preset", "calibrate")
_G = re.compile(r"^G\[\s*([A-Za-z_]\w*)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]$")
_S = re.compile(r"^S\[\s*(\d+)\s*,\s*(\d+)\s*\]$")
_NAME = re.compile(r"^[A-Za-z_][\w\-]*$")


def _split_name(rest: str, src: str, line: int) -> tuple[str, str]:
    parts = rest.split(None, 1)
    if len(parts) != 2 or not _NAME.match(parts[0]):
        raise ModelError("expected a name followed by a definition", src, line)
    return parts[0], parts[1]


def _components(body: str, src: str, line: int) -> list[tuple[str, str]]:
    out = []
    for item in body.split(";"):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ModelError(f"component {item!r} lacks '='", src, line)
        lhs, rhs = item.split("=", 1)
        out.append((lhs.strip(), rhs.strip()))
    return out


def parse_model(text: str, source: str = "<model>") -> ModelFile:
    """Build a :class:`ModelFile` from model-file text."""
    header: dict = {}
    body: list = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key in _HEADER:
            if key == "kernel":
                header.setdefault("kernel", []).append((rest, no))
            elif key in header:
                raise ModelError(f"duplicate {key!r} stanza", source, no)
            else:
                header[key] = (rest, no)
        elif key in _BODY:
            body.append((key, rest, no))
        else:
            raise ModelError(f"unknown stanza {key!r}", source, no)

    for req in ("model", "base_dim", "field_dim", "coords"):
        if req not in header:
            raise ModelError(f"missing {req!r} stanza", source)
    name = header["model"][0]
    try:
        n = int(header["base_dim"][0])
        k = int(header["field_dim"][0])
    except ValueError:
        raise ModelError("base_dim and field_dim must be integers", source) from None
    coords = tuple(header["coords"][0].split())
    indep = tuple(header["indep"][0].split()) if "indep" in header else ()
    params: dict = {}
    if "params" in header:
        text_p, no = header["params"]
        for tok in text_p.split():
            pname, eq, val = tok.partition("=")
            if not _NAME.match(pname):
                raise ModelError(f"bad parameter name {pname!r}", source, no)
            try:
                params[pname] = float(val) if eq else None
            except ValueError:
                raise ModelError(f"bad value for parameter {pname!r}", source, no) from None
    kernels, kinds = {}, {}
    for rest, no in header.get("kernel", []):
        parts = rest.split()
        if len(parts) != 2 or parts[1] not in KERNEL_LIBRARY:
            raise ModelError(f"kernel stanza needs a name and one of {sorted(KERNEL_LIBRARY)}", source, no)
        impls, limit = KERNEL_LIBRARY[parts[1]]
        kernels[parts[0]] = Kernel(parts[0], impls, limit)
        kinds[parts[0]] = parts[1]
    try:
        chart = BundleChart(n, k, coords, params, indep, kernels)
    except ChartError as exc:
        raise ModelError(str(exc), source) from None

    def expr(text_e: str, no: int):
        try:
            return chart.check(parse(text_e, chart), allow_jets=False)
        except (ParseError, ChartError) as exc:
            raise ModelError(str(exc), source, no) from None

    model = None
    lag_seen = False
    pending = []
    for key, rest, no in body:
        if key == "lagrangian":
            if lag_seen:
                raise ModelError("duplicate 'lagrangian' stanza", source, no)
            lag_seen = True
            try:
                lag = Lagrangian(chart, expr(rest, no))
            except ChartError as exc:
                raise ModelError(str(exc), source, no) from None
            model = ModelFile(name, chart, lag, kernel_kinds=kinds, source=source)
        else:
            pending.append((key, rest, no))
    if model is None:
        raise ModelError("missing 'lagrangian' stanza", source)

    for key, rest, no in pending:
        if key == "preset":
            if rest not in PRESETS:
                raise ModelError(f"unknown preset {rest!r}; expected one of {PRESETS}", source, no)
            model.preset = rest
            continue
        oname, definition = _split_name(rest, source, no)
        if key == "calibrate":
            try:
                model.calibration[oname] = float(definition)
            except ValueError:
                raise ModelError("calibration constant must be a number", source, no) from None
            continue
        table = {"basefield": model.basefields, "vectorfield": model.vectorfields,
                 "law": model.laws, "sopde": model.sopdes}[key]
        if oname in table:
            raise ModelError(f"duplicate {key} {oname!r}", source, no)
        try:
            if key == "law":
                comps = [expr(p.strip(), no) for p in definition.split(";") if p.strip()]
                if len(comps) != k:
                    raise ModelError(f"law needs {k} components, got {len(comps)}", source, no)
                table[oname] = DissipationLaw(tuple(comps))
            elif key in ("basefield", "vectorfield"):
                comps = {}
                for lhs, rhs in _components(definition, source, no):
                    try:
                        sym = parse_symbol(lhs, chart)
                    except (ParseError, ChartError, ValueError) as exc:
                        raise ModelError(f"bad coordinate {lhs!r}: {exc}", source, no) from None
                    if sym in comps:
                        raise ModelError(f"component {lhs!r} given twice", source, no)
                    comps[sym] = expr(rhs, no)
                cls = BaseVectorField if key == "basefield" else BundleVectorField
                table[oname] = cls(chart, comps)
            else:
                G, S = {}, {}
                for lhs, rhs in _components(definition, source, no):
                    mg, ms = _G.match(lhs), _S.match(lhs)
                    if mg:
                        i = chart.base_index(mg.group(1))
                        G[(i, int(mg.group(2)) - 1, int(mg.group(3)) - 1)] = expr(rhs, no)
                    elif ms:
                        S[(int(ms.group(1)) - 1, int(ms.group(2)) - 1)] = expr(rhs, no)
                    else:
                        raise ModelError(f"sopde component {lhs!r} is not G[q,a,b] or S[a,b]", source, no)
                table[oname] = Sopde(chart, G, S)
        except ChartError as exc:
            raise ModelError(str(exc), source, no) from None
    for lname in model.calibration:
        if lname not in model.laws:
            raise ModelError(f"calibration for unknown law {lname!r}", source)
    return model


def load_model(path) -> ModelFile:
    """Load a model file; a bare fixture name such as ``damped_string`` is also accepted."""
    p = Path(path)
    if not p.exists() and str(path) in FIXTURES:
        p = fixture_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ModelError(f"cannot read model file: {exc.strerror}", str(path)) from None
    return parse_model(text, str(path))


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise ModelError(f"no fixture named {name!r}")
    return Path(str(resources.files(__package__).joinpath(f"{name}.kc")))
