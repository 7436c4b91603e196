"""Zero testing.

Rational trees are brought over a common denominator and the numerator is
expanded into a sparse multivariate polynomial, which decides the question
exactly (up to float cancellation noise, which is routed to the sampling
path).  Trees with function applications or half-integer powers get the same
treatment with those nodes frozen as opaque atoms: an empty numerator still
proves zero, while anything else is decided by evaluation at random points.
"""

from __future__ import annotations

import enum
from typing import Mapping

import numpy as np

from .core import (Add, Expr, Mul, Num, Pow, Sym, free_symbols, functions_used,
                   is_rational, sort_key, subs)
from .evaluate import DomainError, evaluate

__all__ = ["Verdict", "is_zero", "combine_verdicts", "DEFAULT_SEED", "GenericKernel", "sample_points"]

DEFAULT_SEED = 0xC0FFEE
SAMPLES = 64
RETRIES = 10
REL_TOL = 1e-9
# Numerator coefficients below this are treated as possible rounding residue.
_NOISE = 1e-6


class Verdict(enum.Enum):
    PROVEN_ZERO = "proven-zero"
    PROVEN_NONZERO = "proven-nonzero"
    PROBABLY_ZERO = "probably-zero"
    PROBABLY_NONZERO = "probably-nonzero"
    INDETERMINATE = "indeterminate"

    @property
    def is_zero(self) -> bool:
        return self in (Verdict.PROVEN_ZERO, Verdict.PROBABLY_ZERO)

    @property
    def is_nonzero(self) -> bool:
        return self in (Verdict.PROVEN_NONZERO, Verdict.PROBABLY_NONZERO)

    def __str__(self):
        return self.value


def combine_verdicts(verdicts) -> Verdict:
    """Verdict for "all of these vanish"."""
    verdicts = list(verdicts)
    for bad in (Verdict.PROVEN_NONZERO, Verdict.PROBABLY_NONZERO, Verdict.INDETERMINATE):
        if bad in verdicts:
            return bad
    if Verdict.PROBABLY_ZERO in verdicts:
        return Verdict.PROBABLY_ZERO
    return Verdict.PROVEN_ZERO


# ---------------------------------------------------------------------------
# exact path: sparse polynomials over symbols


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    d = dict(m1)
    for s, e in m2:
        d[s] = d.get(s, 0) + e
    return tuple(sorted(((s, e) for s, e in d.items() if e), key=lambda p: sort_key(p[0])))


def _pmul(p1: dict, p2: dict) -> dict:
    out: dict = {}
    for m1, c1 in p1.items():
        for m2, c2 in p2.items():
            m = _mono_mul(m1, m2)
            out[m] = out.get(m, 0.0) + c1 * c2
    return {m: c for m, c in out.items() if c != 0.0}


def _padd(p1: dict, p2: dict) -> dict:
    out = dict(p1)
    for m, c in p2.items():
        out[m] = out.get(m, 0.0) + c
    return {m: c for m, c in out.items() if c != 0.0}


def _ppow(p: dict, n: int) -> dict:
    out = {(): 1.0}
    for _ in range(n):
        out = _pmul(out, p)
    return out


_ONE = {(): 1.0}


def _rational_form(e: Expr, memo: dict) -> tuple[dict, dict]:
    hit = memo.get(e)
    if hit is not None:
        return hit
    if isinstance(e, Num):
        out = ({(): e.value} if e.value else {}, _ONE)
    elif isinstance(e, Sym):
        out = ({((e, 1),): 1.0}, _ONE)
    elif isinstance(e, Add):
        p, q = _rational_form(e.terms[0], memo)
        for t in e.terms[1:]:
            p2, q2 = _rational_form(t, memo)
            if q == q2:
                p = _padd(p, p2)
            else:
                p = _padd(_pmul(p, q2), _pmul(p2, q))
                q = _pmul(q, q2)
        out = (p, q)
    elif isinstance(e, Mul):
        p, q = _ONE, _ONE
        for f in e.factors:
            p2, q2 = _rational_form(f, memo)
            p = _pmul(p, p2)
            if q2 != _ONE:
                q = _pmul(q, q2)
        out = (p, q)
    elif isinstance(e, Pow) and e.exp.denominator == 1:
        p, q = _rational_form(e.base, memo)
        n = int(e.exp)
        out = (_ppow(p, n), _ppow(q, n)) if n >= 0 else (_ppow(q, -n), _ppow(p, -n))
    else:
        out = ({((e, 1),): 1.0}, _ONE)
    memo[e] = out
    return out


def numerator_polynomial(e: Expr) -> dict:
    """Expanded numerator as ``{monomial: coefficient}``; non-rational nodes are atoms."""
    return _rational_form(e, {})[0]


# ---------------------------------------------------------------------------
# sampling path


class GenericKernel:
    """A random smooth function with consistent derivatives, standing in for
    an opaque kernel that has no user-supplied implementation."""

    def __init__(self, rng: np.random.Generator):
        self.c = rng.uniform(-1.0, 1.0, size=4)
        self.amp = rng.uniform(0.5, 1.5)
        self.rate = rng.uniform(-1.0, 1.0)

    def implementation(self, order: int):
        poly = np.polynomial.Polynomial(self.c).deriv(order) if order else np.polynomial.Polynomial(self.c)
        amp = self.amp * self.rate ** order
        rate = self.rate
        return lambda z: poly(z) + amp * np.exp(rate * z)


def _resolve_kernels(e: Expr, kernels: Mapping | None, rng) -> dict:
    out = {}
    for f in functions_used(e):
        if not f.is_kernel or f.name in out:
            continue
        k = (kernels or {}).get(f.name)
        if k is not None and hasattr(k, "implementation") and k.implementation(0) is not None:
            out[f.name] = k
        else:
            out[f.name] = GenericKernel(rng)
    return out


def sample_points(symbols, rng: np.random.Generator, bindings: Mapping | None = None) -> dict:
    pt = {s: float(rng.uniform(-2.0, 2.0)) for s in symbols}
    if bindings:
        pt.update({s: float(v) for s, v in bindings.items() if s in pt})
    return pt


def _scale(e: Expr, pt, kernels) -> float:
    terms = e.terms if isinstance(e, Add) else (e,)
    return float(sum(abs(evaluate(t, pt, kernels)) for t in terms))


def _sampled(e: Expr, kernels, rng, samples: int, tol: float) -> Verdict:
    syms = sorted(free_symbols(e), key=sort_key)
    kern = _resolve_kernels(e, kernels, rng)
    valid = 0
    for _ in range(samples):
        for _attempt in range(RETRIES + 1):
            pt = sample_points(syms, rng)
            try:
                val = evaluate(e, pt, kern)
                scale = _scale(e, pt, kern)
            except DomainError:
                continue
            break
        else:
            continue
        valid += 1
        if abs(val) > tol * scale:
            return Verdict.PROBABLY_NONZERO
    return Verdict.PROBABLY_ZERO if valid else Verdict.INDETERMINATE


def is_zero(e: Expr, *, kernels: Mapping | None = None, seed: int | None = None,
            rng: np.random.Generator | None = None, samples: int = SAMPLES,
            tol: float = REL_TOL, bindings: Mapping | None = None) -> Verdict:
    """Decide whether ``e`` vanishes identically.

    ``bindings`` pins some symbols (typically parameters) to fixed values
    before either path runs.
    """
    if bindings:
        e = subs(e, {s: Num(v) for s, v in bindings.items()})
    if isinstance(e, Num):
        return Verdict.PROVEN_ZERO if e.value == 0.0 else Verdict.PROVEN_NONZERO
    if rng is None:
        rng = np.random.default_rng(DEFAULT_SEED if seed is None else seed)
    p = numerator_polynomial(e)
    if not p:
        return Verdict.PROVEN_ZERO
    if is_rational(e):
        if max(abs(c) for c in p.values()) >= _NOISE:
            return Verdict.PROVEN_NONZERO
        v = _sampled(e, kernels, rng, samples, tol)
        return Verdict.PROVEN_NONZERO if v == Verdict.PROBABLY_NONZERO else v
    return _sampled(e, kernels, rng, samples, tol)

