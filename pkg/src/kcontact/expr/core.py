"""Immutable expression trees kept in a canonical, fully expanded form.

Every node is built through the smart constructors :func:`add`, :func:`mul`,
:func:`power` and :func:`func`, so two trees that are equal as polynomials in
their atoms are structurally equal.  Quotients are stored as negative powers
and square roots as half-integer powers.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "Expr", "Num", "Sym", "Func", "Pow", "Mul", "Add",
    "ZERO", "ONE", "BUILTIN_FUNCTIONS", "KIND_RANK",
    "num", "add", "mul", "power", "func", "sqrt", "sub", "div", "neg",
    "as_expr", "diff", "subs", "free_symbols", "functions_used",
    "is_rational", "to_text", "sort_key", "coeff_split",
]

BUILTIN_FUNCTIONS = ("sin", "cos", "exp", "log")

# Printing / ordering rank of symbol kinds: second jets, first jets, action
# jets, velocities, base coordinates, actions, independent variables, params.
KIND_RANK = {"w": 0, "a": 1, "r": 2, "v": 3, "q": 4, "s": 5, "t": 6, "p": 7}


class Expr:
    """Base class; subclasses are immutable and hash-consed by value."""

    __slots__ = ("_hash",)

    def _args(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        return hash(self) == hash(other) and self._args() == other._args()

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((type(self).__name__, self._args()))
            object.__setattr__(self, "_hash", h)
        return h

    def __setattr__(self, key, value):
        raise AttributeError("expressions are immutable")

    # arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"{type(self).__name__}({to_text(self)!r})"


def _init(obj, **fields):
    for k, v in fields.items():
        object.__setattr__(obj, k, v)
    object.__setattr__(obj, "_hash", None)


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        value = float(value)
        if value == 0.0:
            value = 0.0  # drop the sign of -0.0
        _init(self, value=value)

    def _args(self):
        return (self.value,)


class Sym(Expr):
    """A chart symbol.

    ``kind`` is one of ``q`` (base coordinate), ``v`` (velocity), ``s``
    (action), ``a`` (first jet), ``w`` (second jet), ``r`` (action jet),
    ``t`` (independent variable) or ``p`` (parameter).  ``name`` is the base
    coordinate name for the coordinate-like kinds and the identifier for
    ``t``/``p``.  ``idx`` holds zero-based field indices; second jets keep
    them sorted.
    """

    __slots__ = ("kind", "name", "idx")

    def __init__(self, kind: str, name: str, idx: tuple[int, ...] = ()):
        if kind not in KIND_RANK:
            raise ValueError(f"unknown symbol kind {kind!r}")
        idx = tuple(int(i) for i in idx)
        if kind == "w":
            idx = tuple(sorted(idx))
        _init(self, kind=kind, name=name, idx=idx)

    def _args(self):
        return (self.kind, self.name, self.idx)


class Func(Expr):
    """Unary function application; ``order`` counts derivatives of an
    opaque kernel (``C''(z)`` has order 2)."""

    __slots__ = ("name", "arg", "order")

    def __init__(self, name: str, arg: Expr, order: int = 0):
        _init(self, name=name, arg=arg, order=int(order))

    def _args(self):
        return (self.name, self.order, self.arg)

    @property
    def is_kernel(self) -> bool:
        return self.name not in BUILTIN_FUNCTIONS


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Fraction):
        _init(self, base=base, exp=Fraction(exp))

    def _args(self):
        return (self.base, self.exp)


class Mul(Expr):
    """Product; an optional leading :class:`Num` coefficient then sorted
    factors with pairwise distinct bases."""

    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        _init(self, factors=tuple(factors))

    def _args(self):
        return self.factors


class Add(Expr):
    """Sum of distinct monomials in sorted order; a constant goes last."""

    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        _init(self, terms=tuple(terms))

    def _args(self):
        return self.terms


ZERO = Num(0.0)
ONE = Num(1.0)


def num(value: float) -> Num:
    return Num(value)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, Fraction)):
        if isinstance(x, float) and not math.isfinite(x):
            raise ValueError(f"non-finite constant {x!r}")
        return Num(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


# ---------------------------------------------------------------------------
# ordering


def sort_key(e: Expr) -> tuple:
    if isinstance(e, Num):
        return (0, e.value)
    if isinstance(e, Sym):
        return (1, KIND_RANK[e.kind], e.name, e.idx)
    if isinstance(e, Func):
        return (2, e.name, e.order, sort_key(e.arg))
    if isinstance(e, Pow):
        return (3, sort_key(e.base), e.exp)
    if isinstance(e, Mul):
        return (4, monomial_key(e))
    if isinstance(e, Add):
        return (5, tuple(term_key(t) for t in e.terms))
    raise TypeError(type(e))


def _factor_parts(f: Expr) -> tuple[Expr, Fraction]:
    if isinstance(f, Pow):
        return f.base, f.exp
    return f, Fraction(1)


def _factor_key(f: Expr) -> tuple:
    base, exp = _factor_parts(f)
    return (sort_key(base), exp)


def coeff_split(e: Expr) -> tuple[float, Expr | None]:
    """Split a non-sum term into (numeric coefficient, monomial or None)."""
    if isinstance(e, Num):
        return e.value, None
    if isinstance(e, Mul):
        fs = e.factors
        if isinstance(fs[0], Num):
            rest = fs[1:]
            return fs[0].value, rest[0] if len(rest) == 1 else Mul(rest)
        return 1.0, e
    return 1.0, e


def monomial_key(m: Expr) -> tuple:
    fs = m.factors if isinstance(m, Mul) else (m,)
    return tuple(_factor_key(f) for f in fs if not isinstance(f, Num))


def term_key(t: Expr) -> tuple:
    c, m = coeff_split(t)
    if m is None:
        return ((), c)
    return (monomial_key(m), c)


# ---------------------------------------------------------------------------
# canonical constructors


def _make_term(c: float, m: Expr | None) -> Expr:
    if m is None:
        return Num(c)
    if c == 1.0:
        return m
    if isinstance(m, Mul):
        return Mul((Num(c),) + m.factors)
    return Mul((Num(c), m))


def add(*args) -> Expr:
    const = 0.0
    acc: dict[Expr, float] = {}
    stack = [as_expr(a) for a in args]
    for a in stack:
        if isinstance(a, Add):
            items = a.terms
        else:
            items = (a,)
        for t in items:
            c, m = coeff_split(t)
            if m is None:
                const += c
            else:
                acc[m] = acc.get(m, 0.0) + c
    terms = [_make_term(c, m) for m, c in acc.items() if c != 0.0]
    terms.sort(key=term_key)
    if const != 0.0:
        terms.append(Num(const))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def _is_int(e: Fraction) -> bool:
    return e.denominator == 1


def mul(*args) -> Expr:
    coef = 1.0
    powers: dict[Expr, Fraction] = {}
    sums: list[Add] = []
    todo = [as_expr(a) for a in args]
    while todo:
        a = todo.pop()
        if isinstance(a, Num):
            coef *= a.value
        elif isinstance(a, Mul):
            todo.extend(a.factors)
        elif isinstance(a, Add):
            sums.append(a)
        else:
            base, exp = _factor_parts(a)
            powers[base] = powers.get(base, Fraction(0)) + exp
    if coef == 0.0:
        return ZERO
    factors = []
    redo = []
    for base, exp in powers.items():
        if exp == 0:
            continue
        if exp == 1 and not isinstance(base, (Add, Mul, Num)):
            factors.append(base)
            continue
        p = power(base, exp)
        if isinstance(p, Num):
            coef *= p.value
        elif isinstance(p, (Mul, Add)):
            redo.append(p)
        else:
            factors.append(p)
    if redo:
        return mul(Num(coef), *factors, *redo, *sums)
    factors.sort(key=_factor_key)
    if coef == 0.0:
        return ZERO
    if not factors:
        prod: Expr = Num(coef)
    elif coef == 1.0 and len(factors) == 1:
        prod = factors[0]
    elif coef == 1.0:
        prod = Mul(tuple(factors))
    else:
        prod = Mul((Num(coef), *factors))
    for s in sums:
        prod = _distribute(prod, s)
    return prod


def _terms(e: Expr) -> tuple:
    return e.terms if isinstance(e, Add) else (e,)


def _distribute(x: Expr, y: Expr) -> Expr:
    return add(*[mul(a, b) for a in _terms(x) for b in _terms(y)])


def power(base, exp) -> Expr:
    base = as_expr(base)
    exp = Fraction(exp)
    if exp == 0:
        return ONE
    if exp == 1:
        return base
    if isinstance(base, Num):
        v = base.value
        if v == 0.0 and exp < 0:
            raise ZeroDivisionError("division by zero in constant expression")
        if _is_int(exp):
            return Num(v ** int(exp))
        if v < 0:
            raise ValueError("fractional power of a negative constant")
        return Num(v ** float(exp))
    if isinstance(base, Pow):
        if _is_int(exp):
            return power(base.base, base.exp * exp)
        return Pow(base, exp)
    if isinstance(base, Mul):
        if _is_int(exp):
            return mul(*[power(f, exp) for f in base.factors])
        return Pow(base, exp)
    if isinstance(base, Add):
        if _is_int(exp) and exp > 0:
            out: Expr = base
            for _ in range(int(exp) - 1):
                out = _distribute(out, base)
            return out
        return Pow(base, exp)
    return Pow(base, exp)


def func(name: str, arg, order: int = 0) -> Expr:
    arg = as_expr(arg)
    if name == "sqrt":
        return power(arg, Fraction(1, 2))
    if name in BUILTIN_FUNCTIONS and isinstance(arg, Num):
        return Num(_apply_builtin(name, arg.value))
    if name == "log" and isinstance(arg, Func) and arg.name == "exp":
        return arg.arg
    return Func(name, arg, order)


def _apply_builtin(name: str, x: float) -> float:
    if name == "log" and x <= 0:
        raise ValueError("log of a non-positive constant")
    return getattr(math, name)(x)


def sqrt(x) -> Expr:
    return power(x, Fraction(1, 2))


def neg(x) -> Expr:
    return mul(Num(-1.0), x)


def sub(x, y) -> Expr:
    return add(x, neg(y))


def div(x, y) -> Expr:
    return mul(x, power(y, -1))


# ---------------------------------------------------------------------------
# calculus and traversal


def diff(e: Expr, x: Sym) -> Expr:
    """Exact partial derivative of ``e`` with respect to the symbol ``x``."""
    if not isinstance(x, Sym):
        raise TypeError("can only differentiate with respect to a symbol")
    return _diff(e, x, {})


def _diff(e: Expr, x: Sym, memo: dict) -> Expr:
    hit = memo.get(e)
    if hit is not None:
        return hit
    if isinstance(e, Num):
        out = ZERO
    elif isinstance(e, Sym):
        out = ONE if e == x else ZERO
    elif isinstance(e, Add):
        out = add(*[_diff(t, x, memo) for t in e.terms])
    elif isinstance(e, Mul):
        parts = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = _diff(f, x, memo)
            if df == ZERO:
                continue
            parts.append(mul(*fs[:i], df, *fs[i + 1:]))
        out = add(*parts)
    elif isinstance(e, Pow):
        db = _diff(e.base, x, memo)
        out = ZERO if db == ZERO else mul(Num(float(e.exp)), power(e.base, e.exp - 1), db)
    elif isinstance(e, Func):
        da = _diff(e.arg, x, memo)
        if da == ZERO:
            out = ZERO
        else:
            out = mul(_func_derivative(e), da)
    else:
        raise TypeError(type(e))
    memo[e] = out
    return out


def _func_derivative(f: Func) -> Expr:
    u = f.arg
    if f.name == "sin":
        return func("cos", u)
    if f.name == "cos":
        return neg(func("sin", u))
    if f.name == "exp":
        return f
    if f.name == "log":
        return power(u, -1)
    return Func(f.name, u, f.order + 1)


def subs(e: Expr, mapping: Mapping[Sym, Expr]) -> Expr:
    """Simultaneous substitution of symbols, re-canonicalised."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(n: Expr) -> Expr:
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, Num):
            out = n
        elif isinstance(n, Sym):
            out = mapping.get(n, n)
        elif isinstance(n, Add):
            out = add(*[go(t) for t in n.terms])
        elif isinstance(n, Mul):
            out = mul(*[go(f) for f in n.factors])
        elif isinstance(n, Pow):
            out = power(go(n.base), n.exp)
        elif isinstance(n, Func):
            out = func(n.name, go(n.arg), n.order)
        else:
            raise TypeError(type(n))
        memo[n] = out
        return out

    return go(e)


def _walk(e: Expr) -> Iterable[Expr]:
    stack = [e]
    seen = set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        yield n
        if isinstance(n, Add):
            stack.extend(n.terms)
        elif isinstance(n, Mul):
            stack.extend(n.factors)
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, Func):
            stack.append(n.arg)


def free_symbols(e: Expr) -> set[Sym]:
    return {n for n in _walk(e) if isinstance(n, Sym)}


def functions_used(e: Expr) -> set[Func]:
    return {n for n in _walk(e) if isinstance(n, Func)}


def is_rational(e: Expr) -> bool:
    """True when the tree uses only symbols, constants and integer powers."""
    for n in _walk(e):
        if isinstance(n, Func):
            return False
        if isinstance(n, Pow) and not _is_int(n.exp):
            return False
    return True


# ---------------------------------------------------------------------------
# printing


def format_number(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"cannot print non-finite constant {v!r}")
    s = format(v, ".17g")
    return s


def sym_text(s: Sym) -> str:
    k = s.kind
    if k in ("q", "t", "p"):
        return s.name
    ix = ",".join(str(i + 1) for i in s.idx)
    if k == "s":
        return f"s[{ix}]"
    if k == "r":
        return f"r[{ix}]"
    return f"{k}[{s.name},{ix}]"


def _atom_text(e: Expr) -> str:
    """Text for something used as the base of ``^``."""
    if isinstance(e, Sym):
        return sym_text(e)
    if isinstance(e, Func):
        return _func_text(e)
    if isinstance(e, Pow) and e.exp.denominator == 2 and e.exp == Fraction(1, 2):
        return _pow_text(e)
    if isinstance(e, Num) and e.value >= 0:
        return format_number(e.value)
    return f"({to_text(e)})"


def _func_text(f: Func) -> str:
    return f"{f.name}{chr(39) * f.order}({to_text(f.arg)})"


def _pow_text(p: Pow) -> str:
    """Text for a factor with a positive exponent."""
    e = p.exp
    if e.denominator == 1:
        return f"{_atom_text(p.base)}^{e.numerator}"
    if e.denominator != 2:
        raise ValueError(f"exponent {e} is not expressible in the DSL")
    root = f"sqrt({to_text(p.base)})"
    return root if e.numerator == 1 else f"{root}^{e.numerator}"


def _factor_text(f: Expr) -> str:
    if isinstance(f, Pow):
        return _pow_text(f)
    return _atom_text(f)


def _mul_text(factors, coef: float) -> str:
    numer, denom = [], []
    for f in factors:
        if isinstance(f, Pow) and f.exp < -1 and isinstance(f.base, Add) and f.exp.denominator == 1:
            # "/(a + b)^2" would read back with the square expanded
            numer.append(f"{_atom_text(f.base)}^{f.exp.numerator}")
        elif isinstance(f, Pow) and f.exp < 0:
            inv = Pow(f.base, -f.exp) if f.exp != -1 else f.base
            denom.append(_factor_text(inv))
        else:
            numer.append(_factor_text(f))
    head = ""
    if coef == -1.0 and numer and "^" not in numer[0]:
        # "-x^2" would read back as (-x)^2
        head = "-"
    elif coef != 1.0:
        numer.insert(0, format_number(coef))
    if not numer:
        numer = ["1"]
    out = head + "*".join(numer)
    for d in denom:
        out += "/" + d
    return out


def _term_text(t: Expr) -> str:
    c, m = coeff_split(t)
    if m is None:
        return format_number(c)
    fs = m.factors if isinstance(m, Mul) else (m,)
    return _mul_text(fs, c)


def to_text(e: Expr) -> str:
    """Print in the model DSL; ``parse(to_text(e))`` reproduces ``e``."""
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            c, m = coeff_split(t)
            if i > 0 and c < 0:
                parts.append(" - " + _term_text(_make_term(-c, m)))
            elif i > 0:
                parts.append(" + " + _term_text(t))
            else:
                parts.append(_term_text(t))
        return "".join(parts)
    return _term_text(e)
