"""Symbolic expressions: canonical trees, the DSL parser, evaluation and zero tests."""

from .core import (Add, Expr, Func, Mul, Num, ONE, Pow, Sym, ZERO, add, as_expr,
                   diff, div, free_symbols, func, is_rational, mul, neg, power,
                   sqrt, sub, subs, to_text)
from .evaluate import DomainError, MissingBinding, compile_expr, evaluate
from .parse import ParseError, parse, parse_symbol
from .zero import DEFAULT_SEED, Verdict, combine_verdicts, is_zero


def normalize(e: Expr) -> Expr:
    """Rebuild ``e`` through the canonical constructors."""
    return subs(e, {})


__all__ = [
    "Add", "Expr", "Func", "Mul", "Num", "ONE", "Pow", "Sym", "ZERO", "add",
    "as_expr", "diff", "div", "free_symbols", "func", "is_rational", "mul",
    "neg", "power", "sqrt", "sub", "subs", "to_text", "DomainError",
    "MissingBinding", "compile_expr", "evaluate", "ParseError", "parse",
    "parse_symbol", "DEFAULT_SEED", "Verdict", "combine_verdicts", "is_zero",
    "normalize", "differentiate",
]

differentiate = diff
