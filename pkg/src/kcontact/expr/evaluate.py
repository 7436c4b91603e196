"""Bottom-up numeric evaluation of expression trees.

Values may be Python floats or numpy arrays of a common shape; the grid code
evaluates whole solution grids in one pass.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .core import Add, Expr, Func, Mul, Num, Pow, Sym, to_text

__all__ = ["DomainError", "MissingBinding", "evaluate", "compile_expr"]


class DomainError(ArithmeticError):
    """Evaluation left the domain (log of non-positive, division by zero...)."""


class MissingBinding(KeyError):
    """A free symbol has no value in the supplied point."""


_BUILTIN = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}


def _kernel_impl(kernels: Mapping | None, name: str, order: int) -> Callable:
    impl = None
    if kernels is not None and name in kernels:
        k = kernels[name]
        if callable(k) and not hasattr(k, "implementation"):
            impl = k if order == 0 else None
        else:
            impl = k.implementation(order)
    if impl is None:
        raise MissingBinding(f"no implementation for {name}{chr(39) * order}")
    return impl


def _check(x, what: str):
    if np.ndim(x) == 0:
        if not np.isfinite(x):
            raise DomainError(what)
    elif not np.all(np.isfinite(x)):
        raise DomainError(what)
    return x


def evaluate(e: Expr, point: Mapping[Sym, float], kernels: Mapping | None = None):
    """Evaluate ``e`` at ``point``.

    Raises :class:`DomainError` for log of a non-positive number, division by
    zero, square roots of negatives and overflow; :class:`MissingBinding`
    when a symbol or kernel has no value.
    """
    memo: dict = {}

    def go(n: Expr):
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, Num):
            out = n.value
        elif isinstance(n, Sym):
            try:
                out = point[n]
            except KeyError:
                raise MissingBinding(f"no value for {to_text(n)}") from None
        elif isinstance(n, Add):
            out = go(n.terms[0])
            for t in n.terms[1:]:
                out = out + go(t)
        elif isinstance(n, Mul):
            out = go(n.factors[0])
            for f in n.factors[1:]:
                out = out * go(f)
        elif isinstance(n, Pow):
            b = go(n.base)
            ex = n.exp
            if ex < 0 and np.any(np.asarray(b) == 0):
                raise DomainError(f"division by zero in {to_text(n)}")
            if ex.denominator != 1 and np.any(np.asarray(b) < 0):
                raise DomainError(f"square root of a negative number in {to_text(n)}")
            if ex.denominator == 1:
                out = b ** int(ex) if np.ndim(b) == 0 else np.power(b, float(ex))
            else:
                out = np.power(b, float(ex)) if np.ndim(b) else float(b) ** float(ex)
        elif isinstance(n, Func):
            x = go(n.arg)
            if n.name == "log" and np.any(np.asarray(x) <= 0):
                raise DomainError(f"log of a non-positive number in {to_text(n)}")
            if n.is_kernel:
                out = _kernel_impl(kernels, n.name, n.order)(x)
            else:
                out = _BUILTIN[n.name](x)
                if np.ndim(out) == 0:
                    out = float(out)
        else:
            raise TypeError(type(n))
        if isinstance(out, (int, float)) and not isinstance(out, bool):
            out = float(out)
        _check(out, f"non-finite value in {to_text(n)}")
        memo[n] = out
        return out

    with np.errstate(all="ignore"):
        try:
            return go(e)
        except (OverflowError, ZeroDivisionError) as exc:
            raise DomainError(str(exc)) from None


def compile_expr(e: Expr, symbols, kernels: Mapping | None = None) -> Callable:
    """Return ``f(*values)`` evaluating ``e`` with ``symbols`` bound in order."""
    symbols = list(symbols)

    def f(*values):
        return evaluate(e, dict(zip(symbols, values)), kernels)

    return f
