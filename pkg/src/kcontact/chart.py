"""Coordinate charts on the phase bundle of k-contact Lagrangian field theory."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .expr.core import Expr, Sym, free_symbols, functions_used

__all__ = ["BundleChart", "Kernel", "ChartError"]


class ChartError(ValueError):
    """An object references symbols or indices outside its chart."""


@dataclass(frozen=True)
class Kernel:
    """An opaque unary function such as a coupling ``C(z)``.

    ``derivatives[m]`` evaluates the m-th derivative.  ``limit_d1_over_z`` is
    the value of ``C'(z)/z`` as ``z -> 0`` (needed by the coupled-strings
    solver).  A kernel without implementations can still be differentiated
    symbolically; zero tests then sample a random generic function instead.
    """

    name: str
    derivatives: tuple[Callable, ...] = ()
    limit_d1_over_z: float | None = None

    def implementation(self, order: int) -> Callable | None:
        if order < len(self.derivatives):
            return self.derivatives[order]
        return None


@dataclass(frozen=True)
class BundleChart:
    """Global adapted coordinates ``(q^i, v^i_a, s^a)`` on the phase bundle.

    Indices in the Python API are zero based; the DSL prints them one based.
    """

    n: int
    k: int
    base_names: tuple[str, ...]
    parameters: dict = field(default_factory=dict)
    independent_names: tuple[str, ...] = ()
    kernels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ChartError("need n >= 1 and k >= 1")
        object.__setattr__(self, "base_names", tuple(self.base_names))
        if len(self.base_names) != self.n:
            raise ChartError(f"expected {self.n} base names, got {len(self.base_names)}")
        indep = tuple(self.independent_names) or tuple(f"t{a + 1}" for a in range(self.k))
        if len(indep) != self.k:
            raise ChartError(f"expected {self.k} independent variable names")
        object.__setattr__(self, "independent_names", indep)
        object.__setattr__(self, "parameters", dict(self.parameters))
        object.__setattr__(self, "kernels", dict(self.kernels))
        names = list(self.base_names) + list(self.parameters) + list(indep) + list(self.kernels)
        dupes = {x for x in names if names.count(x) > 1}
        if dupes:
            raise ChartError(f"duplicate names in chart: {sorted(dupes)}")

    def __hash__(self):
        return hash((self.n, self.k, self.base_names, tuple(self.parameters),
                     self.independent_names, tuple(self.kernels)))

    def __eq__(self, other):
        if not isinstance(other, BundleChart):
            return NotImplemented
        return (self.n, self.k, self.base_names, tuple(self.parameters),
                self.independent_names, tuple(self.kernels)) == (
            other.n, other.k, other.base_names, tuple(other.parameters),
            other.independent_names, tuple(other.kernels))

    # symbol factories ------------------------------------------------
    def _check_i(self, i):
        if not 0 <= i < self.n:
            raise ChartError(f"base index {i} out of range 0..{self.n - 1}")

    def _check_a(self, *alphas):
        for a in alphas:
            if not 0 <= a < self.k:
                raise ChartError(f"field index {a} out of range 0..{self.k - 1}")

    def q(self, i: int) -> Sym:
        self._check_i(i)
        return Sym("q", self.base_names[i])

    def v(self, i: int, alpha: int) -> Sym:
        self._check_i(i)
        self._check_a(alpha)
        return Sym("v", self.base_names[i], (alpha,))

    def s(self, alpha: int) -> Sym:
        self._check_a(alpha)
        return Sym("s", "", (alpha,))

    def a(self, i: int, alpha: int) -> Sym:
        self._check_i(i)
        self._check_a(alpha)
        return Sym("a", self.base_names[i], (alpha,))

    def w(self, i: int, alpha: int, beta: int) -> Sym:
        self._check_i(i)
        self._check_a(alpha, beta)
        return Sym("w", self.base_names[i], (alpha, beta))

    def r(self, alpha: int, beta: int) -> Sym:
        """Jet of the action: ``r[alpha, beta]`` stands for d s^beta / d t^alpha."""
        self._check_a(alpha, beta)
        return Sym("r", "", (alpha, beta))

    def t(self, alpha: int) -> Sym:
        self._check_a(alpha)
        return Sym("t", self.independent_names[alpha])

    def param(self, name: str) -> Sym:
        if name not in self.parameters:
            raise ChartError(f"undeclared parameter {name!r}")
        return Sym("p", name)

    # coordinate lists ------------------------------------------------
    @property
    def dim(self) -> int:
        return self.n + self.n * self.k + self.k

    def qs(self) -> list[Sym]:
        return [self.q(i) for i in range(self.n)]

    def vs(self) -> list[Sym]:
        return [self.v(i, a) for i in range(self.n) for a in range(self.k)]

    def ss(self) -> list[Sym]:
        return [self.s(a) for a in range(self.k)]

    def coords(self) -> list[Sym]:
        """Phase-bundle coordinates in the order (q, v, s)."""
        return self.qs() + self.vs() + self.ss()

    def coord_index(self, sym: Sym) -> int:
        return self._coord_positions()[sym]

    def _coord_positions(self) -> dict:
        cache = self.__dict__.get("_positions")
        if cache is None:
            cache = {c: i for i, c in enumerate(self.coords())}
            object.__setattr__(self, "_positions", cache)
        return cache

    def param_symbols(self) -> list[Sym]:
        return [Sym("p", name) for name in self.parameters]

    def base_index(self, name: str) -> int:
        try:
            return self.base_names.index(name)
        except ValueError:
            raise ChartError(f"unknown base coordinate {name!r}") from None

    # validation ------------------------------------------------------
    def owns(self, s: Sym) -> bool:
        in_range = all(0 <= a < self.k for a in s.idx)
        arity = {"q": 0, "v": 1, "a": 1, "w": 2, "s": 1, "r": 2, "t": 0, "p": 0}[s.kind]
        if len(s.idx) != arity or not in_range:
            return False
        if s.kind == "p":
            return s.name in self.parameters
        if s.kind == "t":
            return s.name in self.independent_names
        if s.kind in ("s", "r"):
            return True
        return s.name in self.base_names

    def check(self, e: Expr, *, allow_jets: bool = True) -> Expr:
        """Raise :class:`ChartError` if ``e`` leaves the chart."""
        for s in free_symbols(e):
            if not self.owns(s):
                raise ChartError(f"symbol {s} is not declared in this chart")
            if not allow_jets and s.kind in ("a", "w", "r", "t"):
                raise ChartError(f"jet symbol {s} not allowed here")
        for f in functions_used(e):
            if f.is_kernel and f.name not in self.kernels:
                raise ChartError(f"unknown function {f.name!r}")
        return e

    def parameter_values(self) -> dict:
        """Bindings ``Sym -> value`` for parameters that have defaults."""
        return {Sym("p", k): float(v) for k, v in self.parameters.items() if v is not None}

    def with_parameters(self, **values) -> "BundleChart":
        params = dict(self.parameters)
        for k, v in values.items():
            if k not in params:
                raise ChartError(f"undeclared parameter {k!r}")
            params[k] = v
        return BundleChart(self.n, self.k, self.base_names, params,
                           self.independent_names, self.kernels)
