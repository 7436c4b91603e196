"""Recursive-descent parser for the expression DSL.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | ident | ident '(' expr ')'
            | 'v[' ident ',' integer ']' | 's[' integer ']'
            | 'a[' ident ',' integer ']' | 'w[' ident ',' integer ',' integer ']'
            | 'r[' integer ',' integer ']' | '(' expr ')' | '-' base

Field indices are one based in the text.  Identifiers may carry trailing
primes, so ``C''(z)`` names the second derivative of a declared kernel.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..chart import BundleChart
from .core import (BUILTIN_FUNCTIONS, Expr, Num, Sym, add, div, func, mul,
                   neg, power, sub)

__all__ = ["ParseError", "parse", "parse_symbol"]


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1, text: str = ""):
        self.message = message
        self.line = line
        self.column = column
        self.text = text
        super().__init__(f"{line}:{column}: {message}")


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op>[-+*/^(),\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            line, col = _line_col(text, pos)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col, text)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


_INDEXED = {"v": ("ident", 1), "a": ("ident", 1), "w": ("ident", 2), "s": (None, 1), "r": (None, 2)}


class _Parser:
    def __init__(self, text: str, chart: BundleChart):
        self.text = text
        self.chart = chart
        self.toks = _tokenize(text)
        self.i = 0

    # helpers ---------------------------------------------------------
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        line, col = _line_col(self.text, tok.pos)
        raise ParseError(msg, line, col, self.text)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def integer(self) -> int:
        sign = -1 if self.accept("-") else 1
        tok = self.tok
        if tok.kind != "number" or not tok.text.isdigit():
            self.error("expected an integer")
        self.i += 1
        return sign * int(tok.text)

    # grammar ---------------------------------------------------------
    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        out = self.term()
        while True:
            if self.accept("+"):
                out = add(out, self.term())
            elif self.accept("-"):
                out = sub(out, self.term())
            else:
                return out

    def term(self) -> Expr:
        out = self.factor()
        while True:
            if self.accept("*"):
                out = mul(out, self.factor())
            elif self.accept("/"):
                tok = self.tok
                d = self.factor()
                if isinstance(d, Num) and d.value == 0.0:
                    self.error("division by zero", tok)
                out = div(out, d)
            else:
                return out

    def factor(self) -> Expr:
        tok = self.tok
        b = self.base()
        if self.accept("^"):
            n = self.integer()
            try:
                return power(b, n)
            except (ZeroDivisionError, ValueError) as exc:
                self.error(str(exc), tok)
        return b

    def base(self) -> Expr:
        tok = self.tok
        if self.accept("-"):
            return neg(self.base())
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "number":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind != "ident":
            self.error(f"unexpected {tok.text or 'end of input'!r}")
        self.i += 1
        name = tok.text
        nxt = self.tok
        if nxt.kind == "op" and nxt.text == "[" and name in _INDEXED:
            self.i += 1
            return self.indexed(name, tok)
        if nxt.kind == "op" and nxt.text == "(":
            self.i += 1
            arg = self.expr()
            self.expect(")")
            return self.call(name, arg, tok)
        return self.identifier(name, tok)

    def indexed(self, kind: str, tok: _Tok) -> Expr:
        ch = self.chart
        first, nidx = _INDEXED[kind]
        base_name = ""
        if first == "ident":
            t = self.tok
            if t.kind != "ident":
                self.error("expected a base coordinate name")
            if t.text not in ch.base_names:
                self.error(f"undeclared base coordinate {t.text!r}", t)
            base_name = t.text
            self.i += 1
            self.expect(",")
        idx = []
        for j in range(nidx):
            if j:
                self.expect(",")
            t = self.tok
            a = self.integer()
            if not 1 <= a <= ch.k:
                self.error(f"index {a} out of range 1..{ch.k}", t)
            idx.append(a - 1)
        self.expect("]")
        return Sym(kind, base_name, tuple(idx))

    def call(self, name: str, arg: Expr, tok: _Tok) -> Expr:
        stem = name.rstrip("'")
        order = len(name) - len(stem)
        if stem in BUILTIN_FUNCTIONS or stem == "sqrt":
            if order:
                self.error(f"derivative marks are only allowed on kernels, not {stem!r}", tok)
            try:
                return func(stem, arg)
            except (ValueError, ZeroDivisionError) as exc:
                self.error(str(exc), tok)
        if stem in self.chart.kernels:
            return func(stem, arg, order)
        self.error(f"undeclared function {stem!r}", tok)

    def identifier(self, name: str, tok: _Tok) -> Expr:
        ch = self.chart
        if name in ch.base_names:
            return Sym("q", name)
        if name in ch.parameters:
            return Sym("p", name)
        if name in ch.independent_names:
            return Sym("t", name)
        self.error(f"undeclared identifier {name!r}", tok)


def parse(text: str, chart: BundleChart) -> Expr:
    """Parse DSL text into a canonical expression over ``chart``."""
    return _Parser(text, chart).parse()


def parse_symbol(text: str, chart: BundleChart) -> Sym:
    """Parse a single coordinate token such as ``v[q,1]`` or ``s[2]``."""
    e = parse(text, chart)
    if not isinstance(e, Sym):
        raise ParseError(f"{text!r} is not a single symbol", 1, 1, text)
    return e
