"""Expression trees, the parser and the pretty-printer.

Grammar (``^`` binds tightest and is right-associative, then unary minus,
then ``* /``, then ``+ -``)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from ..errors import ExprSyntaxError, UnknownIdentifier
from .functions import FUNCTIONS

CONSTANTS = {"pi": math.pi}


class Expr:
    """Base class of expression nodes."""

    def free_vars(self) -> set[str]:
        out: set[str] = set()
        _collect(self, out)
        return out

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]


def _collect(e: Expr, out: set[str]) -> None:
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, Neg):
        _collect(e.operand, out)
    elif isinstance(e, BinOp):
        _collect(e.left, out)
        _collect(e.right, out)
    elif isinstance(e, Call):
        for a in e.args:
            _collect(a, out)


# tokenizer
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, ident, op, end
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(src, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r} at offset {pos}", pos,
                                  {"number", "identifier", "operator"})
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, src: str, variables: frozenset[str] | None):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.variables = variables

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, expected: Iterable[str]):
        t = self.tok
        what = "end of input" if t.kind == "end" else repr(t.text)
        exp = set(expected)
        raise ExprSyntaxError(f"unexpected {what} at offset {t.offset}; expected one of {sorted(exp)}",
                              t.offset, exp)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.error({"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "ident":
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownIdentifier(t.text, t.offset)
                self.i += 1
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                if not self.accept(")"):
                    self.error({",", ")"})
                arity = FUNCTIONS[t.text][0]
                if len(args) != arity:
                    raise ExprSyntaxError(f"{t.text} takes {arity} argument(s), got {len(args)}",
                                          t.offset, {f"{arity} arguments"})
                return Call(t.text, tuple(args))
            if t.text in CONSTANTS:
                return Const(t.text)
            if t.text in FUNCTIONS:
                self.error({"("})
            if self.variables is not None and t.text not in self.variables:
                raise UnknownIdentifier(t.text, t.offset)
            return Var(t.text)
        if self.accept("("):
            e = self.expr()
            if not self.accept(")"):
                self.error({")", "+", "-", "*", "/", "^"})
            return e
        self.error({"number", "identifier", "(", "-"})
        raise AssertionError  # unreachable


def parse(source: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse ``source``; when ``variables`` is given, other names are rejected."""
    if not isinstance(source, str):
        raise TypeError("expression source must be a string")
    allowed = None if variables is None else frozenset(variables)
    return _Parser(source, allowed).parse()


def as_expr(obj, variables: Iterable[str] | None = None) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float)):
        return Num(float(obj))
    return parse(str(obj), variables)


# printer
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC_POW if e.op == "^" else _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 0
    return _PREC_ATOM


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(float(v))
    if "inf" in s or "nan" in s:
        raise ValueError(f"cannot print non-finite literal {v}")
    return s


def pretty(e: Expr) -> str:
    if isinstance(e, Num):
        s = _fmt_num(abs(e.value))
        return f"(-{s})" if math.copysign(1.0, e.value) < 0 else s
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}(" + ", ".join(pretty(a) for a in e.args) + ")"
    if isinstance(e, Neg):
        inner = pretty(e.operand)
        if _prec(e.operand) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        p = _prec(e)
        ls, rs = pretty(e.left), pretty(e.right)
        if e.op == "^":
            # base must be an atom, exponent may be a unary or power
            if _prec(e.left) < _PREC_ATOM:
                ls = f"({ls})"
            if _prec(e.right) < _PREC_NEG:
                rs = f"({rs})"
            return f"{ls}^{rs}"
        if _prec(e.left) < p:
            ls = f"({ls})"
        if _prec(e.right) <= p:
            rs = f"({rs})"
        return f"{ls} {e.op} {rs}"
    raise TypeError(f"not an expression: {e!r}")


# rewriting helpers
def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Call):
        return Call(e.func, tuple(substitute(a, mapping) for a in e.args))
    return e
