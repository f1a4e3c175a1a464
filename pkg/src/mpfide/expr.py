"""Coefficient expressions in the variables ``t`` and ``tau``.

A small recursive-descent parser so that problem data (the entries of
``A(t)``, ``f(t)``, ``K(t, tau)``, ``phi_j(t)``, ``psi_j(tau)``) can live in
config files.  Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 't' | 'tau' | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of sin, cos, exp, log, sqrt, abs.  Identifiers are
case-sensitive and there is no implicit multiplication.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

__all__ = [
    "Expression",
    "ExprSyntaxError",
    "ExprDomainError",
    "parse",
    "evaluate",
    "FUNCTIONS",
]

VARIABLES = ("t", "tau")


def _log(x: float) -> float:
    if x <= 0.0:
        raise ValueError("log of non-positive value")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ValueError("sqrt of negative value")
    return math.sqrt(x)


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": _log,
    "sqrt": _sqrt,
    "abs": abs,
}


class ExprSyntaxError(ValueError):
    """Malformed expression source; ``offset`` is a byte offset into it."""

    def __init__(self, message: str, source: str, offset: int):
        self.source = source
        self.offset = offset
        self.reason = message
        super().__init__(f"{message} at offset {offset} in {source!r}")


class ExprDomainError(ArithmeticError):
    """Evaluation left the real domain; ``subtree`` is the failing node."""

    def __init__(self, message: str, subtree: "Expression"):
        self.subtree = subtree
        self.reason = message
        super().__init__(f"{message} in subexpression {subtree.to_source()!r}")


# -- tree ------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float

    def to_source(self) -> str:
        return repr(self.value)

    def mentions(self, name: str) -> bool:
        return False


@dataclass(frozen=True)
class Var:
    name: str

    def to_source(self) -> str:
        return self.name

    def mentions(self, name: str) -> bool:
        return self.name == name


@dataclass(frozen=True)
class Neg:
    operand: "Expression"

    def to_source(self) -> str:
        return f"(-{self.operand.to_source()})"

    def mentions(self, name: str) -> bool:
        return self.operand.mentions(name)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"

    def to_source(self) -> str:
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"

    def mentions(self, name: str) -> bool:
        return self.left.mentions(name) or self.right.mentions(name)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"

    def to_source(self) -> str:
        return f"{self.func}({self.arg.to_source()})"

    def mentions(self, name: str) -> bool:
        return self.arg.mentions(name)


Expression = Union[Num, Var, Neg, BinOp, Call]


# -- tokenizer -------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    # byte offsets: the grammar is ASCII, but the source need not be
    byte_at = lambda i: len(source[:i].encode("utf-8"))  # noqa: E731
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {source[pos]!r}", source, byte_at(pos)
            )
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), byte_at(pos)))
        pos = m.end()
    tokens.append(_Token("end", "", byte_at(len(source))))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        return ExprSyntaxError(message, self.source, tok.offset)

    def take(self) -> _Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind != "op":
            what = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise self.error(f"expected {text!r}, found {what}")
        self.i += 1

    def parse(self) -> Expression:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expression:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        tok = self.tok
        if tok.kind == "num":
            self.take()
            value = float(tok.text)
            if not math.isfinite(value):
                raise self.error("numeric literal out of range", tok)
            return Num(value)
        if tok.kind == "ident":
            self.take()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            raise self.error(f"unknown identifier {tok.text!r}", tok)
        if tok.kind == "op" and tok.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")


def parse(source: str) -> Expression:
    """Parse ``source`` into an immutable expression tree."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", source, 0)
    return _Parser(source).parse()


def evaluate(e: Expression, t: float, tau: float = 0.0) -> float:
    """Evaluate ``e`` with the given bindings of ``t`` and ``tau``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return t if e.name == "t" else tau
    if isinstance(e, Neg):
        return -evaluate(e.operand, t, tau)
    if isinstance(e, Call):
        x = evaluate(e.arg, t, tau)
        try:
            y = FUNCTIONS[e.func](x)
        except (ValueError, OverflowError) as exc:
            raise ExprDomainError(str(exc), e) from None
        return _finite(y, e)
    a = evaluate(e.left, t, tau)
    b = evaluate(e.right, t, tau)
    op = e.op
    try:
        if op == "+":
            y = a + b
        elif op == "-":
            y = a - b
        elif op == "*":
            y = a * b
        elif op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero", e)
            y = a / b
        else:
            y = a**b
            if isinstance(y, complex):
                raise ExprDomainError("non-real power", e)
    except (OverflowError, ZeroDivisionError) as exc:
        raise ExprDomainError(str(exc), e) from None
    return _finite(y, e)


def _finite(y: float, node: Expression) -> float:
    if not math.isfinite(y):
        raise ExprDomainError("non-finite result", node)
    return float(y)
