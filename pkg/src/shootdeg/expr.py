"""A small arithmetic expression language for user-defined source terms.

Grammar (lowest to highest precedence)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right-associative
    atom   := NUMBER | IDENT | "(" expr ")"

Identifiers ``u1`` .. ``uL`` name the unknowns; any other identifier must be
a declared parameter. ``-u1^2`` parses as ``-(u1^2)`` and ``2^3^2`` as
``2^(3^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .errors import DomainError, ExprSyntaxError, UnknownIdentifier

INTEGER_EXPONENT_TOL = 1e-9


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Param, Neg, BinOp]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)
_VAR_RE = re.compile(r"u([1-9][0-9]*)$")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[pos + bad]!r}", pos + bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, L, param_names):
        self.tokens = _tokenize(text)
        self.i = 0
        self.L = L
        self.params = set(param_names)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}, found {val or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            m = _VAR_RE.match(val)
            if m and int(m.group(1)) <= self.L:
                return Var(int(m.group(1)))
            if val in self.params:
                return Param(val)
            raise UnknownIdentifier(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def parse(text: str, L: int = 1, param_names=()) -> Expr:
    """Parse ``text`` into an immutable AST over ``u1..uL`` and ``param_names``."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, L, param_names).parse()


def _power(base, expo):
    if base < 0.0:
        k = round(expo)
        if abs(expo - k) > INTEGER_EXPONENT_TOL:
            raise DomainError(f"negative base {base!r} with non-integer exponent {expo!r}")
        expo = k
    if base == 0.0 and expo < 0:
        raise DomainError("zero raised to a negative power")
    try:
        return base ** expo
    except OverflowError as exc:
        raise DomainError(f"overflow in {base!r}^{expo!r}") from exc


def evaluate(e: Expr, u: Sequence[float], params: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` at the point ``u`` (``u[0]`` is ``u1``)."""
    params = params or {}
    value = _eval(e, u, params)
    if not math.isfinite(value):
        raise DomainError(f"non-finite result {value!r}")
    return value


def _eval(e, u, params):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(u[e.index - 1])
    if isinstance(e, Param):
        try:
            return float(params[e.name])
        except KeyError:
            raise UnknownIdentifier(e.name) from None
    if isinstance(e, Neg):
        return -_eval(e.operand, u, params)
    a = _eval(e.left, u, params)
    b = _eval(e.right, u, params)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    return _power(a, b)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _fmt(e):
    if isinstance(e, Num):
        v = e.value
        text = str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        return text, _PREC["atom"]
    if isinstance(e, Var):
        return f"u{e.index}", _PREC["atom"]
    if isinstance(e, Param):
        return e.name, _PREC["atom"]
    if isinstance(e, Neg):
        text, prec = _fmt(e.operand)
        if prec < _PREC["neg"]:
            text = f"({text})"
        return f"-{text}", _PREC["neg"]
    lt, lp = _fmt(e.left)
    rt, rp = _fmt(e.right)
    prec = _PREC[e.op]
    if e.op == "^":
        if lp <= prec:
            lt = f"({lt})"
        if rp < _PREC["neg"]:
            rt = f"({rt})"
        return f"{lt}^{rt}", prec
    if lp < prec:
        lt = f"({lt})"
    if rp <= prec:
        rt = f"({rt})"
    return f"{lt} {e.op} {rt}", prec


def to_string(e: Expr) -> str:
    """Render ``e`` with the minimum parentheses needed to reparse it identically."""
    return _fmt(e)[0]


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    return set()
