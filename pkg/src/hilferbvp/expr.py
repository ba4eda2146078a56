"""Small arithmetic language for right-hand sides written in config files.

Grammar, loosest binding first::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

``^`` is right-associative and binds tighter than unary minus, so ``-2^2``
is ``-(2^2)`` while ``2^-1`` is ``2^(-1)``. Names are ``t``, ``pi`` and
``x1`` .. ``xd``; functions are sin, cos, exp, log, sqrt and abs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

__all__ = [
    "ExpressionError",
    "ExpressionDomainError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "parse_expression",
    "to_source",
    "evaluate",
    "variables",
    "compile_rhs",
    "FUNCTIONS",
]


class ExpressionError(ValueError):
    """Syntax error, unknown name or wrong arity; ``offset`` is a byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExpressionDomainError(ArithmeticError):
    """log or sqrt evaluated outside its domain."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


def _checked_log(x):
    if np.any(np.asarray(x) <= 0):
        raise ExpressionDomainError("log of a nonpositive number")
    return np.log(x)


def _checked_sqrt(x):
    if np.any(np.asarray(x) < 0):
        raise ExpressionDomainError("sqrt of a negative number")
    return np.sqrt(x)


FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": _checked_log,
    "sqrt": _checked_sqrt,
    "abs": np.abs,
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_STATE_VAR = re.compile(r"x([1-9]\d*)")


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {src[pos]!r}", _byte_offset(src, pos))
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    toks.append(_Tok("end", "", _byte_offset(src, len(src))))
    return toks


def _byte_offset(src: str, i: int) -> int:
    return len(src[:i].encode("utf-8"))


class _Parser:
    def __init__(self, src: str, dim: int | None):
        self.toks = _tokenize(src)
        self.i = 0
        self.dim = dim

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "end":
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExpressionError(f"expected {text!r}, found {found}", self.tok.offset)
        return self.take()

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.take()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            return self.variable(tok)
        if tok.kind == "op" and tok.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExpressionError(f"expected a number, name or '(', found {found}", tok.offset)

    def call(self, name: _Tok) -> Expr:
        if name.text not in FUNCTIONS:
            raise ExpressionError(f"unknown function {name.text!r}", name.offset)
        self.expect("(")
        if self.tok.kind == "op" and self.tok.text == ")":
            raise ExpressionError(f"{name.text} takes exactly one argument, got 0", name.offset)
        arg = self.expr()
        if self.tok.kind == "op" and self.tok.text == ",":
            n = 1
            while self.tok.kind == "op" and self.tok.text == ",":
                self.take()
                self.expr()
                n += 1
            raise ExpressionError(f"{name.text} takes exactly one argument, got {n}", name.offset)
        self.expect(")")
        return Call(name.text, arg)

    def variable(self, tok: _Tok) -> Expr:
        name = tok.text
        if name in ("t", "pi"):
            return Var(name)
        m = _STATE_VAR.fullmatch(name)
        if m and (self.dim is None or int(m.group(1)) <= self.dim):
            return Var(name)
        if name in FUNCTIONS:
            raise ExpressionError(f"function {name!r} needs an argument", tok.offset)
        raise ExpressionError(f"unknown identifier {name!r}", tok.offset)


def parse_expression(src: str, dim: int | None = None) -> Expr:
    """Parse ``src``; with ``dim`` set, only x1 .. x<dim> are accepted."""
    if not src or not src.strip():
        raise ExpressionError("empty expression", 0)
    return _Parser(src, dim).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC, _POW_PREC, _ATOM_PREC = 3, 4, 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _POW_PREC if node.op == "^" else _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _wrap(node: Expr, paren: bool) -> str:
    s = to_source(node)
    return f"({s})" if paren else s


def to_source(node: Expr) -> str:
    """Print with the fewest parentheses that parse back to the same tree."""
    if isinstance(node, Num):
        if not math.isfinite(node.value) or node.value < 0:
            raise ValueError("literals must be finite and nonnegative; use Neg for signs")
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _prec(node.operand) < _NEG_PREC)
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if node.op == "^":
        return _wrap(node.left, _prec(node.left) <= _POW_PREC) + "^" + _wrap(node.right, _prec(node.right) < _NEG_PREC)
    p = _PREC[node.op]
    return _wrap(node.left, _prec(node.left) < p) + node.op + _wrap(node.right, _prec(node.right) <= p)


def variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables(node.operand if isinstance(node, Neg) else node.arg)
    return variables(node.left) | variables(node.right)


_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}


def evaluate(node: Expr, env: Mapping[str, object]):
    """Evaluate elementwise; ``env`` maps t and x1.. to scalars or arrays (pi is built in)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name == "pi":
            return math.pi
        try:
            return env[node.name]
        except KeyError:
            raise ExpressionError(f"no value bound for {node.name!r}", 0) from None
    if isinstance(node, Neg):
        return np.negative(evaluate(node.operand, env))
    if isinstance(node, Call):
        return FUNCTIONS[node.func](evaluate(node.arg, env))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return _BINARY[node.op](evaluate(node.left, env), evaluate(node.right, env))


def compile_rhs(components: list[Expr]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Vectorized f(t, x) with t of shape (n,) and x of shape (n, d)."""
    d = len(components)

    def f(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float).reshape(t.size, d)
        env = {"t": t, **{f"x{i + 1}": x[:, i] for i in range(d)}}
        cols = [np.broadcast_to(np.asarray(evaluate(c, env), dtype=float), t.shape) for c in components]
        return np.stack(cols, axis=-1)

    return f
