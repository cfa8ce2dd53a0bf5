"""Coordinate expressions: parsing, serialization and jet evaluation.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := primary ("^" unary)?
    primary := NUMBER | "pi" | VAR | FUNC "(" expr ")" | "(" expr ")"
    VAR     := "x" DIGIT            (x1 .. x9)
    FUNC    := sin | cos | tan | exp | ln | sqrt | sinh | cosh

Exponents must be constant (no variables).  A non-integer exponent requires
a positive base at evaluation time.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jets
from .errors import ExpressionDomainError, ParseError, ValidationError
from .jets import Jet

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "sinh", "cosh")

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Pow, Call]


# -- parsing -----------------------------------------------------------------

def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    stripped = source.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if m is None or m.end() == pos:
            col = pos + len(stripped[pos:]) - len(stripped[pos:].lstrip())
            raise ParseError(f"unexpected character {stripped[col]!r}", col, source)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, dimension: int):
        self.source = source
        self.dimension = dimension
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        if tok[0] == "end":
            message = f"{message}: unexpected end of input"
        else:
            message = f"{message}: unexpected {tok[1]!r}"
        return ParseError(message, tok[2], self.source)

    def expect(self, text: str):
        tok = self.take()
        if tok[1] != text or tok[0] == "num":
            raise self.error(f"expected {text!r}", tok)

    def parse(self) -> Expression:
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error("syntax error")
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expression:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expression:
        base = self.primary()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            exp_tok = self.peek()
            exponent = self.unary()
            if _has_variables(exponent):
                raise ParseError("exponent must be a numeric constant", exp_tok[2], self.source)
            return Pow(base, exponent)
        return base

    def primary(self) -> Expression:
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "pi":
                return Num(math.pi)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            m = re.fullmatch(r"x([1-9])", text)
            if m is None:
                raise ParseError(f"unknown identifier {text!r}", pos, self.source)
            index = int(m.group(1))
            if index > self.dimension:
                raise ParseError(
                    f"variable {text} out of range for dimension {self.dimension}",
                    pos, self.source)
            return Var(index)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise self.error("syntax error", tok)


def _has_variables(node: Expression) -> bool:
    return max_variable(node) > 0


def max_variable(node: Expression) -> int:
    """Largest variable index referenced (0 for constants)."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, (Neg, Call)):
        return max_variable(node.arg)
    if isinstance(node, BinOp):
        return max(max_variable(node.left), max_variable(node.right))
    return max(max_variable(node.base), max_variable(node.exponent))


def parse(source: str, dimension: int) -> Expression:
    """Parse ``source`` into an expression over ``x1 .. x<dimension>``."""
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0, source)
    if not 1 <= dimension <= 9:
        raise ValidationError(f"dimension must be between 1 and 9, got {dimension}")
    return _Parser(source, dimension).parse()


def to_source(node: Expression) -> str:
    """Serialize to text that parses back to an identical tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Pow):
        return f"({to_source(node.base)}^{to_source(node.exponent)})"
    return f"{node.func}({to_source(node.arg)})"


# -- evaluation --------------------------------------------------------------

def constant_value(node: Expression) -> float:
    return float(eval_jet2(node, np.zeros(0)).val)


def _domain(message: str, node: Expression) -> ExpressionDomainError:
    return ExpressionDomainError(message, to_source(node))


def _eval(node: Expression, xs: Jet) -> Jet:
    if isinstance(node, Num):
        return Jet.constant(node.value, xs.nvars)
    if isinstance(node, Var):
        if node.index > xs.shape[0]:
            raise ValidationError(f"variable x{node.index} not bound at evaluation point of "
                                  f"dimension {xs.shape[0]}")
        return xs[node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.arg, xs)
    if isinstance(node, BinOp):
        left = _eval(node.left, xs)
        right = _eval(node.right, xs)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if right.val == 0.0:
            raise _domain("division by zero", node)
        return left / right
    if isinstance(node, Pow):
        base = _eval(node.base, xs)
        p = float(_eval(node.exponent, xs).val)
        b = float(base.val)
        if p != int(p):
            if b <= 0.0:
                raise _domain("non-integer power of a non-positive base", node)
        elif p < 0 and b == 0.0:
            raise _domain("negative power of zero", node)
        return base ** p
    arg = _eval(node.arg, xs)
    v = float(arg.val)
    f = node.func
    if f == "ln":
        if v <= 0.0:
            raise _domain("logarithm of a non-positive value", node)
        return jets.log(arg)
    if f == "sqrt":
        if v <= 0.0:
            raise _domain("square root not differentiable at non-positive value", node)
        return jets.sqrt(arg)
    if f == "tan" and abs(math.cos(v)) < 1e-15:
        raise _domain("tangent pole", node)
    with np.errstate(over="ignore", invalid="ignore"):
        result = getattr(jets, f)(arg)
    if not np.isfinite(result.val):
        raise _domain("overflow", node)
    return result


def eval_jet2(node: Expression, x) -> Jet:
    """Value, gradient and Hessian of ``node`` at the point ``x``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValidationError("evaluation point must be finite")
    return _eval(node, Jet.variables(x))


_FLOAT_FUNCS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
    "ln": math.log, "sqrt": math.sqrt, "sinh": math.sinh, "cosh": math.cosh,
}


def _value(node: Expression, x) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x[node.index - 1]
    if isinstance(node, Neg):
        return -_value(node.arg, x)
    if isinstance(node, BinOp):
        left, right = _value(node.left, x), _value(node.right, x)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if right == 0.0:
            raise _domain("division by zero", node)
        return left / right
    if isinstance(node, Pow):
        base, p = _value(node.base, x), _value(node.exponent, x)
        if p != int(p) and base <= 0.0:
            raise _domain("non-integer power of a non-positive base", node)
        if p < 0 and base == 0.0:
            raise _domain("negative power of zero", node)
        return base ** p
    v = _value(node.arg, x)
    if node.func in ("ln", "sqrt") and v <= 0.0:
        raise _domain(f"{node.func} of a non-positive value", node)
    try:
        return _FLOAT_FUNCS[node.func](v)
    except OverflowError:
        raise _domain("overflow", node) from None


def eval_at(node: Expression, x) -> float:
    """Value only; much cheaper than :func:`eval_jet2`."""
    return float(_value(node, [float(v) for v in x]))


def fd_validate(node: Expression, x, step: float) -> float:
    """Max abs difference between jet derivatives and central differences.

    Gradients are compared with central differences of the value; Hessians
    with central differences of the jet gradient.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    jet = eval_jet2(node, x)
    n = x.shape[0]
    worst = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        plus, minus = eval_jet2(node, x + e), eval_jet2(node, x - e)
        fd_grad = (plus.val - minus.val) / (2 * step)
        fd_hess = (plus.grad - minus.grad) / (2 * step)
        worst = max(worst, abs(float(jet.grad[i] - fd_grad)),
                    float(np.max(np.abs(jet.hess[:, i] - fd_hess))))
    return worst
