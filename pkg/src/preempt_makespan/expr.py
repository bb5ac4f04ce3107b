"""Blackboard expression language for Expression and Condition nodes.

Grammar (EBNF)::

    expr       = or_expr ;
    or_expr    = and_expr , { "||" , and_expr } ;
    and_expr   = comparison , { "&&" , comparison } ;
    comparison = additive , { ( "<" | "<=" | ">" | ">=" | "==" | "!=" ) , additive } ;
    additive   = term , { ( "+" | "-" ) , term } ;
    term       = unary , { ( "*" | "/" | "%" ) , unary } ;
    unary      = ( "-" | "!" ) , unary | primary ;
    primary    = number | "true" | "false" | "$" , identifier | "(" , expr , ")" ;
    number     = digits , [ "." , [ digits ] ] , [ exponent ] | "." , digits , [ exponent ] ;
    exponent   = ( "e" | "E" ) , [ "+" | "-" ] , digits ;

All binary operators are left-associative.  Values are 64-bit floats or
booleans; there are no implicit conversions between them.
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Union

Value = Union[float, bool]


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnexpectedToken(ExprSyntaxError):
    pass


class UnknownKey(ExprError, KeyError):
    def __init__(self, name: str) -> None:
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown blackboard key ${self.name}"


class TypeMismatch(ExprError, TypeError):
    pass


class DivisionByZero(ExprError, ZeroDivisionError):
    pass


# -- AST ------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary:
    op: str
    left: Expr
    right: Expr


Expr = Union[Num, Bool, Ref, Unary, Binary]

# -- lexer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ref>\$[A-Za-z_][A-Za-z0-9_]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||<=|>=|==|!=|[-+*/%<>!()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# -- parser ---------------------------------------------------------------

_BINARY_LEVELS = (
    ("||",),
    ("&&",),
    ("<", "<=", ">", ">=", "==", "!="),
    ("+", "-"),
    ("*", "/", "%"),
)


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def binary(self, level: int) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        ops = _BINARY_LEVELS[level]
        left = self.binary(level + 1)
        while self.peek().kind == "op" and self.peek().text in ops:
            op = self.take().text
            left = Binary(op, left, self.binary(level + 1))
        return left

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("-", "!"):
            self.take()
            return Unary(tok.text, self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ref":
            return Ref(tok.text[1:])
        if tok.kind == "name":
            if tok.text in ("true", "True"):
                return Bool(True)
            if tok.text in ("false", "False"):
                return Bool(False)
            raise UnexpectedToken(f"bare identifier {tok.text!r} (blackboard keys need '$')", tok.offset)
        if tok.kind == "op" and tok.text == "(":
            inner = self.binary(0)
            close = self.take()
            if close.kind != "op" or close.text != ")":
                raise ExprSyntaxError("expected ')'", close.offset)
            return inner
        if tok.kind == "eof":
            raise ExprSyntaxError("unexpected end of input", tok.offset)
        raise UnexpectedToken(f"unexpected token {tok.text!r}", tok.offset)


def parse(text: str) -> Expr:
    p = _Parser(text)
    tree = p.binary(0)
    tail = p.peek()
    if tail.kind != "eof":
        raise UnexpectedToken(f"unexpected token {tail.text!r}", tail.offset)
    return tree


def to_source(expr: Expr) -> str:
    """Canonical, fully parenthesized rendering that parses back to ``expr``."""
    if isinstance(expr, Num):
        return repr(float(expr.value))
    if isinstance(expr, Bool):
        return "true" if expr.value else "false"
    if isinstance(expr, Ref):
        return "$" + expr.name
    if isinstance(expr, Unary):
        return f"{expr.op}{to_source(expr.operand)}"
    return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"


def references(expr: Expr) -> set[str]:
    if isinstance(expr, Ref):
        return {expr.name}
    if isinstance(expr, Unary):
        return references(expr.operand)
    if isinstance(expr, Binary):
        return references(expr.left) | references(expr.right)
    return set()


# -- evaluator ------------------------------------------------------------


def _is_num(v: object) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _need_num(op: str, *vals: Value) -> None:
    for v in vals:
        if not _is_num(v):
            raise TypeMismatch(f"operator {op!r} needs numbers, got {type(v).__name__}")


def _need_bool(op: str, *vals: Value) -> None:
    for v in vals:
        if not isinstance(v, bool):
            raise TypeMismatch(f"operator {op!r} needs booleans, got {type(v).__name__}")


def evaluate(expr: Expr, blackboard: Mapping[str, Value]) -> Value:
    """Evaluate ``expr`` against a read-only view of the blackboard."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Bool):
        return expr.value
    if isinstance(expr, Ref):
        if expr.name not in blackboard:
            raise UnknownKey(expr.name)
        v = blackboard[expr.name]
        if isinstance(v, bool):
            return v
        if _is_num(v):
            return float(v)
        raise TypeMismatch(f"${expr.name} holds a {type(v).__name__}, not a number or boolean")
    if isinstance(expr, Unary):
        v = evaluate(expr.operand, blackboard)
        if expr.op == "-":
            _need_num("-", v)
            return -v
        _need_bool("!", v)
        return not v

    a = evaluate(expr.left, blackboard)
    b = evaluate(expr.right, blackboard)
    op = expr.op
    if op in ("&&", "||"):
        _need_bool(op, a, b)
        return (a and b) if op == "&&" else (a or b)
    if op in ("==", "!="):
        if not ((_is_num(a) and _is_num(b)) or (isinstance(a, bool) and isinstance(b, bool))):
            raise TypeMismatch(f"cannot compare {type(a).__name__} with {type(b).__name__}")
        return (a == b) if op == "==" else (a != b)
    _need_num(op, a, b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise DivisionByZero("division by zero")
        return a / b
    if op == "%":
        if b == 0:
            raise DivisionByZero("modulo by zero")
        return math.fmod(a, b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ExprError(f"unknown operator {op!r}")


# short alias used by node definitions; shadows the builtin only in this module
eval = evaluate  # noqa: A001
