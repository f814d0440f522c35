"""Arithmetic expression ASTs over exact rationals.

The AST is the common currency of every solution-view transformation:
infix equation text <-> expression tree <-> Polish (prefix) traversal.
All numbers are exact ``fractions.Fraction`` values, so parsing,
rendering, and evaluation compose without floating-point drift.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Rational = Fraction

OPERATORS = ("+", "-", "*", "/")

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_ATOM = 9

DEFAULT_REL_TOL = Fraction(1, 10000)


class ExprError(Exception):
    """Base class for expression-layer failures."""


class ParseError(ExprError):
    """Malformed expression text. ``position`` is a character offset for
    infix input and a token index for prefix input."""

    def __init__(self, message: str, position: int, expected: str | None = None):
        self.position = position
        self.expected = expected
        suffix = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at position {position}{suffix}")


class UnsupportedOperatorError(ParseError):
    def __init__(self, symbol: str, position: int):
        self.symbol = symbol
        super().__init__(f"operator {symbol!r} is outside the + - * / grammar", position)


class ArityUnderflowError(ParseError):
    pass


class TrailingTokensError(ParseError):
    pass


class BadTokenError(ParseError):
    pass


class DivisionByZeroError(ExprError):
    def __init__(self, rendering: str):
        self.rendering = rendering
        super().__init__(f"division by zero while evaluating {rendering!r}")


@dataclass(frozen=True)
class Number:
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")


Expr = Union[Number, Neg, BinOp]


@dataclass(frozen=True)
class Equation:
    """``unknown = rhs`` with the unknown only ever on the left."""

    unknown: str
    rhs: Expr


def format_rational(value: Fraction) -> str:
    """Canonical numeral: integer, exact terminating decimal, else ``p/q``."""
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    k = max(twos, fives)
    scaled = abs(value.numerator) * 10**k // value.denominator
    digits = str(scaled).rjust(k + 1, "0")
    body = f"{digits[:-k]}.{digits[-k:]}"
    return "-" + body if value < 0 else body


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "ident" | "sym"
    text: str
    pos: int
    percent: bool = False


_NUM_RE = re.compile(r"\d+(?:\.\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text.startswith("**", i):
            raise UnsupportedOperatorError("**", i)
        if c == "^":
            raise UnsupportedOperatorError("^", i)
        if c.isdigit():
            lit = _NUM_RE.match(text, i).group(0)
            j = i + len(lit)
            percent = j < n and text[j] == "%"
            tokens.append(_Token("num", lit, i, percent))
            i = j + (1 if percent else 0)
            continue
        if c in "+-*/()=":
            tokens.append(_Token("sym", c, i))
            i += 1
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(0), i))
            i += len(m.group(0))
            continue
        if c == "%":
            raise UnsupportedOperatorError("%", i)
        raise ParseError(f"unexpected character {c!r}", i)
    return tokens


class _InfixParser:
    def __init__(self, tokens: list[_Token], end_pos: int):
        self.tokens = tokens
        self.i = 0
        self.end_pos = end_pos

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def expr(self) -> Expr:
        node = self.term()
        while (tok := self.peek()) and tok.kind == "sym" and tok.text in "+-":
            self.i += 1
            node = BinOp(tok.text, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while (tok := self.peek()) and tok.kind == "sym" and tok.text in "*/":
            self.i += 1
            node = BinOp(tok.text, node, self.factor())
        return node

    def factor(self) -> Expr:
        tok = self.peek()
        if tok and tok.kind == "sym" and tok.text == "-":
            self.i += 1
            return Neg(self.factor())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.end_pos, expected="a number or '('")
        if tok.kind == "num":
            self.i += 1
            value = Fraction(tok.text)
            if tok.percent:
                return BinOp("/", Number(value), Number(Fraction(100)))
            return Number(value)
        if tok.kind == "sym" and tok.text == "(":
            self.i += 1
            node = self.expr()
            closing = self.peek()
            if closing is None or closing.text != ")":
                pos = closing.pos if closing else self.end_pos
                raise ParseError("unbalanced parenthesis", pos, expected="')'")
            self.i += 1
            return node
        if tok.kind == "ident":
            raise ParseError(
                f"variable {tok.text!r} may appear only as the equation head",
                tok.pos,
            )
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos, expected="a number or '('")


def parse_infix(text: str) -> Equation:
    """Parse ``<ident> = <expr>`` or a bare ``<expr>`` (unknown defaults to "x").

    Grammar: integer/decimal literals (optional ``%`` suffix, desugared to
    ``value/100``), the four binary operators with standard precedence and
    left associativity, unary minus, and parentheses. Multiplication is
    never implicit.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input", 0, expected="an expression")
    unknown = "x"
    if (
        tokens[0].kind == "ident"
        and len(tokens) > 1
        and tokens[1].kind == "sym"
        and tokens[1].text == "="
    ):
        unknown = tokens[0].text
        tokens = tokens[2:]
    parser = _InfixParser(tokens, end_pos=len(text))
    rhs = parser.expr()
    leftover = parser.peek()
    if leftover is not None:
        raise ParseError(
            f"unexpected token {leftover.text!r}", leftover.pos, expected="end of input"
        )
    return Equation(unknown, rhs)


def _prec(e: Expr) -> int:
    if isinstance(e, Number):
        # Non-terminating rationals render as "p/q", which behaves like a
        # division when re-read; give them multiplicative precedence so the
        # emitted parentheses keep the value intact.
        return _PREC_ATOM if _is_plain_numeral(e.value) else _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    return _PREC_ADD if e.op in "+-" else _PREC_MUL


def _is_plain_numeral(value: Fraction) -> bool:
    return "/" not in format_rational(value)


def render_infix(e: Expr) -> str:
    """Canonical infix text: no spaces, parentheses only where precedence
    or left-associativity demands them. ``parse_infix(render_infix(e))``
    reproduces ``e`` structurally whenever every Number leaf is a
    non-negative integer or terminating decimal."""
    if isinstance(e, Number):
        return format_rational(e.value)
    if isinstance(e, Neg):
        inner = render_infix(e.child)
        if _prec(e.child) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    prec = _prec(e)
    left = render_infix(e.left)
    if _prec(e.left) < prec:
        left = f"({left})"
    right = render_infix(e.right)
    if _prec(e.right) <= prec:
        right = f"({right})"
    return f"{left}{e.op}{right}"


def render_equation(eq: Equation) -> str:
    return f"{eq.unknown} = {render_infix(eq.rhs)}"


def to_prefix(e: Expr) -> str:
    """Space-separated pre-order traversal; parenthesis-free. Unary minus
    is rewritten as ``0 - child`` so the token grammar stays purely binary."""
    parts: list[str] = []

    def walk(node: Expr) -> None:
        if isinstance(node, Number):
            parts.append(format_rational(node.value))
        elif isinstance(node, Neg):
            parts.extend(("-", "0"))
            walk(node.child)
        else:
            parts.append(node.op)
            walk(node.left)
            walk(node.right)

    walk(e)
    return " ".join(parts)


def parse_prefix(text: str) -> Expr:
    """Parse a whitespace-separated Polish-notation token stream."""
    tokens = text.split()
    pos = 0

    def node() -> Expr:
        nonlocal pos
        if pos >= len(tokens):
            raise ArityUnderflowError("operator is missing operands", pos)
        tok = tokens[pos]
        pos += 1
        if tok in OPERATORS:
            left = node()
            right = node()
            return BinOp(tok, left, right)
        try:
            return Number(Fraction(tok))
        except (ValueError, ZeroDivisionError):
            raise BadTokenError(f"unrecognized token {tok!r}", pos - 1) from None

    if not tokens:
        raise ArityUnderflowError("empty input", 0, expected="a token")
    root = node()
    if pos != len(tokens):
        raise TrailingTokensError(
            f"{len(tokens) - pos} tokens remain after a complete expression", pos
        )
    return root


def evaluate(e: Expr) -> Fraction:
    """Exact recursive evaluation."""
    if isinstance(e, Number):
        return e.value
    if isinstance(e, Neg):
        return -evaluate(e.child)
    left = evaluate(e.left)
    right = evaluate(e.right)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if right == 0:
        raise DivisionByZeroError(render_infix(e))
    return left / right


def _coerce(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"non-finite value {value!r}")
    return Fraction(value)


def numeric_equal(a, b, rel_tol=DEFAULT_REL_TOL) -> bool:
    """True iff ``|a - b| <= rel_tol * max(1, |b|)``, computed in exact
    rational arithmetic. Accepts Fractions, ints, floats, and Decimals;
    non-finite floats never compare equal."""
    tol = Fraction(rel_tol)
    if tol < 0:
        raise ValueError("rel_tol must be >= 0")
    try:
        fa = _coerce(a)
        fb = _coerce(b)
    except (ValueError, TypeError, OverflowError):
        return False
    if fa == fb:
        return True
    return abs(fa - fb) <= tol * max(Fraction(1), abs(fb))
