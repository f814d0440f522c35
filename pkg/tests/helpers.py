"""Shared test utilities: a seeded random expression generator and an
independent stack-machine evaluator used as an oracle. The oracle
deliberately avoids the package's recursive evaluator so the two can
check each other."""

from __future__ import annotations

import random
from fractions import Fraction

from mint.expr import BinOp, Expr, Neg, Number

# denominators whose reduced forms always render as terminating decimals
_DECIMAL_DENOMS = (2, 4, 5, 8, 10, 20, 25, 100)


def random_expr(rng: random.Random, depth: int, neg_prob: float = 0.15) -> Expr:
    """Random expression of depth <= ``depth`` with non-negative integer or
    terminating-decimal leaves (the shapes infix parsing can produce)."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.3:
            return Number(Fraction(rng.randint(0, 99), rng.choice(_DECIMAL_DENOMS)))
        return Number(Fraction(rng.randint(0, 99)))
    if rng.random() < neg_prob:
        return Neg(random_expr(rng, depth - 1, neg_prob))
    op = rng.choice(("+", "-", "*", "/"))
    return BinOp(op, random_expr(rng, depth - 1, neg_prob), random_expr(rng, depth - 1, neg_prob))


def stack_machine_eval(prefix_text: str) -> Fraction:
    """Evaluate a prefix token stream with an explicit stack, scanning the
    tokens right to left. Raises ZeroDivisionError on a zero divisor."""
    stack: list[Fraction] = []
    for token in reversed(prefix_text.split()):
        if token in ("+", "-", "*", "/"):
            left = stack.pop()
            right = stack.pop()
            if token == "+":
                stack.append(left + right)
            elif token == "-":
                stack.append(left - right)
            elif token == "*":
                stack.append(left * right)
            else:
                stack.append(left / right)
        else:
            stack.append(Fraction(token))
    assert len(stack) == 1, "prefix stream did not reduce to a single value"
    return stack[0]
