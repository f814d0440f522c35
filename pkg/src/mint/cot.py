"""Calculator-annotation extraction from chain-of-thought text, and
composition of the extracted steps into a single equation.

A chain-of-thought solution carries delimited calculator steps such as
``≪4*2=8≫``. Extraction pulls every step out in document order;
composition back-substitutes intermediate results to rebuild the single
equation the steps jointly compute.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .expr import (
    BinOp,
    Equation,
    Expr,
    ExprError,
    Neg,
    Number,
    evaluate,
    format_rational,
    parse_infix,
)


class CotError(Exception):
    pass


class EmptyChainError(CotError):
    pass


class NoAnswerFoundError(CotError):
    pass


@dataclass(frozen=True)
class ExtractionConfig:
    open_delim: str = "≪"
    close_delim: str = "≫"
    final_answer_pattern: str | None = None

    def __post_init__(self):
        if not self.open_delim or not self.close_delim:
            raise ValueError("annotation delimiters must be non-empty")
        if self.open_delim == self.close_delim:
            raise ValueError("annotation delimiters must be distinct")


DEFAULT_CONFIG = ExtractionConfig()
ASCII_CONFIG = ExtractionConfig(open_delim="<<", close_delim=">>")


@dataclass(frozen=True)
class CalcAnnotation:
    """One extracted ``lhs = result`` calculator step.

    ``char_span`` covers the whole delimited region (delimiters included);
    ``consistent`` records whether ``evaluate(lhs)`` really equals
    ``result`` (noisy data may violate it)."""

    lhs: Expr
    result: Fraction
    char_span: tuple[int, int]
    ordinal: int
    consistent: bool


@dataclass(frozen=True)
class RegionDiagnostic:
    char_span: tuple[int, int]
    reason: str


# Numerals as they appear in prose: optional sign, thousands commas,
# decimals, percent suffix.
_PROSE_NUMBER_RE = re.compile(r"-?\d+(?:,\d{3})*(?:\.\d+)?%?")


def parse_prose_number(text: str) -> Fraction:
    """Exact value of a prose numeral ("1,200", "6.5", "50%")."""
    text = text.strip().replace(",", "")
    if text.endswith("%"):
        return Fraction(text[:-1]) / 100
    return Fraction(text)


def extract_annotations(
    cot_text: str, config: ExtractionConfig = DEFAULT_CONFIG
) -> tuple[list[CalcAnnotation], list[RegionDiagnostic]]:
    """Pull every ``open…close`` calculator region out of ``cot_text`` in
    document order. Regions that fail to parse become diagnostics, never
    exceptions."""
    annotations: list[CalcAnnotation] = []
    diagnostics: list[RegionDiagnostic] = []
    pos = 0
    ordinal = 0
    while (start := cot_text.find(config.open_delim, pos)) >= 0:
        inner_start = start + len(config.open_delim)
        close = cot_text.find(config.close_delim, inner_start)
        if close < 0:
            diagnostics.append(
                RegionDiagnostic((start, len(cot_text)), "unterminated annotation region")
            )
            break
        region_end = close + len(config.close_delim)
        pos = region_end
        inner = cot_text[inner_start:close]
        if "=" not in inner:
            diagnostics.append(RegionDiagnostic((start, region_end), "region has no '='"))
            continue
        lhs_text, result_text = inner.rsplit("=", 1)
        try:
            lhs = parse_infix(lhs_text).rhs
        except ExprError as exc:
            diagnostics.append(
                RegionDiagnostic((start, region_end), f"unparseable left side: {exc}")
            )
            continue
        try:
            result = parse_prose_number(result_text)
        except (ValueError, ZeroDivisionError):
            diagnostics.append(
                RegionDiagnostic(
                    (start, region_end), f"result {result_text.strip()!r} is not a number"
                )
            )
            continue
        try:
            consistent = evaluate(lhs) == result
        except ExprError:
            consistent = False
        annotations.append(
            CalcAnnotation(lhs, result, (start, region_end), ordinal, consistent)
        )
        ordinal += 1
    return annotations, diagnostics


def compose_equation(
    annotations: list[CalcAnnotation],
    *,
    question_text: str | None = None,
    strict: bool = False,
    unknown: str = "x",
) -> Equation:
    """Rebuild a single equation from a document-ordered annotation chain.

    Starting from the final step's expression, every Number operand whose
    value matches an earlier step's result is replaced by that step's
    expression (most recent earlier match wins), recursively. Inside a
    substituted expression only strictly earlier steps are eligible, so a
    step whose output equals one of its own inputs cannot loop.

    In strict mode a numeral is left alone when its canonical text also
    occurs in ``question_text`` (a question-given quantity, not an
    intermediate result).
    """
    if not annotations:
        raise EmptyChainError("no calculator annotations to compose")
    chain = annotations

    def blocked(value: Fraction) -> bool:
        if not strict or question_text is None:
            return False
        pattern = rf"(?<![\d.]){re.escape(format_rational(value))}(?![\d.])"
        return re.search(pattern, question_text) is not None

    def substitute(expr: Expr, upto: int) -> Expr:
        if isinstance(expr, Number):
            if not blocked(expr.value):
                for j in range(upto - 1, -1, -1):
                    if chain[j].result == expr.value:
                        return substitute(chain[j].lhs, j)
            return expr
        if isinstance(expr, Neg):
            return Neg(substitute(expr.child, upto))
        return BinOp(expr.op, substitute(expr.left, upto), substitute(expr.right, upto))

    return Equation(unknown, substitute(chain[-1].lhs, len(chain) - 1))


def final_answer_with_source(
    cot_text: str, config: ExtractionConfig = DEFAULT_CONFIG
) -> tuple[Fraction, str]:
    """Extract the final numeric answer and report which rule found it:
    ``marker`` (first number after the configured pattern), ``annotation``
    (last calculator step), or ``last_numeral``."""
    if config.final_answer_pattern:
        idx = cot_text.find(config.final_answer_pattern)
        if idx >= 0:
            m = _PROSE_NUMBER_RE.search(cot_text, idx + len(config.final_answer_pattern))
            if m:
                return parse_prose_number(m.group(0)), "marker"
    annotations, _ = extract_annotations(cot_text, config)
    if annotations:
        return annotations[-1].result, "annotation"
    last = None
    for m in _PROSE_NUMBER_RE.finditer(cot_text):
        last = m
    if last is not None:
        return parse_prose_number(last.group(0)), "last_numeral"
    raise NoAnswerFoundError("text contains no number")


def final_answer(cot_text: str, config: ExtractionConfig = DEFAULT_CONFIG) -> Fraction:
    return final_answer_with_source(cot_text, config)[0]
