"""Per-view grading of model predictions against gold answers.

Each view is judged by its own semantics: equations are parsed and
evaluated, tree traversals are parsed as prefix token streams, and
chain-of-thought text goes through final-answer extraction. Malformed
model output is a graded failure, never a crash.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable, Iterator

from .cot import ExtractionConfig, DEFAULT_CONFIG, NoAnswerFoundError, final_answer_with_source
from .dataset import ProblemRecord
from .expr import (
    DEFAULT_REL_TOL,
    DivisionByZeroError,
    ExprError,
    evaluate,
    numeric_equal,
    parse_infix,
    parse_prefix,
)
from .views import KIND_EQN, KIND_TREE, View, parse_view

FAILURE_PARSE = "ParseFailure"
FAILURE_EVAL = "EvalFailure"
FAILURE_NO_ANSWER = "NoAnswerFound"
FAILURE_WRONG_VALUE = "WrongValue"


class UnknownProblemError(Exception):
    def __init__(self, problem_id: str):
        self.problem_id = problem_id
        super().__init__(f"prediction references unknown problem {problem_id!r}")


@dataclass(frozen=True)
class Prediction:
    problem_id: str
    view: View
    generated_text: str


@dataclass(frozen=True)
class Verdict:
    correct: bool
    extracted_value: Fraction | None = None
    failure: str | None = None
    answer_source: str | None = None


@dataclass(frozen=True)
class GradeConfig:
    rel_tol: Fraction = DEFAULT_REL_TOL
    extraction: ExtractionConfig = DEFAULT_CONFIG


def _first_parseable_line(text: str, parse) -> tuple[Fraction | None, str | None]:
    """Evaluate the first line that parses; returns (value, failure)."""
    parsed = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            parsed = parse(line)
        except ExprError:
            continue
        break
    if parsed is None:
        return None, FAILURE_PARSE
    try:
        return evaluate(parsed), None
    except DivisionByZeroError:
        return None, FAILURE_EVAL


def grade_prediction(
    pred: Prediction, gold_record: ProblemRecord, config: GradeConfig = GradeConfig()
) -> Verdict:
    """Judge one prediction under its view's semantics. An equation
    prediction may include or omit the ``x =`` head; a multi-line
    prediction is graded on its first parseable line."""
    source = None
    if pred.view.kind == KIND_EQN:
        value, failure = _first_parseable_line(pred.generated_text, lambda s: parse_infix(s).rhs)
    elif pred.view.kind == KIND_TREE:
        value, failure = _first_parseable_line(pred.generated_text, parse_prefix)
    else:
        try:
            value, source = final_answer_with_source(pred.generated_text, config.extraction)
            failure = None
        except NoAnswerFoundError:
            value, failure = None, FAILURE_NO_ANSWER
    if failure is not None:
        return Verdict(False, None, failure)
    if numeric_equal(value, gold_record.gold_answer, config.rel_tol):
        return Verdict(True, value, None, source)
    return Verdict(False, value, FAILURE_WRONG_VALUE, source)


@dataclass(frozen=True)
class Cell:
    n: int = 0
    n_correct: int = 0

    def add(self, verdict: Verdict) -> "Cell":
        return Cell(self.n + 1, self.n_correct + (1 if verdict.correct else 0))

    def combined(self, other: "Cell") -> "Cell":
        return Cell(self.n + other.n, self.n_correct + other.n_correct)

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n if self.n else 0.0


@dataclass
class GradeReport:
    """Counts per (dataset, view tag) cell; merge sums componentwise, so
    partial reports from parallel workers combine losslessly."""

    cells: dict[tuple[str, str], Cell] = field(default_factory=dict)

    def add(self, dataset: str, view: View, verdict: Verdict) -> None:
        key = (dataset, view.tag)
        self.cells[key] = self.cells.get(key, Cell()).add(verdict)

    def merge(self, other: "GradeReport") -> "GradeReport":
        merged = GradeReport(dict(self.cells))
        for key, cell in other.cells.items():
            merged.cells[key] = merged.cells.get(key, Cell()).combined(cell)
        return merged

    def accuracy(self, dataset: str, view_tag: str) -> float:
        return self.cells[(dataset, view_tag)].accuracy

    def to_dict(self) -> dict:
        out = {"cells": []}
        for (dataset, view_tag), cell in sorted(self.cells.items()):
            out["cells"].append(
                {
                    "dataset": dataset,
                    "view": view_tag,
                    "n": cell.n,
                    "n_correct": cell.n_correct,
                    "accuracy": cell.accuracy,
                }
            )
        return out


def aggregate(verdicts: Iterable[tuple[str, View, Verdict]]) -> GradeReport:
    report = GradeReport()
    for dataset, view, verdict in verdicts:
        report.add(dataset, view, verdict)
    return report


def read_predictions(fh: IO[str]) -> Iterator[Prediction]:
    """Read line-delimited ``{id, view, text}`` prediction objects."""
    for line_no, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            yield Prediction(str(obj["id"]), parse_view(obj["view"]), str(obj["text"]))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"prediction line {line_no}: {exc}") from exc


def grade_predictions(
    predictions: Iterable[Prediction],
    records_by_id: dict[str, ProblemRecord],
    config: GradeConfig = GradeConfig(),
    config_by_dataset: dict[str, GradeConfig] | None = None,
) -> GradeReport:
    """Grade a prediction stream. ``config_by_dataset`` lets corpora keep
    their reader-profile extraction settings (answer markers, delimiter
    pairs) at grading time."""

    def verdict_stream() -> Iterator[tuple[str, View, Verdict]]:
        for pred in predictions:
            record = records_by_id.get(pred.problem_id)
            if record is None:
                raise UnknownProblemError(pred.problem_id)
            cfg = config
            if config_by_dataset is not None:
                cfg = config_by_dataset.get(record.dataset, config)
            yield record.dataset, pred.view, grade_prediction(pred, record, cfg)

    return aggregate(verdict_stream())
