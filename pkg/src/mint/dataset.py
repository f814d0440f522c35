"""Training-sequence construction: view expansion, instruction postfixes,
answer spans, and the reference masked-loss computation.

Each problem is expanded to every view derivable from what it already
holds, then materialized as one ``question + instruction + answer``
sequence per (problem, view) pair. Answer spans are character offsets,
kept tokenizer-agnostic; ``char_span_to_token_span`` bridges to any
tokenizer at training time.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import IO, Iterable, Mapping

from . import cot as cot_mod
from .expr import (
    DEFAULT_REL_TOL,
    ExprError,
    evaluate,
    numeric_equal,
    parse_infix,
    render_equation,
    to_prefix,
)
from .views import (
    COT_CLEAN,
    EQN,
    KIND_COT_CLEAN,
    KIND_COT_NOISY,
    KIND_EQN,
    KIND_TREE,
    TREE,
    View,
    parse_kind,
)

log = logging.getLogger("mint.dataset")

SEQUENCE_FIELDS = (
    "id",
    "dataset",
    "view",
    "text",
    "answer_char_start",
    "answer_char_end",
    "language",
    "provenance",
)


class DatasetError(Exception):
    pass


class MissingInstructionError(DatasetError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"no instruction postfix configured for view {kind!r}")


class SpanOutOfRangeError(DatasetError):
    pass


class IncoherentTokenizationError(DatasetError):
    pass


@dataclass
class ProblemRecord:
    """A question with its gold numeric answer and per-view solutions."""

    id: str
    dataset: str
    language: str
    question: str
    gold_answer: Fraction
    solutions: dict[View, str]
    metadata: dict = field(default_factory=dict)

    @property
    def is_noisy(self) -> bool:
        return any(view.is_noisy for view in self.solutions)

    def view_by_kind(self, kind: str) -> View | None:
        for view in self.solutions:
            if view.kind == kind:
                return view
        return None


@dataclass(frozen=True)
class InstructionSet:
    """View-conditioning postfixes, one per view kind. Distinct views must
    map to distinct strings or the conditioning is ambiguous."""

    postfixes: Mapping[str, str]

    def __post_init__(self):
        for kind in self.postfixes:
            parse_kind(kind)
        values = list(self.postfixes.values())
        if len(set(values)) != len(values):
            raise ValueError("instruction postfixes must be pairwise distinct")

    def for_view(self, view: View) -> str:
        if view.kind not in self.postfixes:
            raise MissingInstructionError(view.kind)
        return self.postfixes[view.kind]

    @property
    def kinds(self) -> set[str]:
        return set(self.postfixes)


# Deliberately non-canonical defaults; override via --instructions.
DEFAULT_INSTRUCTIONS = InstructionSet(
    {
        KIND_COT_CLEAN: "\nSolve this step by step:",
        KIND_EQN: "\nWrite the solution equation:",
        KIND_TREE: "\nWrite the solution tree traversal:",
        KIND_COT_NOISY: "\nSolve (unverified source):",
    }
)


def load_instructions(fh: IO[str]) -> InstructionSet:
    """Read a ``{view kind: postfix}`` JSON object; missing kinds fall back
    to the defaults."""
    raw = json.load(fh)
    postfixes = dict(DEFAULT_INSTRUCTIONS.postfixes)
    for key, value in raw.items():
        postfixes[parse_kind(key)] = str(value)
    return InstructionSet(postfixes)


@dataclass(frozen=True)
class TrainingSequence:
    problem_id: str
    view: View
    text: str
    answer_char_start: int
    answer_char_end: int
    metadata: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ExpandOptions:
    extraction: cot_mod.ExtractionConfig = cot_mod.DEFAULT_CONFIG
    rel_tol: Fraction = DEFAULT_REL_TOL
    strict_substitution: bool = False


def expand_views(record: ProblemRecord, options: ExpandOptions | None = None) -> ProblemRecord:
    """Add every view derivable from the record's existing solutions:
    chain-of-thought yields an equation, an equation yields a tree. Never
    overwrites an existing view, never invents chain-of-thought text, and
    never expands noisy records (their annotations may be wrong). A
    derivation that disagrees with the gold answer is dropped and logged
    in the returned record's metadata."""
    options = options or ExpandOptions()
    solutions = dict(record.solutions)
    provenance = dict(record.metadata.get("provenance", {}))
    for view in solutions:
        provenance.setdefault(view.tag, "original")
    failures = list(record.metadata.get("derivation_failures", []))

    def fail(kind: str, cause: str) -> None:
        failures.append({"view": kind, "cause": cause})
        log.warning("record %s: could not derive %s view: %s", record.id, kind, cause)

    if not record.is_noisy:
        if EQN not in solutions and COT_CLEAN in solutions:
            try:
                annotations, _ = cot_mod.extract_annotations(
                    solutions[COT_CLEAN], options.extraction
                )
                equation = cot_mod.compose_equation(
                    annotations,
                    question_text=record.question,
                    strict=options.strict_substitution,
                )
                value = evaluate(equation.rhs)
                if not numeric_equal(value, record.gold_answer, options.rel_tol):
                    raise DatasetError(
                        f"composed equation evaluates to {value}, gold is {record.gold_answer}"
                    )
                solutions[EQN] = render_equation(equation)
                provenance[EQN.tag] = "derived:cot_clean->eqn"
            except (cot_mod.CotError, ExprError, DatasetError) as exc:
                fail(KIND_EQN, str(exc))
        if TREE not in solutions and EQN in solutions:
            try:
                rhs = parse_infix(solutions[EQN]).rhs
                value = evaluate(rhs)
                if not numeric_equal(value, record.gold_answer, options.rel_tol):
                    raise DatasetError(
                        f"equation evaluates to {value}, gold is {record.gold_answer}"
                    )
                solutions[TREE] = to_prefix(rhs)
                provenance[TREE.tag] = "derived:eqn->tree"
            except (ExprError, DatasetError) as exc:
                fail(KIND_TREE, str(exc))

    metadata = dict(record.metadata)
    metadata["provenance"] = provenance
    if failures:
        metadata["derivation_failures"] = failures
    return replace(record, solutions=solutions, metadata=metadata)


def build_sequences(
    records: Iterable[ProblemRecord],
    instruction_set: InstructionSet = DEFAULT_INSTRUCTIONS,
    selected_views: Iterable[str] | None = None,
) -> list[TrainingSequence]:
    """One sequence per (record, held view) pair, in record order then the
    fixed view order. ``selected_views`` is a set of view kinds; every
    selected kind must have an instruction postfix."""
    if selected_views is None:
        kinds = set(instruction_set.kinds)
    else:
        kinds = {parse_kind(k) for k in selected_views}
        for kind in sorted(kinds):
            if kind not in instruction_set.kinds:
                raise MissingInstructionError(kind)
    sequences: list[TrainingSequence] = []
    for record in records:
        views = sorted(
            (v for v in record.solutions if v.kind in kinds), key=View.sort_key
        )
        for view in views:
            answer = record.solutions[view]
            postfix = instruction_set.for_view(view)
            prompt = record.question + postfix
            sequences.append(
                TrainingSequence(
                    problem_id=record.id,
                    view=view,
                    text=prompt + answer,
                    answer_char_start=len(prompt),
                    answer_char_end=len(prompt) + len(answer),
                    metadata={
                        "dataset": record.dataset,
                        "language": record.language,
                        "provenance": record.metadata.get("provenance", {}).get(
                            view.tag, "original"
                        ),
                    },
                )
            )
    return sequences


def masked_loss(token_logprobs: list[float], answer_token_span: tuple[int, int]) -> float:
    """Reference answer-only loss: minus the sum of the log-probabilities
    whose index lies in ``[start, end)``. Entries outside the span never
    participate, so the result is bitwise-invariant to them."""
    start, end = answer_token_span
    if not (0 <= start <= end <= len(token_logprobs)):
        raise SpanOutOfRangeError(
            f"span ({start}, {end}) out of range for {len(token_logprobs)} entries"
        )
    total = 0.0
    for i in range(start, end):
        total += token_logprobs[i]
    return -total


@dataclass(frozen=True)
class TokenSpan:
    start: int
    end: int
    boundary_straddle: bool = False


def char_span_to_token_span(
    text: str,
    answer_char_span: tuple[int, int],
    token_char_spans: list[tuple[int, int]],
) -> TokenSpan:
    """Smallest token interval whose character extent contains the answer
    span. ``token_char_spans`` must tile ``text`` exactly (ordered,
    non-overlapping, no gaps). If the answer starts strictly inside a
    token, that token is included and ``boundary_straddle`` is set."""
    expected_start = 0
    for i, (s, e) in enumerate(token_char_spans):
        if s != expected_start or e <= s:
            raise IncoherentTokenizationError(
                f"token {i} spans ({s}, {e}), expected to start at {expected_start}"
            )
        expected_start = e
    if expected_start != len(text):
        raise IncoherentTokenizationError(
            f"tokens cover {expected_start} characters, text has {len(text)}"
        )
    a, b = answer_char_span
    if not (0 <= a <= b <= len(text)):
        raise SpanOutOfRangeError(f"answer span ({a}, {b}) outside text of length {len(text)}")
    if a == b:
        t = next(
            (i for i, (_, e) in enumerate(token_char_spans) if e > a),
            len(token_char_spans),
        )
        return TokenSpan(t, t, False)
    start_idx = end_idx = None
    straddle = False
    for i, (s, e) in enumerate(token_char_spans):
        if start_idx is None and s <= a < e:
            start_idx = i
            straddle = s < a
        if s < b <= e:
            end_idx = i + 1
            break
    assert start_idx is not None and end_idx is not None
    return TokenSpan(start_idx, end_idx, straddle)


def sequence_to_dict(seq: TrainingSequence) -> dict:
    return {
        "id": seq.problem_id,
        "dataset": seq.metadata.get("dataset", ""),
        "view": seq.view.tag,
        "text": seq.text,
        "answer_char_start": seq.answer_char_start,
        "answer_char_end": seq.answer_char_end,
        "language": seq.metadata.get("language", ""),
        "provenance": seq.metadata.get("provenance", "original"),
    }


def write_sequences(sequences: Iterable[TrainingSequence], fh: IO[str]) -> int:
    """Emit training sequences as line-delimited JSON with the fixed field
    order; returns the number of lines written."""
    count = 0
    for seq in sequences:
        fh.write(json.dumps(sequence_to_dict(seq), ensure_ascii=False) + "\n")
        count += 1
    return count
