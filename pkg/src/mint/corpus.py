"""Corpus ingestion, the canonical interchange format, and a synthetic
multi-view corpus generator for desk-scale experiments.

Source corpora arrive in heterogeneous line-delimited JSON schemas;
``ReaderProfile`` maps each schema onto ``ProblemRecord`` without code
changes. The canonical format serializes gold answers as exact rational
strings so nothing drifts across the pipeline.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Mapping

from .cot import DEFAULT_CONFIG, CotError, ExtractionConfig, final_answer, parse_prose_number
from .dataset import ProblemRecord
from .expr import (
    BinOp,
    DEFAULT_REL_TOL,
    Equation,
    Expr,
    ExprError,
    Number,
    evaluate,
    format_rational,
    numeric_equal,
    parse_infix,
    parse_prefix,
    render_equation,
    to_prefix,
)
from .views import (
    COT_CLEAN,
    EQN,
    KIND_COT_NOISY,
    KIND_EQN,
    KIND_TREE,
    TREE,
    View,
    parse_kind,
    parse_view,
)

log = logging.getLogger("mint.corpus")


class CorpusError(Exception):
    pass


class FileUnreadableError(CorpusError):
    pass


@dataclass(frozen=True)
class ReadDiagnostic:
    line_no: int
    reason: str


@dataclass(frozen=True)
class ReaderProfile:
    """How to read one corpus schema. ``field_map`` names the source JSON
    keys for ``question`` and ``solution`` (plus optional ``answer`` and
    ``id``); a ``None`` field_map selects the canonical multi-view schema."""

    name: str
    solution_view: View | None
    field_map: Mapping[str, str] | None
    language: str = "en"
    extraction: ExtractionConfig = DEFAULT_CONFIG
    final_answer_marker: str | None = None

    def __post_init__(self):
        if self.field_map is not None:
            missing = {"question", "solution"} - set(self.field_map)
            if missing:
                raise ValueError(f"field_map must cover {sorted(missing)}")
            if self.solution_view is None:
                raise ValueError("a non-canonical profile needs a solution view")

    @property
    def is_canonical(self) -> bool:
        return self.field_map is None

    def answer_extraction(self) -> ExtractionConfig:
        if self.final_answer_marker:
            return replace(self.extraction, final_answer_pattern=self.final_answer_marker)
        return self.extraction


CANONICAL_PROFILE = ReaderProfile("canonical", None, None)

BUILTIN_PROFILES: dict[str, ReaderProfile] = {
    "canonical": CANONICAL_PROFILE,
    "cot": ReaderProfile(
        "cot",
        COT_CLEAN,
        {"question": "question", "solution": "answer"},
        final_answer_marker="####",
    ),
    "equation": ReaderProfile("equation", EQN, {"question": "question", "solution": "equation"}),
    "equation-answer": ReaderProfile(
        "equation-answer",
        EQN,
        {"question": "question", "solution": "equation", "answer": "answer"},
    ),
    "noisy-cot": ReaderProfile(
        "noisy-cot",
        View(KIND_COT_NOISY, "noisy-cot"),
        {"question": "question", "solution": "solution", "answer": "answer"},
    ),
}


def load_profiles(fh: IO[str]) -> dict[str, ReaderProfile]:
    """Read user profiles from a ``{name: {...}}`` JSON object. Recognized
    keys: view, question, solution, answer, id, language, marker, delims."""
    out: dict[str, ReaderProfile] = {}
    for name, raw in json.load(fh).items():
        kind = parse_kind(raw["view"])
        view = View(kind, name) if kind == KIND_COT_NOISY else View(kind)
        field_map = {"question": raw["question"], "solution": raw["solution"]}
        for opt in ("answer", "id"):
            if opt in raw:
                field_map[opt] = raw[opt]
        extraction = DEFAULT_CONFIG
        if "delims" in raw:
            open_delim, close_delim = raw["delims"]
            extraction = ExtractionConfig(open_delim, close_delim)
        out[name] = ReaderProfile(
            name=name,
            solution_view=view,
            field_map=field_map,
            language=raw.get("language", "en"),
            extraction=extraction,
            final_answer_marker=raw.get("marker"),
        )
    return out


def _coerce_answer(value) -> Fraction:
    if isinstance(value, bool):
        raise ValueError("boolean is not a numeric answer")
    if isinstance(value, (int, float)):
        return Fraction(str(value))
    return parse_prose_number(str(value))


def _derive_gold(solution: str, view: View, profile: ReaderProfile) -> Fraction:
    if view.kind == KIND_EQN:
        return evaluate(parse_infix(solution).rhs)
    if view.kind == KIND_TREE:
        return evaluate(parse_prefix(solution))
    return final_answer(solution, profile.answer_extraction())


def _validate_solution(view: View, text: str, gold: Fraction, rel_tol: Fraction) -> str | None:
    """Eqn/Tree solutions must parse and evaluate to the gold answer."""
    try:
        if view.kind == KIND_EQN:
            value = evaluate(parse_infix(text).rhs)
        elif view.kind == KIND_TREE:
            value = evaluate(parse_prefix(text))
        else:
            return None
    except ExprError as exc:
        return f"{view.tag} solution does not parse: {exc}"
    if not numeric_equal(value, gold, rel_tol):
        return f"{view.tag} solution evaluates to {value}, gold is {gold}"
    return None


def _read_canonical_line(obj: dict, rel_tol: Fraction) -> ProblemRecord:
    solutions: dict[View, str] = {}
    for tag, text in obj["solutions"].items():
        solutions[parse_view(tag)] = str(text)
    gold = Fraction(str(obj["gold_answer"]))
    record = ProblemRecord(
        id=str(obj["id"]),
        dataset=str(obj["dataset"]),
        language=str(obj.get("language", "en")),
        question=str(obj["question"]),
        gold_answer=gold,
        solutions=solutions,
    )
    for view, text in solutions.items():
        problem = _validate_solution(view, text, gold, rel_tol)
        if problem:
            raise ValueError(problem)
    return record


def _read_profile_line(
    obj: dict, profile: ReaderProfile, line_no: int, rel_tol: Fraction
) -> ProblemRecord:
    fmap = profile.field_map
    assert fmap is not None and profile.solution_view is not None
    for role in ("question", "solution"):
        if fmap[role] not in obj:
            raise ValueError(f"line is missing the mapped {role!r} key {fmap[role]!r}")
    question = str(obj[fmap["question"]])
    solution = str(obj[fmap["solution"]])
    view = profile.solution_view
    if "answer" in fmap and fmap["answer"] in obj:
        gold = _coerce_answer(obj[fmap["answer"]])
    else:
        try:
            gold = _derive_gold(solution, view, profile)
        except (ExprError, CotError, ValueError) as exc:
            raise ValueError(f"cannot derive a gold answer from the solution: {exc}") from exc
    if not view.is_noisy:
        problem = _validate_solution(view, solution, gold, rel_tol)
        if problem:
            raise ValueError(problem)
    record_id = str(obj[fmap["id"]]) if "id" in fmap and fmap["id"] in obj else (
        f"{profile.name}-{line_no:06d}"
    )
    return ProblemRecord(
        id=record_id,
        dataset=profile.name,
        language=profile.language,
        question=question,
        gold_answer=gold,
        solutions={view: solution},
    )


def read_corpus_lines(
    fh: IO[str], profile: ReaderProfile, rel_tol: Fraction = DEFAULT_REL_TOL
) -> tuple[list[ProblemRecord], list[ReadDiagnostic]]:
    """Read line-delimited JSON under ``profile``. Every input line becomes
    either a record or a diagnostic; nothing is dropped silently."""
    records: list[ProblemRecord] = []
    diagnostics: list[ReadDiagnostic] = []
    seen: set[tuple[str, str]] = set()
    for line_no, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            diagnostics.append(ReadDiagnostic(line_no, "blank line"))
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            if profile.is_canonical:
                record = _read_canonical_line(obj, rel_tol)
            else:
                record = _read_profile_line(obj, profile, line_no, rel_tol)
            if not record.question.strip():
                raise ValueError("question is empty")
            key = (record.dataset, record.id)
            if key in seen:
                raise ValueError(f"duplicate id {record.id!r} in dataset {record.dataset!r}")
            seen.add(key)
            records.append(record)
        except (ValueError, KeyError, ZeroDivisionError) as exc:
            log.warning("%s line %d skipped: %s", profile.name, line_no, exc)
            diagnostics.append(ReadDiagnostic(line_no, str(exc)))
    return records, diagnostics


def read_corpus(
    path: str | Path, profile: ReaderProfile, rel_tol: Fraction = DEFAULT_REL_TOL
) -> tuple[list[ProblemRecord], list[ReadDiagnostic]]:
    try:
        with open(path, encoding="utf-8") as fh:
            return read_corpus_lines(fh, profile, rel_tol)
    except OSError as exc:
        raise FileUnreadableError(f"cannot read corpus {path}: {exc}") from exc


def record_to_dict(record: ProblemRecord) -> dict:
    return {
        "id": record.id,
        "dataset": record.dataset,
        "language": record.language,
        "question": record.question,
        "gold_answer": str(record.gold_answer),
        "solutions": {
            view.tag: record.solutions[view]
            for view in sorted(record.solutions, key=View.sort_key)
        },
    }


def write_canonical(records: Iterable[ProblemRecord], fh: IO[str]) -> int:
    """Write records in the canonical line-delimited JSON format with
    stable key order; returns the count written."""
    count = 0
    for record in records:
        fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")
        count += 1
    return count


# --- synthetic corpus -------------------------------------------------------


@dataclass(frozen=True)
class NarrationTemplate:
    player: str
    opening: str
    question: str
    closing: str  # with a {value} placeholder


DEFAULT_TEMPLATES = (
    NarrationTemplate(
        "Ava", "Ava starts a number round.", "What number does Ava end with?",
        "Ava ends with {value}.",
    ),
    NarrationTemplate(
        "Ben", "Ben plays a calculation game.", "What is Ben's final number?",
        "Ben's final number is {value}.",
    ),
    NarrationTemplate(
        "Mia", "Mia works through a math drill.", "What number does Mia reach?",
        "Mia reaches {value}.",
    ),
    NarrationTemplate(
        "Leo", "Leo runs a number experiment.", "What result does Leo get?",
        "Leo gets {value}.",
    ),
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_problems: int
    rng_seed: int
    max_depth: int = 3
    operand_range: tuple[int, int] = (2, 20)
    templates: tuple[NarrationTemplate, ...] = DEFAULT_TEMPLATES
    # Every intermediate value is kept an integer in [1, max_value]. The
    # default keeps the arithmetic fact space small enough that desk-scale
    # models can learn it from a few thousand problems.
    max_value: int = 10

    def __post_init__(self):
        if self.n_problems <= 0:
            raise ValueError("n_problems must be > 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        lo, hi = self.operand_range
        if not (1 <= lo <= hi):
            raise ValueError("operand_range must satisfy 1 <= lo <= hi")
        if self.max_value < 2 * lo:
            raise ValueError("max_value must admit at least one addition (>= 2*lo)")
        if not self.templates:
            raise ValueError("at least one narration template is required")


class _Resample(Exception):
    pass


_UNCAPPED = 10**9


def _gen_expr(
    rng: random.Random, depth: int, spec: SyntheticSpec, cap: int = _UNCAPPED
) -> tuple[Expr, int]:
    """Random expression whose value is in [1, cap]. Computed nodes also
    respect the global intermediate-value cap; bare leaves only respect
    the operand range. Operators are drawn uniformly and operands are
    sized to fit, which keeps the four operators comparably frequent in
    the corpus (pure rejection would starve addition under a tight cap)."""
    lo, hi = spec.operand_range
    if depth == 0:
        upper = min(hi, cap)
        if upper < lo:
            raise _Resample
        n = rng.randint(lo, upper)
        return Number(n), n
    cap = min(cap, spec.max_value)
    shallow = rng.randint(0, depth - 1)
    if rng.random() < 0.5:
        dl, dr = depth - 1, shallow
    else:
        dl, dr = shallow, depth - 1
    for _ in range(12):
        op = rng.choice(("+", "-", "*", "/"))
        try:
            if op == "+":
                if cap < 2 * lo:
                    continue
                left, lv = _gen_expr(rng, dl, spec, cap - lo)
                right, rv = _gen_expr(rng, dr, spec, cap - lv)
                return BinOp("+", left, right), lv + rv
            if op == "-":
                left, lv = _gen_expr(rng, dl, spec)
                floor = max(lo, lv - cap)
                if dr == 0:
                    upper = min(hi, lv - 1)
                    if floor > upper:
                        continue
                    rv = rng.randint(floor, upper)
                    right: Expr = Number(rv)
                else:
                    right, rv = _gen_expr(rng, dr, spec, lv - 1)
                    if rv < floor:
                        continue
                return BinOp("-", left, right), lv - rv
            if op == "*":
                if cap < lo * lo:
                    continue
                left, lv = _gen_expr(rng, dl, spec, cap // lo)
                right, rv = _gen_expr(rng, dr, spec, cap // lv)
                return BinOp("*", left, right), lv * rv
            # division: divisor chosen last, from the divisors of the
            # dividend, so the quotient is an integer by construction
            left, lv = _gen_expr(rng, dl, spec)
            divisors = [d for d in range(2, hi + 1) if lv % d == 0 and lv // d <= cap]
            if not divisors:
                continue
            d = rng.choice(divisors)
            return BinOp("/", left, Number(d)), lv // d
        except _Resample:
            continue
    raise _Resample


def _op_phrase(op: str, left: str, right: str) -> str:
    if op == "+":
        return f"adds {right} to {left}"
    if op == "-":
        return f"subtracts {right} from {left}"
    if op == "*":
        return f"multiplies {left} by {right}"
    return f"divides {left} by {right}"


_ORDINALS = ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth")


@dataclass(frozen=True)
class _Step:
    op: str
    left_ref: int | None  # step index, or None for a leaf
    right_ref: int | None
    left_value: Fraction
    right_value: Fraction
    result: Fraction


def _plan_steps(root: Expr) -> list[_Step]:
    steps: list[_Step] = []

    def walk(node: Expr) -> tuple[int | None, Fraction]:
        if isinstance(node, Number):
            return None, node.value
        assert isinstance(node, BinOp)
        left_ref, lv = walk(node.left)
        right_ref, rv = walk(node.right)
        result = evaluate(BinOp(node.op, Number(lv), Number(rv)))
        steps.append(_Step(node.op, left_ref, right_ref, lv, rv, result))
        return len(steps) - 1, result

    walk(root)
    return steps


def _ref_text(ref: int | None, value: Fraction, current: int) -> str:
    if ref is None:
        return format_rational(value)
    if ref == current - 1:
        return "that result"
    return f"the {_ORDINALS[ref]} result"


def _connective(i: int, total: int) -> str:
    if i == 0:
        return "First"
    if i == total - 1:
        return "Finally"
    return "Then"


def narrate(template: NarrationTemplate, root: Expr) -> tuple[str, str]:
    """Render an expression tree as (question, annotated chain of thought).

    The question spells the steps out in words; the chain of thought is a
    terse calculator trace, one delimited annotation per step."""
    steps = _plan_steps(root)
    if not steps:
        raise ValueError("cannot narrate a bare number")
    q_parts = [template.opening]
    cot_parts = []
    for i, step in enumerate(steps):
        conn = _connective(i, len(steps))
        q_left = _ref_text(step.left_ref, step.left_value, i)
        q_right = _ref_text(step.right_ref, step.right_value, i)
        q_parts.append(f"{conn}, {template.player} {_op_phrase(step.op, q_left, q_right)}.")
        lv = format_rational(step.left_value)
        rv = format_rational(step.right_value)
        res = format_rational(step.result)
        lhs = f"{lv}{step.op}{rv}"
        cot_parts.append(f"{lhs} = ≪{lhs}={res}≫{res}.")
    q_parts.append(template.question)
    cot_parts.append(template.closing.format(value=format_rational(steps[-1].result)))
    return " ".join(q_parts), " ".join(cot_parts)


def generate_synthetic(spec: SyntheticSpec) -> list[ProblemRecord]:
    """Deterministic under (seed, spec): every problem stores all three
    clean views of a random integer-valued expression tree."""
    rng = random.Random(spec.rng_seed)
    records: list[ProblemRecord] = []
    for i in range(spec.n_problems):
        depth = rng.randint(1, spec.max_depth)
        for _ in range(10_000):
            try:
                tree, _ = _gen_expr(rng, depth, spec)
                break
            except _Resample:
                continue
        else:  # pragma: no cover - the resample loop converges immediately
            raise RuntimeError("synthetic generation failed to converge")
        template = spec.templates[rng.randrange(len(spec.templates))]
        question, cot_text = narrate(template, tree)
        gold = evaluate(tree)
        solutions = {
            COT_CLEAN: cot_text,
            EQN: render_equation(Equation("x", tree)),
            TREE: to_prefix(tree),
        }
        records.append(
            ProblemRecord(
                id=f"synthetic-{i:05d}",
                dataset="synthetic",
                language="en",
                question=question,
                gold_answer=gold,
                solutions=solutions,
                metadata={"provenance": {v.tag: "synthetic" for v in solutions}},
            )
        )
    return records
