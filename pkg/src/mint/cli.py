"""Command-line entry point for batch pipeline operation.

Subcommands: ``transform`` (between solution views), ``build`` (training
sequences), ``grade`` (predictions against gold), ``gen`` (synthetic
corpus), ``stats`` (built-dataset counts). Data goes to files or stdout;
diagnostics go to stderr. Exit codes: 0 success, 2 usage, 3 data
problem, 4 I/O failure. ``MINT_LOG`` controls verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import partial
from pathlib import Path

from . import cot as cot_mod
from . import corpus as corpus_mod
from . import report as report_mod
from .dataset import (
    DEFAULT_INSTRUCTIONS,
    ExpandOptions,
    MissingInstructionError,
    ProblemRecord,
    build_sequences,
    expand_views,
    load_instructions,
    write_sequences,
)
from .expr import (
    DEFAULT_REL_TOL,
    Equation,
    ExprError,
    parse_infix,
    parse_prefix,
    render_equation,
    to_prefix,
)
from .grader import GradeConfig, UnknownProblemError, grade_predictions, read_predictions
from .views import parse_kind

log = logging.getLogger("mint.cli")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class DataError(Exception):
    pass


class OutputError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": "UsageError", "detail": message}), file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _configure_logging() -> None:
    level_name = os.environ.get("MINT_LOG", "warn").lower()
    level = _LOG_LEVELS.get(level_name, logging.WARNING)
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _read_input(path: str | None) -> str:
    if path is None:
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc


def _write_output(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _load_profiles(path: str | None) -> dict[str, corpus_mod.ReaderProfile]:
    profiles = dict(corpus_mod.BUILTIN_PROFILES)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                profiles.update(corpus_mod.load_profiles(fh))
        except OSError as exc:
            raise OutputError(f"cannot read profiles {path}: {exc}") from exc
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise DataError(f"bad profiles file {path}: {exc}") from exc
    return profiles


def _read_corpora(
    specs: list[str], profiles: dict[str, corpus_mod.ReaderProfile], rel_tol: Fraction
) -> tuple[list[ProblemRecord], dict[str, cot_mod.ExtractionConfig]]:
    """Each spec is ``PATH`` (canonical format) or ``PROFILE:PATH``. Also
    returns each dataset's extraction settings for downstream grading."""
    records: list[ProblemRecord] = []
    extraction_by_dataset: dict[str, cot_mod.ExtractionConfig] = {}
    for spec in specs:
        profile = corpus_mod.CANONICAL_PROFILE
        path = spec
        head, sep, rest = spec.partition(":")
        if sep and head in profiles:
            profile, path = profiles[head], rest
        try:
            batch, diagnostics = corpus_mod.read_corpus(path, profile, rel_tol)
        except corpus_mod.FileUnreadableError as exc:
            raise OutputError(str(exc)) from exc
        if diagnostics:
            log.warning("%s: %d of %d lines skipped", path, len(diagnostics),
                        len(batch) + len(diagnostics))
        if not profile.is_canonical:
            extraction_by_dataset[profile.name] = profile.answer_extraction()
        records.extend(batch)
    if not records:
        raise DataError("no readable records in the given corpora")
    return records, extraction_by_dataset


def _parse_delims(text: str) -> cot_mod.ExtractionConfig:
    open_delim, sep, close_delim = text.partition(",")
    if not sep:
        raise DataError("--delims expects OPEN,CLOSE")
    try:
        return cot_mod.ExtractionConfig(open_delim, close_delim)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _cmd_transform(args) -> int:
    text = _read_input(args.infile)
    lines: list[str] = []
    if args.src == "cot":
        config = _parse_delims(args.delims)
        annotations, diagnostics = cot_mod.extract_annotations(text, config)
        for diag in diagnostics:
            log.warning("annotation region %s skipped: %s", diag.char_span, diag.reason)
        try:
            equation = cot_mod.compose_equation(annotations)
        except cot_mod.EmptyChainError as exc:
            raise DataError(str(exc)) from exc
        lines.append(
            render_equation(equation) if args.dst == "eqn" else to_prefix(equation.rhs)
        )
    else:
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                if args.src == "eqn":
                    equation = parse_infix(line)
                else:
                    equation = Equation("x", parse_prefix(line))
            except ExprError as exc:
                raise DataError(f"line {line_no}: {exc}") from exc
            lines.append(
                render_equation(equation) if args.dst == "eqn" else to_prefix(equation.rhs)
            )
    _write_output(args.out, "".join(line + "\n" for line in lines))
    return EXIT_OK


def _cmd_gen(args) -> int:
    spec = corpus_mod.SyntheticSpec(
        n_problems=args.n,
        rng_seed=args.seed,
        max_depth=args.depth,
        operand_range=(args.operand_min, args.operand_max),
        max_value=args.max_value,
    )
    records = corpus_mod.generate_synthetic(spec)
    if args.out is None:
        corpus_mod.write_canonical(records, sys.stdout)
    else:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                count = corpus_mod.write_canonical(records, fh)
        except OSError as exc:
            raise OutputError(f"cannot write {args.out}: {exc}") from exc
        log.info("wrote %d synthetic records to %s", count, args.out)
    return EXIT_OK


def _cmd_build(args) -> int:
    profiles = _load_profiles(args.profiles)
    records, _ = _read_corpora(args.corpus, profiles, args.tol)
    instructions = DEFAULT_INSTRUCTIONS
    if args.instructions:
        try:
            with open(args.instructions, encoding="utf-8") as fh:
                instructions = load_instructions(fh)
        except OSError as exc:
            raise OutputError(f"cannot read instructions {args.instructions}: {exc}") from exc
        except (ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"bad instructions file: {exc}") from exc
    if not args.no_expand:
        options = ExpandOptions(
            rel_tol=args.tol, strict_substitution=args.strict_substitution
        )
        expand = partial(expand_views, options=options)
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                records = list(pool.map(expand, records, chunksize=64))
        else:
            records = [expand(record) for record in records]
    views = None
    if args.views:
        views = [token.strip() for token in args.views.split(",") if token.strip()]
    try:
        sequences = build_sequences(records, instructions, views)
    except (MissingInstructionError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    if args.out is None:
        write_sequences(sequences, sys.stdout)
    else:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                count = write_sequences(sequences, fh)
        except OSError as exc:
            raise OutputError(f"cannot write {args.out}: {exc}") from exc
        log.info("wrote %d training sequences to %s", count, args.out)
    return EXIT_OK


def _cmd_grade(args) -> int:
    profiles = _load_profiles(args.profiles)
    records, extraction_by_dataset = _read_corpora(args.corpus, profiles, args.tol)
    by_id: dict[str, ProblemRecord] = {}
    for record in records:
        if record.id in by_id:
            log.warning("duplicate problem id %s; the later record wins", record.id)
        by_id[record.id] = record
    config = GradeConfig(rel_tol=args.tol)
    config_by_dataset = {
        dataset: GradeConfig(rel_tol=args.tol, extraction=extraction)
        for dataset, extraction in extraction_by_dataset.items()
    }
    try:
        with open(args.pred, encoding="utf-8") as fh:
            grade_report = grade_predictions(
                read_predictions(fh), by_id, config, config_by_dataset
            )
    except OSError as exc:
        raise OutputError(f"cannot read predictions {args.pred}: {exc}") from exc
    except (UnknownProblemError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    payload = json.dumps(grade_report.to_dict(), indent=2, ensure_ascii=False) + "\n"
    if args.report is None:
        sys.stdout.write(payload)
    else:
        report_path = Path(args.report)
        try:
            report_path.write_text(payload, encoding="utf-8")
            report_path.with_suffix(".txt").write_text(
                report_mod.render_table(grade_report), encoding="utf-8"
            )
            report_mod.save_figure(grade_report, report_path.with_suffix(".png"))
        except OSError as exc:
            raise OutputError(f"cannot write report: {exc}") from exc
    total = sum(cell.n for cell in grade_report.cells.values())
    correct = sum(cell.n_correct for cell in grade_report.cells.values())
    log.info("graded %d predictions, %d correct", total, correct)
    return EXIT_OK


def _cmd_stats(args) -> int:
    text = _read_input(args.infile)
    per_cell: dict[tuple[str, str], int] = {}
    per_view: dict[str, int] = {}
    total = 0
    span_violations = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            start, end = int(obj["answer_char_start"]), int(obj["answer_char_end"])
            seq_text = str(obj["text"])
            view = str(obj["view"])
            dataset = str(obj["dataset"])
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise DataError(f"line {line_no}: {exc}") from exc
        total += 1
        per_view[view] = per_view.get(view, 0) + 1
        per_cell[(dataset, view)] = per_cell.get((dataset, view), 0) + 1
        if not (0 <= start <= end <= len(seq_text)):
            span_violations += 1
    out = {
        "sequences": total,
        "by_view": dict(sorted(per_view.items())),
        "by_dataset_view": [
            {"dataset": d, "view": v, "n": n} for (d, v), n in sorted(per_cell.items())
        ],
        "span_violations": span_violations,
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="mint", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="convert a solution between views")
    p.add_argument("--from", dest="src", required=True, choices=["cot", "eqn", "tree"])
    p.add_argument("--to", dest="dst", required=True, choices=["eqn", "tree"])
    p.add_argument("--in", dest="infile", default=None, help="input file (default stdin)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--delims", default="≪,≫",
                   help="calculator annotation delimiters as OPEN,CLOSE")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("build", help="build instruction-postfixed training sequences")
    p.add_argument("--corpus", action="append", required=True, metavar="[PROFILE:]PATH")
    p.add_argument("--profiles", default=None, help="extra reader profiles (JSON)")
    p.add_argument("--instructions", default=None, help="instruction postfixes (JSON)")
    p.add_argument("--views", default=None, help="comma-separated view kinds to emit")
    p.add_argument("--out", default=None, help="output JSONL (default stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-expand", action="store_true", help="skip view expansion")
    p.add_argument("--strict-substitution", action="store_true",
                   help="never substitute numerals that appear in the question")
    p.add_argument("--tol", type=Fraction, default=DEFAULT_REL_TOL)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("grade", help="grade predictions against a gold corpus")
    p.add_argument("--pred", required=True, help="predictions JSONL ({id, view, text})")
    p.add_argument("--corpus", action="append", required=True, metavar="[PROFILE:]PATH")
    p.add_argument("--profiles", default=None)
    p.add_argument("--tol", type=Fraction, default=DEFAULT_REL_TOL)
    p.add_argument("--report", default=None, help="report JSON path (default stdout)")
    p.set_defaults(func=_cmd_grade)

    p = sub.add_parser("gen", help="generate a synthetic multi-view corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--operand-min", type=int, default=2)
    p.add_argument("--operand-max", type=int, default=20)
    p.add_argument("--max-value", type=int, default=10)
    p.add_argument("--out", default=None, help="output JSONL (default stdout)")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("stats", help="summarize a built training dataset")
    p.add_argument("--in", dest="infile", default=None, help="input JSONL (default stdin)")
    p.set_defaults(func=_cmd_stats)

    return parser


def run(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(json.dumps({"error": "DataError", "detail": str(exc)}), file=sys.stderr)
        return EXIT_DATA
    except (OutputError, OSError) as exc:
        print(json.dumps({"error": "IoError", "detail": str(exc)}), file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(json.dumps({"error": "DataError", "detail": str(exc)}), file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(run())


if __name__ == "__main__":
    entry()
