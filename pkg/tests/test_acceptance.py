"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with ``pytest -s tests/test_acceptance.py`` to see
them). Criteria are property- and oracle-based with stated time budgets.
"""

from __future__ import annotations

import json
import random
import struct
import subprocess
import sys
import time
from contextlib import contextmanager

import pytest

from golden import COOKIES_COT
from helpers import random_expr, stack_machine_eval
from mint.corpus import CANONICAL_PROFILE, read_corpus
from mint.cot import compose_equation, extract_annotations, final_answer
from mint.dataset import masked_loss
from mint.expr import (
    DivisionByZeroError,
    evaluate,
    parse_infix,
    parse_prefix,
    render_equation,
    render_infix,
    to_prefix,
)
from mint.views import COT_CLEAN, EQN, TREE


@contextmanager
def criterion(name: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name} ({time.perf_counter() - start:.2f}s)", flush=True)


def run_cli(*args) -> subprocess.CompletedProcess:
    result = subprocess.run(
        [sys.executable, "-m", "mint", *args], capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr
    return result


@pytest.fixture(scope="module")
def expression_sample():
    rng = random.Random(987654321)
    return [random_expr(rng, 6) for _ in range(10_000)]


def test_golden_triplet():
    with criterion("golden triplet: CoT -> EQN -> TREE, all views equal 6"):
        start = time.perf_counter()
        annotations, diagnostics = extract_annotations(COOKIES_COT)
        assert diagnostics == []
        equation = compose_equation(annotations)
        assert render_equation(equation) == "x = 12*(4*2)/16"
        tree_text = to_prefix(parse_infix("x = 12*(4*2)/16").rhs)
        assert tree_text == "/ * 12 * 4 2 16"
        assert final_answer(COOKIES_COT) == 6
        assert evaluate(equation.rhs) == 6
        assert evaluate(parse_prefix(tree_text)) == 6
        assert time.perf_counter() - start < 1.0


def test_roundtrip_suite(expression_sample):
    with criterion("roundtrip suite: 10,000 expressions, structural + value exact"):
        start = time.perf_counter()
        evaluated = 0
        for e in expression_sample:
            rendered = render_infix(e)
            assert parse_infix(rendered).rhs == e
            prefix = to_prefix(e)
            assert "(" not in prefix and ")" not in prefix
            try:
                expected = evaluate(e)
            except DivisionByZeroError:
                continue
            evaluated += 1
            assert evaluate(parse_prefix(prefix)) == expected
        assert evaluated > 5_000  # division-by-zero trees are the minority
        assert time.perf_counter() - start < 10.0


def test_evaluator_oracle(expression_sample):
    with criterion("evaluator oracle: recursive == stack machine on 10,000"):
        for e in expression_sample:
            try:
                expected = evaluate(e)
            except DivisionByZeroError:
                with pytest.raises(ZeroDivisionError):
                    stack_machine_eval(to_prefix(e))
                continue
            assert stack_machine_eval(to_prefix(e)) == expected


def test_synthetic_soundness(tmp_path):
    with criterion("synthetic soundness: 1000/1000 compose to gold, self-grade 1.0"):
        start = time.perf_counter()
        corpus_path = tmp_path / "corpus.jsonl"
        run_cli("gen", "--n", "1000", "--seed", "42", "--out", str(corpus_path))
        records, diagnostics = read_corpus(corpus_path, CANONICAL_PROFILE)
        assert diagnostics == [] and len(records) == 1000

        matched = 0
        for record in records:
            annotations, _ = extract_annotations(record.solutions[COT_CLEAN])
            composed = compose_equation(annotations)
            matched += evaluate(composed.rhs) == record.gold_answer
        assert matched == 1000

        preds_path = tmp_path / "preds.jsonl"
        with open(preds_path, "w", encoding="utf-8") as fh:
            for record in records:
                for view, text in record.solutions.items():
                    fh.write(
                        json.dumps(
                            {"id": record.id, "view": view.tag, "text": text},
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
        report_path = tmp_path / "report.json"
        run_cli(
            "grade", "--pred", str(preds_path), "--corpus", str(corpus_path),
            "--report", str(report_path),
        )
        report = json.loads(report_path.read_text())
        assert len(report["cells"]) == 3
        for cell in report["cells"]:
            assert cell["n"] == 1000 and cell["accuracy"] == 1.0
        assert time.perf_counter() - start < 30.0


def test_mask_locality():
    with criterion("mask locality: 1,000 out-of-span perturbations, bitwise equal"):
        rng = random.Random(13)
        logprobs = [rng.uniform(-30.0, 0.0) for _ in range(240)]
        span = (150, 210)
        baseline = masked_loss(logprobs, span)
        baseline_bits = struct.pack("<d", baseline)
        outside = [i for i in range(len(logprobs)) if not span[0] <= i < span[1]]
        for _ in range(1000):
            perturbed = list(logprobs)
            for i in rng.sample(outside, k=rng.randint(1, len(outside))):
                perturbed[i] = rng.uniform(-1e9, 1e9)
            result = masked_loss(perturbed, span)
            assert struct.pack("<d", result) == baseline_bits


def test_determinism(tmp_path):
    with criterion("determinism: gen and build byte-identical, incl. --workers 8"):
        gen_a = tmp_path / "gen_a.jsonl"
        gen_b = tmp_path / "gen_b.jsonl"
        run_cli("gen", "--n", "300", "--seed", "77", "--out", str(gen_a))
        run_cli("gen", "--n", "300", "--seed", "77", "--out", str(gen_b))
        assert gen_a.read_bytes() == gen_b.read_bytes()

        build_outputs = []
        for name, workers in (("w1.jsonl", "1"), ("w8a.jsonl", "8"), ("w8b.jsonl", "8")):
            out = tmp_path / name
            run_cli(
                "build", "--corpus", str(gen_a), "--workers", workers, "--out", str(out)
            )
            build_outputs.append(out.read_bytes())
        assert build_outputs[0] == build_outputs[1] == build_outputs[2]
