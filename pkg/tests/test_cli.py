from __future__ import annotations

import json
import subprocess
import sys

import pytest

from golden import COOKIES_COT


def run_cli(*args, stdin: str | None = None, env_extra: dict | None = None):
    import os

    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "mint", *args],
        input=stdin,
        capture_output=True,
        text=True,
        env=env,
    )


@pytest.fixture(scope="module")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "corpus.jsonl"
    result = run_cli("gen", "--n", "30", "--seed", "4", "--out", str(path))
    assert result.returncode == 0, result.stderr
    return path


class TestTransform:
    def test_eqn_to_tree(self):
        result = run_cli("transform", "--from", "eqn", "--to", "tree",
                         stdin="x = 12*(4*2)/16\n")
        assert result.returncode == 0
        assert result.stdout == "/ * 12 * 4 2 16\n"

    def test_cot_to_eqn(self):
        result = run_cli("transform", "--from", "cot", "--to", "eqn", stdin=COOKIES_COT)
        assert result.returncode == 0
        assert result.stdout == "x = 12*(4*2)/16\n"

    def test_cot_to_tree(self):
        result = run_cli("transform", "--from", "cot", "--to", "tree", stdin=COOKIES_COT)
        assert result.stdout == "/ * 12 * 4 2 16\n"

    def test_tree_to_eqn(self):
        result = run_cli("transform", "--from", "tree", "--to", "eqn",
                         stdin="/ * 12 * 4 2 16\n")
        assert result.stdout == "x = 12*(4*2)/16\n"

    def test_multiple_lines(self):
        result = run_cli("transform", "--from", "eqn", "--to", "tree",
                         stdin="x = 1+2\n\nx = 3*4\n")
        assert result.stdout == "+ 1 2\n* 3 4\n"

    def test_file_flags(self, tmp_path):
        src = tmp_path / "in.txt"
        dst = tmp_path / "out.txt"
        src.write_text("x = (3+4)*2\n")
        result = run_cli("transform", "--from", "eqn", "--to", "tree",
                         "--in", str(src), "--out", str(dst))
        assert result.returncode == 0
        assert dst.read_text() == "* + 3 4 2\n"


class TestExitCodes:
    def test_usage_error_is_2(self):
        result = run_cli("transform", "--from", "bogus", "--to", "tree")
        assert result.returncode == 2
        assert '"UsageError"' in result.stderr

    def test_data_error_is_3(self):
        result = run_cli("transform", "--from", "eqn", "--to", "tree", stdin="x = 1 +\n")
        assert result.returncode == 3
        assert '"DataError"' in result.stderr

    def test_io_error_is_4(self):
        result = run_cli("transform", "--from", "eqn", "--to", "tree",
                         "--in", "/nonexistent/input.txt")
        assert result.returncode == 4
        assert '"IoError"' in result.stderr

    def test_missing_corpus_is_4(self):
        result = run_cli("build", "--corpus", "/nonexistent/corpus.jsonl")
        assert result.returncode == 4

    def test_machine_readable_error_lines_parse(self):
        result = run_cli("transform", "--from", "eqn", "--to", "tree", stdin="garbage$\n")
        error_line = result.stderr.strip().splitlines()[-1]
        payload = json.loads(error_line)
        assert payload["error"] == "DataError"


class TestGen:
    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run_cli("gen", "--n", "40", "--seed", "1", "--out", str(a)).returncode == 0
        assert run_cli("gen", "--n", "40", "--seed", "1", "--out", str(b)).returncode == 0
        assert a.read_bytes() == b.read_bytes()

    def test_streams_to_stdout(self):
        result = run_cli("gen", "--n", "2", "--seed", "9")
        lines = [json.loads(line) for line in result.stdout.splitlines()]
        assert len(lines) == 2 and all("solutions" in obj for obj in lines)


class TestBuildAndStats:
    def test_build_then_stats_conservation(self, corpus_path, tmp_path):
        out = tmp_path / "seqs.jsonl"
        result = run_cli("build", "--corpus", str(corpus_path), "--out", str(out))
        assert result.returncode == 0, result.stderr
        stats = run_cli("stats", "--in", str(out))
        payload = json.loads(stats.stdout)
        # synthetic records hold all three clean views
        assert payload["sequences"] == 90
        assert payload["by_view"] == {"cot_clean": 30, "eqn": 30, "tree": 30}
        assert payload["span_violations"] == 0

    def test_views_selection(self, corpus_path, tmp_path):
        out = tmp_path / "seqs.jsonl"
        run_cli("build", "--corpus", str(corpus_path), "--views", "eqn,tree",
                "--out", str(out))
        payload = json.loads(run_cli("stats", "--in", str(out)).stdout)
        assert payload["by_view"] == {"eqn": 30, "tree": 30}

    def test_workers_do_not_change_output(self, corpus_path, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_cli("build", "--corpus", str(corpus_path), "--out", str(a))
        run_cli("build", "--corpus", str(corpus_path), "--workers", "4", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_custom_instructions(self, corpus_path, tmp_path):
        instructions = tmp_path / "instructions.json"
        instructions.write_text(json.dumps({"tree": "\nTREE NOW:"}))
        out = tmp_path / "seqs.jsonl"
        run_cli("build", "--corpus", str(corpus_path), "--views", "tree",
                "--instructions", str(instructions), "--out", str(out))
        first = json.loads(out.read_text().splitlines()[0])
        assert "\nTREE NOW:" in first["text"]

    def test_sequence_records_have_contract_fields(self, corpus_path, tmp_path):
        out = tmp_path / "seqs.jsonl"
        run_cli("build", "--corpus", str(corpus_path), "--out", str(out))
        first = json.loads(out.read_text().splitlines()[0])
        assert list(first) == ["id", "dataset", "view", "text",
                               "answer_char_start", "answer_char_end",
                               "language", "provenance"]
        start, end = first["answer_char_start"], first["answer_char_end"]
        assert 0 <= start <= end <= len(first["text"])


class TestGrade:
    def test_gold_self_grading(self, corpus_path, tmp_path):
        preds = tmp_path / "preds.jsonl"
        with open(corpus_path) as fh, open(preds, "w") as out:
            for line in fh:
                obj = json.loads(line)
                for view, text in obj["solutions"].items():
                    out.write(json.dumps({"id": obj["id"], "view": view, "text": text}) + "\n")
        report_path = tmp_path / "report.json"
        result = run_cli("grade", "--pred", str(preds), "--corpus", str(corpus_path),
                         "--report", str(report_path))
        assert result.returncode == 0, result.stderr
        report = json.loads(report_path.read_text())
        assert report["cells"], "report has cells"
        for cell in report["cells"]:
            assert cell["accuracy"] == 1.0
        assert report_path.with_suffix(".txt").exists()
        assert report_path.with_suffix(".png").exists()

    def test_report_streams_to_stdout(self, corpus_path, tmp_path):
        preds = tmp_path / "preds.jsonl"
        obj = json.loads(corpus_path.read_text().splitlines()[0])
        preds.write_text(json.dumps(
            {"id": obj["id"], "view": "eqn", "text": obj["solutions"]["eqn"]}) + "\n")
        result = run_cli("grade", "--pred", str(preds), "--corpus", str(corpus_path))
        payload = json.loads(result.stdout)
        assert payload["cells"][0]["accuracy"] == 1.0

    def test_unknown_problem_id_is_data_error(self, corpus_path, tmp_path):
        preds = tmp_path / "preds.jsonl"
        preds.write_text(json.dumps({"id": "ghost", "view": "eqn", "text": "x = 1"}) + "\n")
        result = run_cli("grade", "--pred", str(preds), "--corpus", str(corpus_path))
        assert result.returncode == 3

    def test_profile_marker_applies_at_grading_time(self, tmp_path):
        # the profile's answer marker must drive CoT grading, not the default
        profiles = tmp_path / "profiles.json"
        profiles.write_text(json.dumps({
            "marked": {"view": "cot_clean", "question": "q", "solution": "s",
                       "answer": "a", "marker": "ANSWER:"}
        }))
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text(json.dumps({"q": "what?", "s": "steps", "a": 7}) + "\n")
        preds = tmp_path / "preds.jsonl"
        preds.write_text(json.dumps({
            "id": "marked-000001", "view": "cot_clean",
            "text": "I guess 3 first, ANSWER: 7",
        }) + "\n")
        result = run_cli("grade", "--pred", str(preds),
                         "--corpus", f"marked:{corpus}", "--profiles", str(profiles))
        assert result.returncode == 0, result.stderr
        payload = json.loads(result.stdout)
        assert payload["cells"][0]["accuracy"] == 1.0  # 7 via marker, not 3


class TestLogging:
    def test_log_level_controls_diagnostics(self, corpus_path):
        quiet = run_cli("build", "--corpus", str(corpus_path),
                        env_extra={"MINT_LOG": "error"})
        noisy = run_cli("build", "--corpus", str(corpus_path),
                        env_extra={"MINT_LOG": "info"})
        assert quiet.returncode == noisy.returncode == 0
        assert len(noisy.stderr) >= len(quiet.stderr)
