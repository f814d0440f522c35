"""Per-view evaluation: greedy generation under each view instruction,
graded through the mint pipeline's grade command."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import torch

from .data import EOS_ID, PAD_ID, Vocab
from .model import CharLM

# Must match the instruction postfixes the sequence file was built with;
# these mirror the mint pipeline defaults and are overridable per call.
DEFAULT_INSTRUCTIONS = {
    "cot_clean": "\nSolve this step by step:",
    "eqn": "\nWrite the solution equation:",
    "tree": "\nWrite the solution tree traversal:",
    "cot_noisy": "\nSolve (unverified source):",
}


def load_eval_corpus(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _generate_chunk(
    model: CharLM, vocab: Vocab, prompts: list[str], max_new: int
) -> list[str]:
    """Greedy decoding with a key/value cache. Prompts are left-padded so
    every row's frontier is the last column; padded columns are masked
    out of attention and pinned to position 0."""
    model.eval()
    encoded = [vocab.encode(p) for p in prompts]
    batch = len(encoded)
    width = max(len(e) for e in encoded)
    limit = model.config.max_len
    max_new = min(max_new, limit - width)
    ids = torch.full((batch, width), PAD_ID, dtype=torch.long)
    pad_lens = []
    for i, row in enumerate(encoded):
        pad = width - len(row)
        pad_lens.append(pad)
        ids[i, pad:] = torch.tensor(row, dtype=torch.long)
    pos_ids = torch.stack(
        [torch.clamp(torch.arange(width) - pad, min=0) for pad in pad_lens]
    )
    bias = torch.full((width, width), float("-inf")).triu(1).expand(batch, 1, -1, -1).clone()
    for i, pad in enumerate(pad_lens):
        bias[i, :, :, :pad] = float("-inf")
        if pad:
            # a fully masked attention row softmaxes to NaN; let pad queries
            # see themselves (their outputs are never read, keys stay finite)
            diag = torch.arange(pad)
            bias[i, 0, diag, diag] = 0.0

    generated: list[list[int]] = [[] for _ in range(batch)]
    finished = [False] * batch
    with torch.no_grad():
        logits, past = model(ids, pos_ids, bias)
        next_tokens = logits[:, -1].argmax(dim=-1)
        for step in range(max_new):
            for i in range(batch):
                token = int(next_tokens[i])
                if not finished[i]:
                    if token == EOS_ID:
                        finished[i] = True
                    else:
                        generated[i].append(token)
            if all(finished):
                break
            column = next_tokens.view(batch, 1)
            col_pos = torch.tensor(
                [[width - pad + step] for pad in pad_lens], dtype=torch.long
            )
            key_len = width + step + 1
            col_bias = torch.zeros((batch, 1, 1, key_len))
            for i, pad in enumerate(pad_lens):
                col_bias[i, :, :, :pad] = float("-inf")
            logits, past = model(column, col_pos, col_bias, past)
            next_tokens = logits[:, -1].argmax(dim=-1)
    return [vocab.decode(row) for row in generated]


def greedy_generate(
    model: CharLM,
    vocab: Vocab,
    prompts: list[str],
    max_new: int,
    batch_size: int = 100,
) -> list[str]:
    out: list[str] = []
    for start in range(0, len(prompts), batch_size):
        out.extend(_generate_chunk(model, vocab, prompts[start : start + batch_size], max_new))
    return out


def generate_predictions(
    model: CharLM,
    vocab: Vocab,
    records: list[dict],
    view_kinds: list[str],
    instructions: dict[str, str] | None = None,
) -> list[dict]:
    """One greedy prediction per (record, view); generation budget follows
    the longest gold solution of that view in the corpus."""
    instructions = instructions or DEFAULT_INSTRUCTIONS
    predictions = []
    for kind in view_kinds:
        postfix = instructions[kind]
        prompts = [record["question"] + postfix for record in records]
        gold_lengths = [
            len(record["solutions"].get(kind, "")) for record in records
        ]
        max_new = min(256, max(gold_lengths) + 32 if any(gold_lengths) else 192)
        texts = greedy_generate(model, vocab, prompts, max_new)
        for record, text in zip(records, texts):
            predictions.append({"id": record["id"], "view": kind, "text": text})
    return predictions


def grade_with_pipeline(
    predictions: list[dict], corpus_path: str | Path, work_dir: str | Path
) -> dict[str, float]:
    """Write predictions and invoke ``mint grade``; returns per-view
    accuracy. Grading semantics live entirely in the pipeline."""
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    preds_path = work_dir / "predictions.jsonl"
    with open(preds_path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps(pred, ensure_ascii=False) + "\n")
    report_path = work_dir / "report.json"
    result = subprocess.run(
        [
            sys.executable, "-m", "mint", "grade",
            "--pred", str(preds_path),
            "--corpus", str(corpus_path),
            "--report", str(report_path),
        ],
        capture_output=True,
        text=True,
    )
    if result.returncode != 0:
        raise RuntimeError(f"mint grade failed: {result.stderr.strip()}")
    report = json.loads(report_path.read_text(encoding="utf-8"))
    accuracy: dict[str, float] = {}
    for cell in report["cells"]:
        accuracy[cell["view"]] = cell["accuracy"]
    return accuracy


def evaluate_per_view(
    model: CharLM,
    vocab: Vocab,
    corpus_path: str | Path,
    view_kinds: list[str],
    work_dir: str | Path,
    instructions: dict[str, str] | None = None,
) -> dict[str, float]:
    records = load_eval_corpus(corpus_path)
    predictions = generate_predictions(model, vocab, records, view_kinds, instructions)
    return grade_with_pipeline(predictions, corpus_path, work_dir)


def render_results_table(rows: dict[str, dict[str, float]]) -> str:
    """Train-view rows against test-view columns."""
    views = sorted({view for accs in rows.values() for view in accs})
    header = ["train views"] + views
    body = []
    for label, accs in rows.items():
        body.append(
            [label] + [f"{100 * accs[v]:.1f}%" if v in accs else "-" for v in views]
        )
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"
