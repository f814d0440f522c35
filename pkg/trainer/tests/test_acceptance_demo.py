"""Trainer acceptance: the mechanism demonstration plus the masking
invariants. Run with ``pytest -s`` to see the per-criterion lines; the
demonstration trains two models and takes several minutes on CPU.
"""

from __future__ import annotations

import subprocess
import sys
import time
from contextlib import contextmanager

import pytest
import torch
from torch.nn import functional as F

from mint.dataset import masked_loss as reference_masked_loss
from mint_trainer.data import load_examples
from mint_trainer.evaluate import evaluate_per_view
from mint_trainer.model import CharLM, ModelConfig
from mint_trainer.train import (
    TrainConfig,
    _collate,
    _masked_ce_sum,
    aligned_token_logits,
    sequence_token_logprobs,
    train,
)

DEMO_BUDGET_SECONDS = 900.0

DEMO = dict(
    epochs=11,
    batch_size=16,
    learning_rate=2e-3,
    lr_schedule="cosine",
    weight_decay=0.0,
    seed=0,
    dim=96,
    layers=3,
    heads=6,
)


@contextmanager
def criterion(name: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name} ({time.perf_counter() - start:.2f}s)", flush=True)


def mint(*args: str) -> None:
    result = subprocess.run(
        [sys.executable, "-m", "mint", *args], capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr


@pytest.fixture(scope="module")
def demo_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo")
    train_corpus = root / "train_corpus.jsonl"
    eval_corpus = root / "eval_corpus.jsonl"
    sequences = root / "train_sequences.jsonl"
    mint("gen", "--n", "2000", "--seed", "1234", "--depth", "2", "--out", str(train_corpus))
    mint("gen", "--n", "200", "--seed", "1235", "--depth", "2", "--out", str(eval_corpus))
    mint("build", "--corpus", str(train_corpus), "--views", "cot,eqn,tree",
         "--out", str(sequences))
    return {"eval": eval_corpus, "sequences": sequences, "root": root}


def test_mechanism_demonstration(demo_data):
    """Multi-view training reaches every view; chain-of-thought-only
    training cannot follow the equation or tree instructions."""
    with criterion("mechanism demonstration: multi-view >= 50% per view, "
                   "single-view < 50% on eqn/tree, within budget"):
        start = time.perf_counter()
        views = ["cot_clean", "eqn", "tree"]

        multi = train(
            demo_data["sequences"],
            TrainConfig(views_included=("cot_clean", "eqn", "tree"), **DEMO),
        )
        multi_acc = evaluate_per_view(
            multi.model, multi.vocab, demo_data["eval"], views,
            demo_data["root"] / "eval_multi",
        )
        print(f"  multi-view accuracy: {multi_acc}", flush=True)

        cot_only = train(
            demo_data["sequences"],
            TrainConfig(views_included=("cot_clean",), **{**DEMO, "epochs": 4}),
        )
        cot_acc = evaluate_per_view(
            cot_only.model, cot_only.vocab, demo_data["eval"], views,
            demo_data["root"] / "eval_cot_only",
        )
        print(f"  cot-only accuracy:   {cot_acc}", flush=True)

        elapsed = time.perf_counter() - start
        for view in views:
            assert multi_acc[view] >= 0.5, f"multi-view model below bar on {view}"
        assert cot_acc["eqn"] < 0.5, "cot-only model unexpectedly solves eqn view"
        assert cot_acc["tree"] < 0.5, "cot-only model unexpectedly solves tree view"
        assert elapsed <= DEMO_BUDGET_SECONDS, f"demonstration took {elapsed:.0f}s"


def test_mask_gradient_zero(demo_data):
    """Gradients of the answer loss w.r.t. every pre-answer prediction
    are exactly zero."""
    with criterion("mask-gradient zero: |grad| < 1e-12 before the answer span"):
        examples, vocab = load_examples(demo_data["sequences"], ("eqn",))
        torch.manual_seed(3)
        model = CharLM(ModelConfig(vocab_size=vocab.size, dim=48, layers=2, heads=4))
        for example in examples[:16]:
            ids = list(example.ids)
            aligned = aligned_token_logits(model, ids)
            aligned.retain_grad()
            start, end = example.loss_span
            loss = F.cross_entropy(
                aligned[start:end], torch.tensor(ids[start:end]), reduction="sum"
            )
            loss.backward()
            assert float(aligned.grad[:start].abs().max()) < 1e-12
            assert float(aligned.grad[start:end].abs().max()) > 0


def test_loss_oracle_equality(demo_data):
    """The trainer's batch loss equals the pipeline's reference masked
    loss on the same log-probabilities."""
    with criterion("loss oracle: trainer batch loss == reference masked_loss (1e-5)"):
        examples, vocab = load_examples(demo_data["sequences"], ("cot_clean", "tree"))
        torch.manual_seed(4)
        model = CharLM(ModelConfig(vocab_size=vocab.size, dim=48, layers=2, heads=4))
        model.double()
        batch = examples[:12]
        ids, mask = _collate(batch)
        batch_loss, _ = _masked_ce_sum(model, ids, mask)
        oracle = sum(
            reference_masked_loss(
                sequence_token_logprobs(model, list(e.ids)), e.loss_span
            )
            for e in batch
        )
        assert abs(float(batch_loss.detach()) - oracle) < 1e-5
