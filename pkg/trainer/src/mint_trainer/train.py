"""Training loop with the answer-masked loss.

Only positions whose realized target character lies inside the answer
span (plus the terminator) contribute to the loss, so gradients with
respect to every pre-answer prediction are exactly zero.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.nn import functional as F

from .data import PAD_ID, EmptyDatasetError, Example, Vocab, load_examples
from .model import CharLM, ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    views_included: tuple[str, ...]
    epochs: int = 4
    batch_size: int = 32
    learning_rate: float = 1e-3  # peak
    lr_schedule: str = "cosine"  # "cosine" | "constant"
    warmup_steps: int = 150
    min_learning_rate: float | None = None  # cosine floor; default peak/10
    weight_decay: float = 0.0  # decay fights memorizing the arithmetic facts
    seed: int = 0
    dim: int = 128
    layers: int = 4
    heads: int = 4

    def __post_init__(self):
        if not self.views_included:
            raise ValueError("views_included must not be empty")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")

    def lr_at(self, step: int, total_steps: int) -> float:
        """Warmup, hold at peak for most of training, cosine-decay the
        tail. Holding the peak matters here: the answer-span loss is
        dominated by easy prose early on, and the arithmetic facts only
        start to consolidate later."""
        peak = self.learning_rate
        if self.lr_schedule == "constant":
            return peak
        warmup = min(self.warmup_steps, max(1, total_steps // 10))
        if step < warmup:
            return peak * (step + 1) / warmup
        decay_start = int(total_steps * 0.75)
        if step < decay_start:
            return peak
        floor = self.min_learning_rate if self.min_learning_rate is not None else peak / 10
        frac = (step - decay_start) / max(1, total_steps - decay_start)
        return floor + 0.5 * (peak - floor) * (1 + math.cos(math.pi * frac))


@dataclass
class TrainResult:
    model: CharLM
    vocab: Vocab
    model_config: ModelConfig
    train_config: TrainConfig
    loss_curve: list[float] = field(default_factory=list)


def _collate(batch: list[Example]) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad a batch and build the supervision mask over position columns
    (column ``j`` predicts token ``j+1``)."""
    width = max(len(e.ids) for e in batch)
    ids = torch.full((len(batch), width), PAD_ID, dtype=torch.long)
    mask = torch.zeros((len(batch), width - 1), dtype=torch.bool)
    for i, example in enumerate(batch):
        ids[i, : len(example.ids)] = torch.tensor(example.ids, dtype=torch.long)
        target_start, target_end = example.loss_span
        mask[i, max(target_start, 1) - 1 : target_end - 1] = True
    return ids, mask


def _masked_ce_sum(model: CharLM, ids: torch.Tensor, mask: torch.Tensor):
    """Cross-entropy summed over supervised positions only; unsupervised
    logits never enter the graph."""
    logits, _ = model(ids)
    shifted = logits[:, :-1]
    targets = ids[:, 1:]
    selected_logits = shifted[mask]
    selected_targets = targets[mask]
    loss_sum = F.cross_entropy(selected_logits, selected_targets, reduction="sum")
    return loss_sum, int(mask.sum())


def train(dataset_path: str | Path, config: TrainConfig) -> TrainResult:
    """Fit a character model on the sequence file, backpropagating only
    the answer-span loss. Returns the model plus the per-epoch mean
    masked loss. Zero epochs returns the seeded initialization unchanged."""
    examples, vocab = load_examples(dataset_path, config.views_included)
    if not examples:
        raise EmptyDatasetError(str(dataset_path))
    longest = max(len(e.ids) for e in examples)
    model_config = ModelConfig(
        vocab_size=vocab.size,
        dim=config.dim,
        layers=config.layers,
        heads=config.heads,
        max_len=max(512, (longest + 63) // 64 * 64),
    )
    torch.manual_seed(config.seed)
    model = CharLM(model_config)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )

    # batches hold similar lengths together; their order reshuffles per epoch
    order = sorted(range(len(examples)), key=lambda i: len(examples[i].ids))
    batches = [
        [examples[i] for i in order[pos : pos + config.batch_size]]
        for pos in range(0, len(order), config.batch_size)
    ]
    rng = random.Random(config.seed)
    loss_curve: list[float] = []
    total_steps = config.epochs * len(batches)
    step = 0
    model.train()
    for _ in range(config.epochs):
        rng.shuffle(batches)
        epoch_sum, epoch_count = 0.0, 0
        for batch in batches:
            lr = config.lr_at(step, total_steps)
            for group in optimizer.param_groups:
                group["lr"] = lr
            ids, mask = _collate(batch)
            loss_sum, count = _masked_ce_sum(model, ids, mask)
            (loss_sum / count).backward()
            optimizer.step()
            optimizer.zero_grad(set_to_none=True)
            epoch_sum += float(loss_sum.detach())
            epoch_count += count
            step += 1
        loss_curve.append(epoch_sum / epoch_count)
    return TrainResult(model, vocab, model_config, config, loss_curve)


def aligned_token_logits(model: CharLM, ids: list[int]) -> torch.Tensor:
    """Logits indexed by the token they predict: row ``t`` produces the
    distribution of token ``t`` given tokens ``< t``; row 0 is a zero
    placeholder (the first token is never predicted)."""
    tensor_ids = torch.tensor([ids], dtype=torch.long)
    raw, _ = model(tensor_ids)
    zero_row = torch.zeros(1, raw.size(-1))
    return torch.cat([zero_row, raw[0, :-1]], dim=0)


def sequence_token_logprobs(model: CharLM, ids: list[int]) -> list[float]:
    """Log-probability of each realized token given its prefix; entry 0
    is 0.0 by convention."""
    model.eval()
    with torch.no_grad():
        aligned = aligned_token_logits(model, ids)
        logprobs = aligned.log_softmax(dim=-1)
        picked = logprobs[torch.arange(len(ids)), torch.tensor(ids)]
        out = picked.tolist()
    out[0] = 0.0
    return out


def sequence_answer_loss(model: CharLM, example: Example) -> float:
    """Answer-span loss of one sequence: minus the summed log-probability
    of the answer characters and terminator."""
    logprobs = sequence_token_logprobs(model, list(example.ids))
    start, end = example.loss_span
    return -sum(logprobs[start:end])


def save_checkpoint(result: TrainResult, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(result.model.state_dict(), directory / "model.pt")
    meta = {
        "vocab": result.vocab.to_json(),
        "model_config": result.model_config.to_json(),
        "views_included": list(result.train_config.views_included),
        "seed": result.train_config.seed,
        "loss_curve": result.loss_curve,
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")


def load_checkpoint(directory: str | Path) -> tuple[CharLM, Vocab, dict]:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    vocab = Vocab.from_json(meta["vocab"])
    model = CharLM(ModelConfig.from_json(meta["model_config"]))
    model.load_state_dict(torch.load(directory / "model.pt", weights_only=True))
    model.eval()
    return model, vocab, meta
