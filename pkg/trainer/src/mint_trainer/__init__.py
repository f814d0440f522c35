"""mint-trainer: a desk-scale character-level model that demonstrates
multi-view instruction fine-tuning with an answer-masked loss."""

from .data import EmptyDatasetError, Example, SpanMismatchError, Vocab, load_examples
from .evaluate import evaluate_per_view, greedy_generate, render_results_table
from .model import CharLM, ModelConfig
from .train import (
    TrainConfig,
    TrainResult,
    load_checkpoint,
    save_checkpoint,
    sequence_answer_loss,
    sequence_token_logprobs,
    train,
)

__all__ = [
    "CharLM",
    "EmptyDatasetError",
    "Example",
    "ModelConfig",
    "SpanMismatchError",
    "TrainConfig",
    "TrainResult",
    "Vocab",
    "evaluate_per_view",
    "greedy_generate",
    "load_checkpoint",
    "load_examples",
    "render_results_table",
    "save_checkpoint",
    "sequence_answer_loss",
    "sequence_token_logprobs",
    "train",
]
