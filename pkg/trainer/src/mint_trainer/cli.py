"""Trainer command line: ``train`` fits a model on a sequence file,
``eval`` measures per-view accuracy of a saved model, ``demo`` runs the
whole multi-view-versus-single-view experiment from scratch."""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

from .evaluate import (
    DEFAULT_INSTRUCTIONS,
    evaluate_per_view,
    render_results_table,
)
from .train import TrainConfig, load_checkpoint, save_checkpoint, train


_VIEW_ALIASES = {"cot": "cot_clean", "noisy": "cot_noisy"}


def _parse_views(text: str) -> tuple[str, ...]:
    views = []
    for token in text.split(","):
        token = token.strip().lower()
        if token:
            views.append(_VIEW_ALIASES.get(token, token))
    return tuple(views)


def _load_instructions(path: str | None) -> dict[str, str]:
    instructions = dict(DEFAULT_INSTRUCTIONS)
    if path:
        instructions.update(json.loads(Path(path).read_text(encoding="utf-8")))
    return instructions


def _cmd_train(args) -> int:
    config = TrainConfig(
        views_included=_parse_views(args.views),
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        lr_schedule=args.schedule,
        seed=args.seed,
        dim=args.dim,
        layers=args.layers,
        heads=args.heads,
    )
    start = time.perf_counter()
    result = train(args.data, config)
    save_checkpoint(result, args.out)
    print(
        f"trained on {args.data} views={','.join(config.views_included)} "
        f"epochs={config.epochs} in {time.perf_counter() - start:.0f}s",
        file=sys.stderr,
    )
    for epoch, loss in enumerate(result.loss_curve, start=1):
        print(f"epoch {epoch}: mean masked loss {loss:.4f}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    model, vocab, meta = load_checkpoint(args.model)
    instructions = _load_instructions(args.instructions)
    views = list(_parse_views(args.views)) if args.views else ["cot_clean", "eqn", "tree"]
    accuracy = evaluate_per_view(
        model, vocab, args.corpus, views, args.out, instructions
    )
    label = "+".join(meta.get("views_included", ["?"]))
    table = render_results_table({label: accuracy})
    Path(args.out, "accuracy.json").write_text(
        json.dumps({"train_views": label, "accuracy": accuracy}, indent=2),
        encoding="utf-8",
    )
    Path(args.out, "accuracy.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def _mint(*args: str) -> None:
    result = subprocess.run(
        [sys.executable, "-m", "mint", *args], capture_output=True, text=True
    )
    if result.returncode != 0:
        raise RuntimeError(f"mint {' '.join(args)} failed: {result.stderr.strip()}")


def _cmd_demo(args) -> int:
    """End-to-end mechanism demonstration on a synthetic corpus."""
    work = Path(args.out)
    work.mkdir(parents=True, exist_ok=True)
    train_corpus = work / "train_corpus.jsonl"
    eval_corpus = work / "eval_corpus.jsonl"
    sequences = work / "train_sequences.jsonl"
    print("generating synthetic corpora...", file=sys.stderr)
    _mint("gen", "--n", str(args.n_train), "--seed", str(args.seed),
          "--depth", "2", "--out", str(train_corpus))
    _mint("gen", "--n", str(args.n_eval), "--seed", str(args.seed + 1),
          "--depth", "2", "--out", str(eval_corpus))
    _mint("build", "--corpus", str(train_corpus),
          "--views", "cot,eqn,tree", "--out", str(sequences))

    results: dict[str, dict[str, float]] = {}
    for label, views, epochs in (
        ("cot_clean+eqn+tree", ("cot_clean", "eqn", "tree"), args.epochs),
        ("cot_clean", ("cot_clean",), max(2, args.epochs // 3)),
    ):
        config = TrainConfig(
            views_included=views,
            epochs=epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            lr_schedule=args.schedule,
            seed=args.seed,
            dim=args.dim,
            layers=args.layers,
            heads=args.heads,
        )
        print(f"training [{label}] ...", file=sys.stderr)
        start = time.perf_counter()
        result = train(sequences, config)
        print(
            f"  {time.perf_counter() - start:.0f}s, final loss {result.loss_curve[-1]:.4f}",
            file=sys.stderr,
        )
        save_checkpoint(result, work / f"model_{label.replace('+', '_')}")
        results[label] = evaluate_per_view(
            result.model, result.vocab, eval_corpus,
            ["cot_clean", "eqn", "tree"], work / f"eval_{label.replace('+', '_')}",
        )
    table = render_results_table(results)
    (work / "accuracy.json").write_text(json.dumps(results, indent=2), encoding="utf-8")
    (work / "accuracy.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mint-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a mint sequence file")
    p.add_argument("--data", required=True, help="training sequences JSONL")
    p.add_argument("--views", default="cot_clean,eqn,tree")
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--schedule", choices=["cosine", "constant"], default="cosine")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="per-view accuracy of a saved model")
    p.add_argument("--model", required=True, help="checkpoint directory")
    p.add_argument("--corpus", required=True, help="canonical eval corpus JSONL")
    p.add_argument("--views", default=None)
    p.add_argument("--instructions", default=None, help="instruction postfixes JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("demo", help="full multi-view vs single-view experiment")
    p.add_argument("--out", required=True, help="working directory")
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-eval", type=int, default=200)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--epochs", type=int, default=11)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--schedule", choices=["cosine", "constant"], default="cosine")
    p.add_argument("--dim", type=int, default=96)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--heads", type=int, default=6)
    p.set_defaults(func=_cmd_demo)

    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:
    sys.exit(run())


if __name__ == "__main__":
    entry()
