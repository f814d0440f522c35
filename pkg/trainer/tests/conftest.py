from __future__ import annotations

import subprocess
import sys

import pytest
import torch


def mint(*args: str) -> None:
    result = subprocess.run(
        [sys.executable, "-m", "mint", *args], capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr


@pytest.fixture(scope="session")
def small_data(tmp_path_factory):
    """A small synthetic corpus and its built sequence file."""
    root = tmp_path_factory.mktemp("data")
    corpus = root / "corpus.jsonl"
    sequences = root / "sequences.jsonl"
    mint("gen", "--n", "40", "--seed", "99", "--depth", "2", "--out", str(corpus))
    mint("build", "--corpus", str(corpus), "--views", "cot,eqn,tree",
         "--out", str(sequences))
    return {"corpus": corpus, "sequences": sequences}


@pytest.fixture(autouse=True)
def _fixed_threads():
    previous = torch.get_num_threads()
    yield
    torch.set_num_threads(previous)
