"""Loading the training-sequence JSONL emitted by the mint pipeline.

Tokenization is character-level, so the character answer spans in the
records are token spans with no straddle. Every sequence is the answer
suffix of ``question + instruction + answer``; a terminator token is
appended so generation can halt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PAD_ID = 0
EOS_ID = 1
UNK_ID = 2
_RESERVED = 3


class EmptyDatasetError(Exception):
    pass


class SpanMismatchError(Exception):
    pass


@dataclass(frozen=True)
class Vocab:
    chars: tuple[str, ...]

    @classmethod
    def build(cls, texts) -> "Vocab":
        return cls(tuple(sorted(set().union(*map(set, texts)))))

    @property
    def size(self) -> int:
        return len(self.chars) + _RESERVED

    def encode(self, text: str) -> list[int]:
        index = self._index()
        return [index.get(c, UNK_ID) for c in text]

    def decode(self, ids) -> str:
        chars = self.chars
        out = []
        for i in ids:
            if i == EOS_ID:
                break
            if i >= _RESERVED:
                out.append(chars[i - _RESERVED])
        return "".join(out)

    def _index(self) -> dict[str, int]:
        cached = getattr(self, "_cached_index", None)
        if cached is None:
            cached = {c: i + _RESERVED for i, c in enumerate(self.chars)}
            object.__setattr__(self, "_cached_index", cached)
        return cached

    def to_json(self) -> dict:
        return {"chars": "".join(self.chars)}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(tuple(obj["chars"]))


@dataclass(frozen=True)
class Example:
    problem_id: str
    view: str  # view kind, source tag stripped
    ids: tuple[int, ...]  # text characters plus a trailing EOS
    answer_start: int  # first answer character index
    answer_end: int  # == len(text); EOS sits at this index

    @property
    def loss_span(self) -> tuple[int, int]:
        """Supervised target indices: the answer characters plus EOS."""
        return self.answer_start, self.answer_end + 1


def load_records(path: str | Path, views: tuple[str, ...] | None = None) -> list[dict]:
    records = []
    wanted = set(views) if views is not None else None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = str(obj["view"]).partition(":")[0]
            if wanted is not None and kind not in wanted:
                continue
            obj["view"] = kind
            records.append(obj)
    if not records:
        raise EmptyDatasetError(f"no usable sequences in {path}")
    return records


def encode_records(records: list[dict], vocab: Vocab) -> list[Example]:
    examples = []
    for obj in records:
        text = str(obj["text"])
        start, end = int(obj["answer_char_start"]), int(obj["answer_char_end"])
        if not (0 <= start <= end == len(text)):
            raise SpanMismatchError(
                f"record {obj.get('id')!r}: span ({start}, {end}) does not mark "
                f"the answer suffix of a {len(text)}-character text"
            )
        examples.append(
            Example(
                problem_id=str(obj["id"]),
                view=str(obj["view"]),
                ids=tuple(vocab.encode(text)) + (EOS_ID,),
                answer_start=start,
                answer_end=end,
            )
        )
    return examples


def load_examples(
    path: str | Path, views: tuple[str, ...] | None = None
) -> tuple[list[Example], Vocab]:
    records = load_records(path, views)
    vocab = Vocab.build([str(obj["text"]) for obj in records])
    return encode_records(records, vocab), vocab
