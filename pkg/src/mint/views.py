"""Solution views: the annotation formats a math solution can take."""

from __future__ import annotations

from dataclasses import dataclass

KIND_COT_CLEAN = "cot_clean"
KIND_EQN = "eqn"
KIND_TREE = "tree"
KIND_COT_NOISY = "cot_noisy"

_KINDS = (KIND_COT_CLEAN, KIND_EQN, KIND_TREE, KIND_COT_NOISY)
_ORDER = {kind: i for i, kind in enumerate(_KINDS)}

# Accepted spellings on CLI flags and in config files.
_ALIASES = {
    "cot": KIND_COT_CLEAN,
    "cot_clean": KIND_COT_CLEAN,
    "eqn": KIND_EQN,
    "equation": KIND_EQN,
    "tree": KIND_TREE,
    "noisy": KIND_COT_NOISY,
    "cot_noisy": KIND_COT_NOISY,
}


@dataclass(frozen=True)
class View:
    """One annotation format. ``cot_noisy`` carries the tag of its source
    corpus; the clean kinds never do."""

    kind: str
    source_tag: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown view kind {self.kind!r}")
        if self.kind == KIND_COT_NOISY:
            if not self.source_tag:
                raise ValueError("a noisy view needs a non-empty source tag")
        elif self.source_tag is not None:
            raise ValueError(f"view {self.kind!r} does not take a source tag")

    @property
    def tag(self) -> str:
        if self.source_tag is not None:
            return f"{self.kind}:{self.source_tag}"
        return self.kind

    @property
    def is_noisy(self) -> bool:
        return self.kind == KIND_COT_NOISY

    def sort_key(self) -> tuple[int, str]:
        return (_ORDER[self.kind], self.source_tag or "")


COT_CLEAN = View(KIND_COT_CLEAN)
EQN = View(KIND_EQN)
TREE = View(KIND_TREE)


def cot_noisy(source_tag: str) -> View:
    return View(KIND_COT_NOISY, source_tag)


def parse_view(text: str) -> View:
    """Parse a view tag like ``eqn`` or ``cot_noisy:asdiv``."""
    kind, _, tag = text.partition(":")
    kind = kind.strip().lower()
    if kind not in _ALIASES:
        raise ValueError(f"unknown view {text!r}")
    kind = _ALIASES[kind]
    if kind == KIND_COT_NOISY:
        return View(kind, tag or "unspecified")
    if tag:
        raise ValueError(f"view {kind!r} does not take a source tag")
    return View(kind)


def parse_kind(text: str) -> str:
    """Parse a bare view kind (no source tag), e.g. for --views lists."""
    kind = text.strip().lower()
    if kind not in _ALIASES:
        raise ValueError(f"unknown view kind {text!r}")
    return _ALIASES[kind]
