"""A minimal causal character-level transformer.

Position ``j`` attends only to positions ``<= j``, so each next-token
distribution is conditioned on the prefix alone. Attention keeps an
optional key/value cache for incremental decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    dim: int = 128
    layers: int = 4
    heads: int = 4
    max_len: int = 512

    def __post_init__(self):
        if (self.dim // self.heads) % 2:
            raise ValueError("head dimension must be even for rotary embeddings")

    def to_json(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "dim": self.dim,
            "layers": self.layers,
            "heads": self.heads,
            "max_len": self.max_len,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def _rotate(x: torch.Tensor, pos_ids: torch.Tensor) -> torch.Tensor:
    """Rotary position encoding; attention scores then depend only on
    relative offsets, so token patterns transfer across positions."""
    half = x.size(-1) // 2
    freqs = 10000.0 ** (-torch.arange(half, dtype=torch.float32) / half)
    angles = pos_ids.to(torch.float32)[:, None, :, None] * freqs  # [B, 1, T, half]
    cos, sin = angles.cos(), angles.sin()
    x1, x2 = x[..., :half], x[..., half:]
    return torch.cat([x1 * cos - x2 * sin, x1 * sin + x2 * cos], dim=-1)


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        assert dim % heads == 0
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, pos_ids, attn_bias=None, past=None):
        B, T, _ = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)

        def split(t):
            return t.view(B, T, self.heads, self.head_dim).transpose(1, 2)

        # keys are rotated once, at their own positions, then cached
        q = _rotate(split(q), pos_ids)
        k = _rotate(split(k), pos_ids)
        v = split(v)
        if past is not None:
            k = torch.cat([past[0], k], dim=2)
            v = torch.cat([past[1], v], dim=2)
        out = F.scaled_dot_product_attention(
            q, k, v, attn_mask=attn_bias, is_causal=attn_bias is None and T > 1
        )
        out = out.transpose(1, 2).contiguous().view(B, T, -1)
        return self.proj(out), (k, v)


class Block(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, 4 * dim), nn.GELU(), nn.Linear(4 * dim, dim)
        )

    def forward(self, x, pos_ids, attn_bias=None, past=None):
        attended, present = self.attn(self.ln1(x), pos_ids, attn_bias, past)
        x = x + attended
        return x + self.mlp(self.ln2(x)), present


class CharLM(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab_size, config.dim)
        self.blocks = nn.ModuleList(
            Block(config.dim, config.heads) for _ in range(config.layers)
        )
        self.ln_f = nn.LayerNorm(config.dim)
        self.head = nn.Linear(config.dim, config.vocab_size)

    def forward(self, ids, pos_ids=None, attn_bias=None, past=None):
        """Returns (logits, presents); ``logits[:, j]`` is the next-token
        distribution after position ``j``. Without an explicit
        ``attn_bias`` a causal mask is applied."""
        B, T = ids.shape
        if pos_ids is None:
            pos_ids = torch.arange(T, device=ids.device).expand(B, T)
        h = self.tok_emb(ids)
        presents = []
        for i, block in enumerate(self.blocks):
            h, present = block(h, pos_ids, attn_bias, past[i] if past is not None else None)
            presents.append(present)
        return self.head(self.ln_f(h)), presents
