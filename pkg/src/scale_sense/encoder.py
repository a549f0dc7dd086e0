"""Desk-scale trainable context encoder.

Word-level tokenizer plus a small pre-norm self-attention stack with learned
position embeddings. The context vector H is the final hidden state at the
first position (the [CLS] slot). Small by design: gradient checks and overfit
runs finish in minutes on a laptop.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import torch
from torch import nn

from .query import QueryString

PAD, UNK = "[PAD]", "[UNK]"
SPECIALS = (PAD, UNK, "[CLS]", "[SEP]", "[SEP2]", "[MASK]")
_SPECIAL_SET = frozenset(SPECIALS)

_NUMBER_RE = re.compile(r"^\d+(?:[./]\d+)?$")
_NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")


class EmptyCorpus(ValueError):
    """No tokens available to build a vocabulary from."""


class ShapeError(ValueError):
    """Configuration and parameters disagree on shapes."""


def split_text(text: str) -> list[str]:
    """Lowercased word-level split; specials and numerals stay whole tokens."""
    tokens: list[str] = []
    for raw in text.split():
        if raw in _SPECIAL_SET:
            tokens.append(raw)
        elif _NUMBER_RE.match(raw):
            tokens.append(raw)
        else:
            tokens.extend(t for t in _NON_ALNUM_RE.split(raw.lower()) if t)
    return tokens


class Vocabulary:
    """Token-to-id map with six reserved special ids (0..5)."""

    def __init__(self, tokens: Iterable[str]):
        self._tokens = tuple(tokens)
        self._token_to_id = {tok: i for i, tok in enumerate(SPECIALS)}
        for tok in self._tokens:
            if tok in self._token_to_id:
                raise ValueError(f"duplicate or special token in vocabulary: {tok!r}")
            self._token_to_id[tok] = len(self._token_to_id)

    @classmethod
    def build(cls, texts: Iterable[str], min_freq: int = 1) -> "Vocabulary":
        if min_freq < 1:
            raise ValueError("min_freq must be >= 1")
        counts: Counter[str] = Counter()
        for text in texts:
            counts.update(t for t in split_text(text) if t not in _SPECIAL_SET)
        kept = sorted(
            (tok for tok, n in counts.items() if n >= min_freq),
            key=lambda tok: (-counts[tok], tok),
        )
        if not counts:
            raise EmptyCorpus("no tokens in corpus")
        return cls(kept)

    def __len__(self) -> int:
        return len(self._token_to_id)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def cls_id(self) -> int:
        return 2

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, self.unk_id)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self._tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line for line in lines if line)


def tokenize(query: QueryString | str, vocab: Vocabulary, max_len: int = 256) -> list[int]:
    """Map a query to ids: [CLS] first, specials reserved, tail-truncated."""
    text = query.text if isinstance(query, QueryString) else query
    tokens = split_text(text)
    if not tokens or tokens[0] != "[CLS]":
        tokens = ["[CLS]", *tokens]
    return [vocab.id_of(t) for t in tokens[:max_len]]


class EncoderMode(str, Enum):
    TRAIN_ALL = "train_all"
    FREEZE = "freeze"
    RANDOM_INIT = "random_init"


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 128
    layers: int = 2
    heads: int = 4
    max_len: int = 256
    mode: EncoderMode = EncoderMode.TRAIN_ALL

    def __post_init__(self):
        object.__setattr__(self, "mode", EncoderMode(self.mode))
        if self.dim % self.heads != 0:
            raise ShapeError(f"dim {self.dim} not divisible by heads {self.heads}")
        if min(self.dim, self.layers, self.heads, self.max_len) < 1:
            raise ShapeError("dim, layers, heads, max_len must all be >= 1")


class SelfAttentionBlock(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.norm_attn = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.norm_ffn = nn.LayerNorm(dim)
        self.ffn_in = nn.Linear(dim, 4 * dim)
        self.ffn_out = nn.Linear(4 * dim, dim)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        # x: (B, T, D); pad_mask: (B, T) True at padding
        bsz, seq, dim = x.shape
        h = self.norm_attn(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        shape = (bsz, seq, self.heads, self.head_dim)
        q = q.view(shape).transpose(1, 2)
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(pad_mask[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        mixed = (attn @ v).transpose(1, 2).reshape(bsz, seq, dim)
        x = x + self.out(mixed)
        h = self.norm_ffn(x)
        return x + self.ffn_out(torch.nn.functional.gelu(self.ffn_in(h)))


class TextEncoder(nn.Module):
    """Token + position embeddings feeding `layers` self-attention blocks."""

    def __init__(self, config: EncoderConfig, vocab_size: int):
        super().__init__()
        self.config = config
        self.vocab_size = vocab_size
        self.token_embedding = nn.Embedding(vocab_size, config.dim)
        self.position_embedding = nn.Embedding(config.max_len, config.dim)
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(config.dim, config.heads) for _ in range(config.layers)
        )
        self.final_norm = nn.LayerNorm(config.dim)

    @torch.no_grad()
    def init_parameters(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        for name, param in self.named_parameters():
            if param.dim() >= 2 or "embedding" in name:
                param.copy_(torch.empty_like(param).normal_(0.0, 0.02, generator=gen))
            elif "norm" in name and name.endswith("weight"):
                param.fill_(1.0)
            else:
                param.zero_()

    def apply_mode(self) -> None:
        if self.config.mode is EncoderMode.FREEZE:
            for param in self.parameters():
                param.requires_grad_(False)

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        """ids: (B, T) -> H: (B, dim), the first-position final hidden state."""
        if ids.dim() != 2:
            raise ShapeError(f"ids must be (batch, seq), got {tuple(ids.shape)}")
        if ids.shape[1] > self.config.max_len:
            raise ShapeError(f"sequence {ids.shape[1]} exceeds max_len {self.config.max_len}")
        if int(ids.max()) >= self.vocab_size:
            raise ShapeError("token id outside vocabulary")
        if pad_mask is None:
            pad_mask = torch.zeros_like(ids, dtype=torch.bool)
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(positions)[None, :, :]
        for block in self.blocks:
            x = block(x, pad_mask)
        return self.final_norm(x)[:, 0, :]

    def encode(self, ids: list[int]) -> torch.Tensor:
        """Single-sequence deterministic forward pass."""
        if not ids:
            raise ValueError("ids must be non-empty")
        if ids[0] != 2:  # [CLS] id
            raise ValueError("first id must be [CLS]")
        with torch.no_grad():
            return self.forward(torch.tensor([ids], dtype=torch.long))[0]


def pad_batch(id_lists: list[list[int]], pad_id: int = 0) -> tuple[torch.Tensor, torch.Tensor]:
    """Right-pad to a rectangle; returns (ids, pad_mask)."""
    width = max(len(ids) for ids in id_lists)
    ids = torch.full((len(id_lists), width), pad_id, dtype=torch.long)
    mask = torch.ones((len(id_lists), width), dtype=torch.bool)
    for row, seq in enumerate(id_lists):
        ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        mask[row, : len(seq)] = False
    return ids, mask
