"""Transformer encoder scoring whether two token sequences are equivalent.

Attention is written out rather than taken from a library layer so the
row-normalized attention weights are inspectable; the evaluation suite asserts
every row sums to one. Residual connections use post-normalization:
``LayerNorm(x + Sublayer(x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class DetectorConfig:
    vocab_size: int
    dim: int = 128
    heads: int = 4
    d_k: int | None = None
    d_v: int | None = None
    blocks: int = 2
    ffn_dim: int | None = None
    max_len: int = 256
    learning_rate: float = 1e-3
    epochs: int = 3
    batch_size: int = 64
    seed: int = 0
    learned_positions: bool = False

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.d_k is None:
            self.d_k = self.dim // self.heads
        if self.d_v is None:
            self.d_v = self.dim // self.heads
        if self.ffn_dim is None:
            self.ffn_dim = 4 * self.dim


def sinusoidal_positions(max_len: int, dim: int) -> torch.Tensor:
    position = torch.arange(max_len, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim))
    table = torch.zeros(max_len, dim)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)
    return table


class MultiHeadAttention(nn.Module):
    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        self.heads = cfg.heads
        self.d_k = cfg.d_k
        self.d_v = cfg.d_v
        self.w_q = nn.Linear(cfg.dim, cfg.heads * cfg.d_k, bias=False)
        self.w_k = nn.Linear(cfg.dim, cfg.heads * cfg.d_k, bias=False)
        self.w_v = nn.Linear(cfg.dim, cfg.heads * cfg.d_v, bias=False)
        self.w_o = nn.Linear(cfg.heads * cfg.d_v, cfg.dim, bias=False)

    def forward(self, x, key_pad_mask):
        batch, seq, _ = x.shape
        q = self.w_q(x).view(batch, seq, self.heads, self.d_k).transpose(1, 2)
        k = self.w_k(x).view(batch, seq, self.heads, self.d_k).transpose(1, 2)
        v = self.w_v(x).view(batch, seq, self.heads, self.d_v).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_k)
        scores = scores.masked_fill(key_pad_mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        context = (weights @ v).transpose(1, 2).reshape(batch, seq, self.heads * self.d_v)
        return self.w_o(context), weights


class TransformerBlock(nn.Module):
    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        self.attention = MultiHeadAttention(cfg)
        self.norm1 = nn.LayerNorm(cfg.dim)
        self.ffn = nn.Sequential(
            nn.Linear(cfg.dim, cfg.ffn_dim), nn.ReLU(), nn.Linear(cfg.ffn_dim, cfg.dim)
        )
        self.norm2 = nn.LayerNorm(cfg.dim)

    def forward(self, x, key_pad_mask):
        attended, weights = self.attention(x, key_pad_mask)
        x = self.norm1(x + attended)
        x = self.norm2(x + self.ffn(x))
        return x, weights


class PairDetector(nn.Module):
    """Scores a concatenated ``left <SEP> right`` token sequence.

    The transformer stack encodes the joint sequence; the prediction head
    pools the hidden states of each side separately and feeds the usual pair
    interaction features (both means, their absolute difference and product)
    through the final linear layers.
    """

    SEP_ID = 2  # fixed by the vocabulary layout

    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(cfg.vocab_size, cfg.dim, padding_idx=0)
        if cfg.learned_positions:
            self.positions = nn.Parameter(torch.zeros(cfg.max_len, cfg.dim))
            nn.init.normal_(self.positions, std=0.02)
        else:
            self.register_buffer("positions", sinusoidal_positions(cfg.max_len, cfg.dim))
        self.blocks = nn.ModuleList(TransformerBlock(cfg) for _ in range(cfg.blocks))
        self.head = nn.Sequential(
            nn.Linear(4 * cfg.dim, cfg.dim), nn.ReLU(), nn.Linear(cfg.dim, 2)
        )

    def _segment_means(self, x, input_ids, pad_mask):
        is_sep = input_ids.eq(self.SEP_ID)
        after_sep = is_sep.cumsum(dim=1) > 0
        left_keep = (~pad_mask & ~after_sep).unsqueeze(-1).float()
        right_keep = (~pad_mask & after_sep & ~is_sep).unsqueeze(-1).float()
        left = (x * left_keep).sum(dim=1) / left_keep.sum(dim=1).clamp(min=1.0)
        right = (x * right_keep).sum(dim=1) / right_keep.sum(dim=1).clamp(min=1.0)
        return left, right

    def forward(self, input_ids, return_attention=False):
        pad_mask = input_ids.eq(0)
        x = self.embedding(input_ids) + self.positions[: input_ids.shape[1]]
        attention_maps = []
        for block in self.blocks:
            x, weights = block(x, pad_mask)
            if return_attention:
                attention_maps.append(weights)
        left, right = self._segment_means(x, input_ids, pad_mask)
        features = torch.cat([left, right, (left - right).abs(), left * right], dim=-1)
        logits = self.head(features)
        if return_attention:
            return logits, attention_maps
        return logits

    def scores(self, input_ids) -> torch.Tensor:
        """Similarity score per pair: softmax probability of the equivalent class."""
        with torch.no_grad():
            return torch.softmax(self.forward(input_ids), dim=-1)[:, 1]
