"""Differentiable building blocks shared by both branches.

All modules operate on single sequences (no batch axis): token inputs are
(L, D). They are pure functions of (inputs, parameters, training flag);
dropout draws from an explicit per-module generator when one is set.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn


class SeededDropout(nn.Module):
    """Dropout whose randomness comes from an explicit generator.

    ``generator`` is None by default (global RNG); the trainer installs one
    per model so concurrent forwards stay reproducible. No-op in eval mode.
    """

    def __init__(self, p: float = 0.1):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.generator: torch.Generator | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if not self.training or self.p == 0.0:
            return x
        keep = 1.0 - self.p
        mask = torch.rand(x.shape, generator=self.generator,
                          device=x.device, dtype=x.dtype) < keep
        return x * mask / keep

    def extra_repr(self) -> str:
        return f"p={self.p}"


def set_dropout_generator(module: nn.Module, generator: torch.Generator | None) -> None:
    for m in module.modules():
        if isinstance(m, SeededDropout):
            m.generator = generator


class MultiHeadAttention(nn.Module):
    """softmax(Q' K'^T / sqrt(d)) V' with Q'=W_q Q etc., heads concatenated.

    Projections are bias-free. ``out_proj=False`` leaves the concatenated
    head outputs unprojected (the bare formula).
    """

    def __init__(self, embed_dim: int, num_heads: int = 1, out_proj: bool = True):
        super().__init__()
        if embed_dim % num_heads != 0:
            raise ValueError(f"embed_dim {embed_dim} not divisible by num_heads {num_heads}")
        self.embed_dim = embed_dim
        self.num_heads = num_heads
        self.head_dim = embed_dim // num_heads
        self.w_q = nn.Linear(embed_dim, embed_dim, bias=False)
        self.w_k = nn.Linear(embed_dim, embed_dim, bias=False)
        self.w_v = nn.Linear(embed_dim, embed_dim, bias=False)
        self.proj = nn.Linear(embed_dim, embed_dim, bias=False) if out_proj else None

    def forward(self, query: torch.Tensor, key: torch.Tensor, value: torch.Tensor,
                need_weights: bool = False):
        if query.ndim != 2 or key.ndim != 2 or value.ndim != 2:
            raise ValueError("attention expects (L, D) token matrices")
        if query.shape[0] == 0 or key.shape[0] == 0:
            raise ValueError("attention over an empty sequence")
        if key.shape[0] != value.shape[0]:
            raise ValueError(f"key/value lengths differ: {key.shape[0]} vs {value.shape[0]}")
        for name, t in (("query", query), ("key", key), ("value", value)):
            if t.shape[1] != self.embed_dim:
                raise ValueError(f"{name} width {t.shape[1]} != embed_dim {self.embed_dim}")
        lq, lk = query.shape[0], key.shape[0]
        h, d = self.num_heads, self.head_dim
        q = self.w_q(query).reshape(lq, h, d).transpose(0, 1)   # (h, Lq, d)
        k = self.w_k(key).reshape(lk, h, d).transpose(0, 1)
        v = self.w_v(value).reshape(lk, h, d).transpose(0, 1)
        weights = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(d), dim=-1)
        out = (weights @ v).transpose(0, 1).reshape(lq, self.embed_dim)
        if self.proj is not None:
            out = self.proj(out)
        if need_weights:
            return out, weights
        return out

    def self_attention(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.forward(tokens, tokens, tokens)


class Mlp(nn.Module):
    """Stack of ``depth`` linear layers with ReLU and dropout between them."""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int,
                 depth: int = 3, dropout: float = 0.1):
        super().__init__()
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        widths = [in_dim] + [hidden_dim] * (depth - 1) + [out_dim]
        self.layers = nn.ModuleList(
            nn.Linear(widths[i], widths[i + 1]) for i in range(depth))
        self.drop = SeededDropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.drop(F.relu(x))
        return x


class TransformerLayer(nn.Module):
    """Pre-norm transformer layer: self-attention and feed-forward sublayers,
    each residual. Shape-preserving on (L, D) inputs."""

    def __init__(self, dim: int, num_heads: int = 8, ff_mult: int = 4):
        super().__init__()
        self.dim = dim
        self.norm1 = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, num_heads, out_proj=True)
        self.norm2 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(
            nn.Linear(dim, ff_mult * dim),
            nn.ReLU(),
            nn.Linear(ff_mult * dim, dim),
        )

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.ndim != 2 or tokens.shape[0] == 0:
            raise ValueError(f"expected a non-empty (L, {self.dim}) sequence")
        if tokens.shape[1] != self.dim:
            raise ValueError(f"token width {tokens.shape[1]} != layer dim {self.dim}")
        normed = self.norm1(tokens)
        h = tokens + self.attn(normed, normed, normed)
        return h + self.ff(self.norm2(h))


class CoAttention(nn.Module):
    """Two parallel cross-attention streams with residual + layer norm.

    Stream A queries B's keys/values and vice versa; both shapes preserved.
    """

    def __init__(self, dim: int, num_heads: int = 4):
        super().__init__()
        self.dim = dim
        self.attn_a = MultiHeadAttention(dim, num_heads, out_proj=True)
        self.attn_b = MultiHeadAttention(dim, num_heads, out_proj=True)
        self.norm_a = nn.LayerNorm(dim)
        self.norm_b = nn.LayerNorm(dim)

    def forward(self, a_tokens: torch.Tensor, b_tokens: torch.Tensor,
                need_weights: bool = False):
        if a_tokens.shape[0] == 0 or b_tokens.shape[0] == 0:
            raise ValueError("co-attention over an empty sequence")
        ca_a, w_a = self.attn_a(a_tokens, b_tokens, b_tokens, need_weights=True)
        ca_b, w_b = self.attn_b(b_tokens, a_tokens, a_tokens, need_weights=True)
        a_out = self.norm_a(a_tokens + ca_a)
        b_out = self.norm_b(b_tokens + ca_b)
        if need_weights:
            return a_out, b_out, w_a, w_b
        return a_out, b_out


class TwoWayAttentionBlock(nn.Module):
    """Alternating prompt<->image attention refining both token sets.

    Four steps, each residual + layer norm: prompt self-attention, prompt->
    image cross-attention, prompt MLP, image->prompt cross-attention.
    """

    def __init__(self, dim: int = 256, num_heads: int = 8,
                 mlp_hidden: int | None = None, dropout: float = 0.1):
        super().__init__()
        self.dim = dim
        hidden = mlp_hidden if mlp_hidden is not None else dim
        self.self_attn = MultiHeadAttention(dim, num_heads, out_proj=True)
        self.cross_prompt_to_image = MultiHeadAttention(dim, num_heads, out_proj=True)
        self.mlp = Mlp(dim, hidden, dim, depth=3, dropout=dropout)
        self.cross_image_to_prompt = MultiHeadAttention(dim, num_heads, out_proj=True)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.norm3 = nn.LayerNorm(dim)
        self.norm4 = nn.LayerNorm(dim)

    def forward(self, prompt: torch.Tensor, image: torch.Tensor):
        for name, t in (("prompt", prompt), ("image", image)):
            if t.ndim != 2 or t.shape[0] == 0:
                raise ValueError(f"{name} tokens must be a non-empty (N, {self.dim}) matrix")
            if t.shape[1] != self.dim:
                raise ValueError(f"{name} width {t.shape[1]} != block dim {self.dim}")
        p = self.norm1(prompt + self.self_attn(prompt, prompt, prompt))
        p = self.norm2(p + self.cross_prompt_to_image(p, image, image))
        p = self.norm3(p + self.mlp(p))
        img = self.norm4(image + self.cross_image_to_prompt(image, p, p))
        return p, img


class ChannelLayerNorm(nn.Module):
    """LayerNorm over the channel axis of a (N, C, H, W) feature map."""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mu = x.mean(1, keepdim=True)
        var = (x - mu).pow(2).mean(1, keepdim=True)
        x = (x - mu) / torch.sqrt(var + self.eps)
        return x * self.weight[:, None, None] + self.bias[:, None, None]


def conv_out_size(n: int, kernel: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - kernel) // stride + 1


class GridDownsampler(nn.Module):
    """Two strided convolutions collapsing a (G, G, C) grid to a flat vector.

    Ordering: conv -> channel LN -> GELU -> conv -> GELU -> flatten.
    """

    def __init__(self, in_channels: int = 256, channels: tuple[int, int] = (64, 32),
                 kernel: int = 3, stride: int = 2, padding: int = 1):
        super().__init__()
        mid, out = channels
        self.in_channels = in_channels
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self.out_channels = out
        self.conv1 = nn.Conv2d(in_channels, mid, kernel, stride=stride, padding=padding)
        self.norm = ChannelLayerNorm(mid)
        self.conv2 = nn.Conv2d(mid, out, kernel, stride=stride, padding=padding)

    def spatial_out(self, g: int) -> int:
        s1 = conv_out_size(g, self.kernel, self.stride, self.padding)
        return conv_out_size(s1, self.kernel, self.stride, self.padding)

    def out_width(self, g: int) -> int:
        return self.out_channels * self.spatial_out(g) ** 2

    def forward(self, grid: torch.Tensor) -> torch.Tensor:
        if grid.ndim != 3 or grid.shape[0] != grid.shape[1]:
            raise ValueError(f"expected a square (G, G, C) grid, got {tuple(grid.shape)}")
        if grid.shape[2] != self.in_channels:
            raise ValueError(f"grid channels {grid.shape[2]} != {self.in_channels}")
        x = grid.permute(2, 0, 1).unsqueeze(0)       # (1, C, G, G)
        x = F.gelu(self.norm(self.conv1(x)))
        x = F.gelu(self.conv2(x))
        return x.flatten()
