"""Positional, duration, and box-prompt encodings."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


def sinusoidal_encoding(position: int, dim: int,
                        dtype: torch.dtype = torch.float32,
                        device=None) -> torch.Tensor:
    """Sine/cosine position vector: pe[2k] = sin(w_k i), pe[2k+1] = cos(w_k i),
    with w_k = 10000^(-2k/dim). Computed in float64, cast on return."""
    if dim % 2 != 0:
        raise ValueError(f"encoding dim must be even, got {dim}")
    if position < 0:
        raise ValueError(f"position must be >= 0, got {position}")
    k = torch.arange(dim // 2, dtype=torch.float64, device=device)
    ang = float(position) * torch.pow(torch.tensor(10000.0, dtype=torch.float64), -2.0 * k / dim)
    pe = torch.empty(dim, dtype=torch.float64, device=device)
    pe[0::2] = torch.sin(ang)
    pe[1::2] = torch.cos(ang)
    return pe.to(dtype)


@dataclass(frozen=True)
class DurationBinner:
    """Equi-frequency bin boundaries for absolute and relative durations.

    Edges are inner boundaries (strictly increasing); a value maps to
    bin ``searchsorted(edges, x, 'right')``, so out-of-range queries clamp
    to the first/last bin.
    """

    abs_edges: np.ndarray
    rel_edges: np.ndarray

    @property
    def n_abs_bins(self) -> int:
        return len(self.abs_edges) + 1

    @property
    def n_rel_bins(self) -> int:
        return len(self.rel_edges) + 1

    def group_abs(self, seconds: float) -> int:
        return int(np.searchsorted(self.abs_edges, seconds, side="right"))

    def group_rel(self, fraction: float) -> int:
        return int(np.searchsorted(self.rel_edges, fraction, side="right"))


def fit_duration_bins(abs_values, rel_values, n_bins: int = 10) -> DurationBinner:
    """Fit equi-frequency boundaries on training durations.

    With n distinct values and n_bins | n, every bin holds exactly n/n_bins
    training values; fewer distinct values than bins collapse with a warning.
    """
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    return DurationBinner(
        abs_edges=_equifrequency_edges(np.asarray(abs_values, dtype=np.float64), n_bins, "abs"),
        rel_edges=_equifrequency_edges(np.asarray(rel_values, dtype=np.float64), n_bins, "rel"),
    )


def _equifrequency_edges(values: np.ndarray, n_bins: int, name: str) -> np.ndarray:
    if values.size == 0:
        raise ValueError(f"cannot fit {name} duration bins on an empty list")
    x = np.sort(values)
    distinct = np.unique(x)
    if distinct.size < n_bins:
        warnings.warn(
            f"{name} durations: only {distinct.size} distinct value(s) for "
            f"{n_bins} requested bins; collapsing", stacklevel=3)
        return ((distinct[:-1] + distinct[1:]) / 2.0).astype(np.float64)
    n = x.size
    cuts = [(j * n) // n_bins for j in range(1, n_bins)]
    edges = np.array([(x[c - 1] + x[c]) / 2.0 for c in cuts], dtype=np.float64)
    uniq = np.unique(edges)
    if uniq.size < edges.size:
        warnings.warn(f"{name} durations: duplicate quantile edges merged "
                      f"({edges.size} -> {uniq.size})", stacklevel=3)
    return uniq


class DurationEncoder(nn.Module):
    """Learned embeddings over (absolute, relative) duration bins, concatenated.

    Output width ``dim``; each half indexes its own table. Edges are stored
    as buffers so checkpoints restore the exact fitted binning.
    """

    def __init__(self, binner: DurationBinner, dim: int):
        super().__init__()
        if dim % 2 != 0:
            raise ValueError(f"duration encoding dim must be even, got {dim}")
        self.dim = dim
        self.register_buffer("abs_edges", torch.as_tensor(binner.abs_edges, dtype=torch.float32))
        self.register_buffer("rel_edges", torch.as_tensor(binner.rel_edges, dtype=torch.float32))
        self.emb_abs = nn.Embedding(binner.n_abs_bins, dim // 2)
        self.emb_rel = nn.Embedding(binner.n_rel_bins, dim // 2)

    def forward(self, abs_seconds: float, rel_fraction: float) -> torch.Tensor:
        if abs_seconds < 0:
            raise ValueError(f"absolute duration must be >= 0, got {abs_seconds}")
        if not 0.0 <= rel_fraction <= 1.0:
            raise ValueError(f"relative duration must be in [0, 1], got {rel_fraction}")
        i = int(torch.searchsorted(self.abs_edges,
                                   torch.tensor(abs_seconds, dtype=torch.float32), right=True))
        j = int(torch.searchsorted(self.rel_edges,
                                   torch.tensor(rel_fraction, dtype=torch.float32), right=True))
        device = self.emb_abs.weight.device
        return torch.cat([
            self.emb_abs(torch.tensor(i, device=device)),
            self.emb_rel(torch.tensor(j, device=device)),
        ])


class BoxPromptEncoder(nn.Module):
    """Map OCR boxes to prompt tokens: two corner points per box, each a
    frozen random-Fourier feature of (x, y) plus a learned corner embedding.

    An empty box list yields one learned no-text token.
    """

    def __init__(self, dim: int = 256, seed: int = 0, scale: float = 1.0):
        super().__init__()
        if dim % 2 != 0:
            raise ValueError(f"prompt dim must be even, got {dim}")
        self.dim = dim
        gen = torch.Generator().manual_seed(seed)
        self.register_buffer(
            "freq", torch.randn((2, dim // 2), generator=gen) * scale)
        self.corner_embed = nn.Embedding(2, dim)  # 0 = top-left, 1 = bottom-right
        self.no_text_token = nn.Parameter(torch.randn(dim, generator=gen) * 0.02)

    def forward(self, boxes: torch.Tensor) -> torch.Tensor:
        if boxes.numel() == 0:
            return self.no_text_token.unsqueeze(0)
        if boxes.ndim != 2 or boxes.shape[1] != 4:
            raise ValueError(f"boxes must be (N, 4), got {tuple(boxes.shape)}")
        if (boxes < 0).any() or (boxes > 1).any():
            raise ValueError("box coordinates must lie in [0, 1]")
        corners = torch.stack([boxes[:, (0, 1)], boxes[:, (2, 3)]], dim=1)  # (N, 2, 2)
        pts = corners.reshape(-1, 2)                                        # (2N, 2)
        z = (2.0 * pts - 1.0) @ self.freq.to(pts.dtype)
        feat = torch.cat([torch.sin(2 * math.pi * z), torch.cos(2 * math.pi * z)], dim=1)
        types = torch.arange(2, device=boxes.device).repeat(boxes.shape[0])
        return feat + self.corner_embed(types).to(feat.dtype)
