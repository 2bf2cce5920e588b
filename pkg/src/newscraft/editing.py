"""Material-editing branch: on-screen text layout and temporal splice structure."""

from __future__ import annotations

import torch
from torch import nn

from .blocks import GridDownsampler, Mlp, MultiHeadAttention, TransformerLayer, TwoWayAttentionBlock
from .encodings import BoxPromptEncoder, DurationBinner, DurationEncoder, sinusoidal_encoding


class TextLayoutEncoder(nn.Module):
    """Spatial aspect: refine the text-rich frame's patch grid around its OCR
    boxes with two-way attention, then downsample to a flat layout feature.
    """

    def __init__(self, grid_feat_dim: int, grid_size: int, dim: int = 256,
                 num_heads: int = 8, n_blocks: int = 2, dropout: float = 0.1,
                 conv_channels: tuple[int, int] = (64, 32), conv_kernel: int = 3,
                 conv_stride: int = 2, conv_padding: int = 1, seed: int = 0):
        super().__init__()
        self.grid_size = grid_size
        self.dim = dim
        self.proj = nn.Linear(grid_feat_dim, dim)
        self.box_encoder = BoxPromptEncoder(dim, seed=seed)
        self.blocks = nn.ModuleList(
            TwoWayAttentionBlock(dim, num_heads, dropout=dropout) for _ in range(n_blocks))
        self.down = GridDownsampler(dim, conv_channels, conv_kernel, conv_stride, conv_padding)

    @property
    def out_width(self) -> int:
        return self.down.out_width(self.grid_size)

    def forward(self, grid: torch.Tensor, boxes: torch.Tensor) -> torch.Tensor:
        g = grid.shape[0]
        if grid.ndim != 3 or grid.shape[1] != g:
            raise ValueError(f"expected a square (G, G, D) grid, got {tuple(grid.shape)}")
        if g != self.grid_size:
            raise ValueError(f"grid size {g} != configured {self.grid_size}")
        image = self.proj(grid).reshape(g * g, self.dim)
        prompt = self.box_encoder(boxes)
        for block in self.blocks:
            prompt, image = block(prompt, image)
        return self.down(image.reshape(g, g, self.dim))


class TemporalStructureEncoder(nn.Module):
    """Hierarchical segment encoder for one modality.

    Per segment: fuse content (visual segments run self-attention over their
    frames and mean-pool; a single-frame segment is its own embedding; text
    segments arrive pre-fused as one embedding), then add a sinusoidal
    position vector and the learned duration embedding. Self-attention over
    the per-segment vectors, mean-pooled, gives the modality feature.
    """

    def __init__(self, content_dim: int, dim: int, binner: DurationBinner,
                 visual: bool):
        super().__init__()
        self.dim = dim
        self.visual = visual
        self.proj = nn.Linear(content_dim, dim)
        self.intra_attn = MultiHeadAttention(dim, 1, out_proj=False) if visual else None
        self.inter_attn = MultiHeadAttention(dim, 1, out_proj=False)
        self.duration = DurationEncoder(binner, dim)

    def forward(self, segments: list[tuple[torch.Tensor, float, float]]) -> torch.Tensor:
        """``segments`` holds (content, abs_seconds, rel_fraction) triples in order."""
        if not segments:
            raise ValueError("temporal encoder needs at least one segment")
        dtype = self.proj.weight.dtype
        feats = []
        for index, (content, abs_s, rel) in enumerate(segments):
            if self.visual:
                frames = self.proj(content)
                seg = frames[0] if frames.shape[0] == 1 else \
                    self.intra_attn(frames, frames, frames).mean(dim=0)
            else:
                seg = self.proj(content)
            pe = sinusoidal_encoding(index, self.dim, dtype=dtype, device=seg.device)
            feats.append(seg + pe + self.duration(abs_s, rel))
        stacked = torch.stack(feats)
        return self.inter_attn(stacked, stacked, stacked).mean(dim=0)


class TemporalFusion(nn.Module):
    """Run a temporal encoder per modality and fuse the two features.

    A learned modality tag is added to each feature before the 2-token
    transformer so pooling cannot erase which side is which.
    """

    def __init__(self, text_dim: int, frame_dim: int, dim: int,
                 binners: dict[str, DurationBinner], num_heads: int = 8, ff_mult: int = 4):
        super().__init__()
        self.text_encoder = TemporalStructureEncoder(text_dim, dim, binners["text"], visual=False)
        self.visual_encoder = TemporalStructureEncoder(frame_dim, dim, binners["visual"],
                                                       visual=True)
        self.modality_tag = nn.Embedding(2, dim)
        self.layer = TransformerLayer(dim, num_heads, ff_mult)

    def forward(self, text_segments, visual_segments):
        h_text = self.text_encoder(text_segments)
        h_visual = self.visual_encoder(visual_segments)
        tags = self.modality_tag.weight.to(h_text.dtype)
        fused = self.layer(torch.stack([h_text + tags[0], h_visual + tags[1]]))
        return fused.mean(dim=0), h_text, h_visual


class EditingBranch(nn.Module):
    """Editing-side score head over the enabled aspect features."""

    def __init__(self, dims, dim: int, binners: dict[str, DurationBinner] | None,
                 with_spatial: bool = True, with_temporal: bool = True,
                 twoway_dim: int = 256, twoway_heads: int = 8, twoway_blocks: int = 2,
                 num_heads: int = 8, ff_mult: int = 4, head_depth: int = 3,
                 dropout: float = 0.1,
                 conv_channels: tuple[int, int] = (64, 32), conv_kernel: int = 3,
                 conv_stride: int = 2, conv_padding: int = 1, seed: int = 0):
        super().__init__()
        if not (with_spatial or with_temporal):
            raise ValueError("editing branch needs at least one enabled aspect")
        if with_temporal and binners is None:
            raise ValueError("temporal aspect requires fitted duration binners")
        self.spatial = (TextLayoutEncoder(
            dims.grid_feat, dims.grid_size, twoway_dim, twoway_heads, twoway_blocks,
            dropout, conv_channels, conv_kernel, conv_stride, conv_padding, seed)
            if with_spatial else None)
        self.temporal = (TemporalFusion(dims.sem_text, dims.sem_frame, dim,
                                        binners, num_heads, ff_mult)
                         if with_temporal else None)
        in_width = (self.spatial.out_width if with_spatial else 0) + \
                   (dim if with_temporal else 0)
        self.head = Mlp(in_width, dim, 2, depth=head_depth, dropout=dropout)

    def forward(self, grid, boxes, text_segments, visual_segments):
        features: dict[str, torch.Tensor] = {}
        parts = []
        if self.spatial is not None:
            features["spatial"] = self.spatial(grid, boxes)
            parts.append(features["spatial"])
        if self.temporal is not None:
            h_tem, h_text, h_visual = self.temporal(text_segments, visual_segments)
            features["temporal"] = h_tem
            features["temporal_text"] = h_text
            features["temporal_visual"] = h_visual
            parts.append(h_tem)
        logits = self.head(torch.cat(parts))
        return logits, features
