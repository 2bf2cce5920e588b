"""Assembly of the dual-branch detector network."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .blocks import Mlp, set_dropout_generator
from .config import ModelConfig
from .dataset import FeatureDims, NewsVideoSample, SegmentSequence
from .editing import EditingBranch
from .encodings import DurationBinner
from .fusion import FusionStrategy, fuse_scores
from .selection import SelectionBranch


@dataclass
class SampleTensors:
    """One sample's features as torch tensors, ready for a forward pass."""

    id: str
    label: int | None
    sent_audio: torch.Tensor
    sent_text: torch.Tensor
    sem_text: torch.Tensor
    sem_frames: torch.Tensor
    grid: torch.Tensor
    boxes: torch.Tensor
    text_segments: list[tuple[torch.Tensor, float, float]]
    visual_segments: list[tuple[torch.Tensor, float, float]]

    @classmethod
    def from_sample(cls, sample: NewsVideoSample,
                    dtype: torch.dtype = torch.float32) -> "SampleTensors":
        b = sample.bundle
        return cls(
            id=sample.id,
            label=sample.label,
            sent_audio=torch.as_tensor(b.sent_audio, dtype=dtype),
            sent_text=torch.as_tensor(b.sent_text, dtype=dtype),
            sem_text=torch.as_tensor(b.sem_text, dtype=dtype),
            sem_frames=torch.as_tensor(b.sem_frames, dtype=dtype),
            grid=torch.as_tensor(b.ocr_frame_grid, dtype=dtype),
            boxes=torch.as_tensor(b.ocr_boxes, dtype=dtype).reshape(-1, 4),
            text_segments=_segment_triples(sample.text_segments, dtype),
            visual_segments=_segment_triples(sample.visual_segments, dtype),
        )


def _segment_triples(seq: SegmentSequence, dtype) -> list[tuple[torch.Tensor, float, float]]:
    triples = []
    for seg in seq.segments:
        frames = seg.duration_frames()
        triples.append((
            torch.as_tensor(seg.content, dtype=dtype),
            frames / seq.fps,
            frames / seq.vframes,
        ))
    return triples


@dataclass
class NetworkOutput:
    final: torch.Tensor                      # fused score, (2,)
    selection: torch.Tensor | None           # selection-branch score
    editing: torch.Tensor | None             # editing-branch score
    features: dict[str, torch.Tensor]


# canonical feature order for the early-fusion head
_EARLY_ORDER = ("sentiment", "semantic", "spatial", "temporal")


class DualBranchNet(nn.Module):
    """Selection and editing branches with late (or early) score fusion."""

    def __init__(self, config: ModelConfig, dims: FeatureDims,
                 binners: dict[str, DurationBinner] | None = None):
        super().__init__()
        config.validate()
        self.strategy = FusionStrategy(config.fusion)
        self.selection = SelectionBranch(
            dims, config.dim,
            with_sentiment=config.with_sentiment(),
            with_semantic=config.with_semantic(),
            num_heads=config.heads, co_heads=config.co_heads, ff_mult=config.ff_mult,
            head_depth=config.head_depth, dropout=config.dropout,
        ) if config.has_selection() else None
        self.editing = EditingBranch(
            dims, config.dim, binners,
            with_spatial=config.with_spatial(),
            with_temporal=config.with_temporal(),
            twoway_dim=config.twoway_dim, twoway_heads=config.twoway_heads,
            twoway_blocks=config.twoway_blocks,
            num_heads=config.heads, ff_mult=config.ff_mult,
            head_depth=config.head_depth, dropout=config.dropout,
            conv_channels=config.conv_channels, conv_kernel=config.conv_kernel,
            conv_stride=config.conv_stride, conv_padding=config.conv_padding,
            seed=config.seed,
        ) if config.has_editing() else None
        self.early_head = None
        if self.strategy is FusionStrategy.EARLY:
            width = 0
            if config.with_sentiment():
                width += config.dim
            if config.with_semantic():
                width += config.dim
            if config.with_spatial():
                width += self.editing.spatial.out_width
            if config.with_temporal():
                width += config.dim
            self.early_head = Mlp(width, config.dim, 2,
                                  depth=config.head_depth, dropout=config.dropout)

    def forward(self, s: SampleTensors) -> NetworkOutput:
        features: dict[str, torch.Tensor] = {}
        sel_logits = edit_logits = None
        if self.selection is not None:
            sel_logits, f = self.selection(s.sent_audio, s.sent_text,
                                           s.sem_text, s.sem_frames)
            features.update(f)
        if self.editing is not None:
            edit_logits, f = self.editing(s.grid, s.boxes,
                                          s.text_segments, s.visual_segments)
            features.update(f)
        if self.early_head is not None:
            flat = torch.cat([features[k] for k in _EARLY_ORDER if k in features])
            final = self.early_head(flat)
        elif sel_logits is not None and edit_logits is not None:
            final = fuse_scores(sel_logits, edit_logits, self.strategy)
        else:
            final = sel_logits if sel_logits is not None else edit_logits
        return NetworkOutput(final=final, selection=sel_logits,
                             editing=edit_logits, features=features)


def build_network(config: ModelConfig, dims: FeatureDims,
                  binners: dict[str, DurationBinner] | None = None) -> DualBranchNet:
    """Construct a network with parameter init and dropout streams seeded
    from ``config.seed``; identical calls yield identical parameters."""
    torch.manual_seed(config.seed)
    net = DualBranchNet(config, dims, binners)
    gen = torch.Generator().manual_seed(config.seed + 1)
    set_dropout_generator(net, gen)
    return net
