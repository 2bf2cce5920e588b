"""Material-selection branch: sentiment and semantic aspect fusion."""

from __future__ import annotations

import torch
from torch import nn

from .blocks import CoAttention, Mlp, TransformerLayer


class SentimentFusion(nn.Module):
    """Fuse audio and text sentiment tokens into one vector.

    Each modality is projected to the shared width, the token sequences are
    concatenated, passed through one transformer layer, and mean-pooled.
    """

    def __init__(self, audio_dim: int, text_dim: int, dim: int,
                 num_heads: int = 8, ff_mult: int = 4):
        super().__init__()
        self.proj_audio = nn.Linear(audio_dim, dim)
        self.proj_text = nn.Linear(text_dim, dim)
        self.layer = TransformerLayer(dim, num_heads, ff_mult)

    def forward(self, audio_tokens: torch.Tensor, text_tokens: torch.Tensor) -> torch.Tensor:
        if audio_tokens.shape[0] == 0 or text_tokens.shape[0] == 0:
            raise ValueError("sentiment fusion needs non-empty audio and text sequences")
        tokens = torch.cat([self.proj_audio(audio_tokens), self.proj_text(text_tokens)], dim=0)
        return self.layer(tokens).mean(dim=0)


class SemanticFusion(nn.Module):
    """Fuse text tokens and frame embeddings via co-attention.

    The two cross-enhanced streams are mean-pooled, stacked as a 2-token
    sequence, passed through a transformer layer, and mean-pooled again.
    """

    def __init__(self, text_dim: int, frame_dim: int, dim: int,
                 co_heads: int = 4, num_heads: int = 8, ff_mult: int = 4):
        super().__init__()
        self.proj_text = nn.Linear(text_dim, dim)
        self.proj_frames = nn.Linear(frame_dim, dim)
        self.co_attention = CoAttention(dim, co_heads)
        self.layer = TransformerLayer(dim, num_heads, ff_mult)

    def forward(self, text_tokens: torch.Tensor, frame_tokens: torch.Tensor) -> torch.Tensor:
        if text_tokens.shape[0] == 0 or frame_tokens.shape[0] == 0:
            raise ValueError("semantic fusion needs non-empty text and frame sequences")
        t_enh, v_enh = self.co_attention(self.proj_text(text_tokens),
                                         self.proj_frames(frame_tokens))
        fused = self.layer(torch.stack([t_enh.mean(dim=0), v_enh.mean(dim=0)]))
        return fused.mean(dim=0)


class SelectionBranch(nn.Module):
    """Selection-side score head over the enabled aspect features.

    Returns (logits, features) where features maps "sentiment"/"semantic"
    to the pooled aspect vectors that fed the head.
    """

    def __init__(self, dims, dim: int, with_sentiment: bool = True,
                 with_semantic: bool = True, num_heads: int = 8, co_heads: int = 4,
                 ff_mult: int = 4, head_depth: int = 3, dropout: float = 0.1):
        super().__init__()
        if not (with_sentiment or with_semantic):
            raise ValueError("selection branch needs at least one enabled aspect")
        self.sentiment = (SentimentFusion(dims.sent_audio, dims.sent_text, dim,
                                          num_heads, ff_mult)
                          if with_sentiment else None)
        self.semantic = (SemanticFusion(dims.sem_text, dims.sem_frame, dim,
                                        co_heads, num_heads, ff_mult)
                         if with_semantic else None)
        n_feats = int(with_sentiment) + int(with_semantic)
        self.head = Mlp(n_feats * dim, dim, 2, depth=head_depth, dropout=dropout)

    def forward(self, sent_audio, sent_text, sem_text, sem_frames):
        features: dict[str, torch.Tensor] = {}
        parts = []
        if self.sentiment is not None:
            features["sentiment"] = self.sentiment(sent_audio, sent_text)
            parts.append(features["sentiment"])
        if self.semantic is not None:
            features["semantic"] = self.semantic(sem_text, sem_frames)
            parts.append(features["semantic"])
        logits = self.head(torch.cat(parts))
        return logits, features
