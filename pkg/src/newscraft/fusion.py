"""Branch-score fusion strategies and the supervised loss."""

from __future__ import annotations

from enum import Enum

import torch
import torch.nn.functional as F

from .errors import FusionError


class FusionStrategy(str, Enum):
    EARLY = "EARLY"
    SUM_LINEAR = "SUM_LINEAR"
    SUM_SIGMOID = "SUM_SIGMOID"
    MUL_SIGMOID = "MUL_SIGMOID"
    SUM_TANH = "SUM_TANH"
    MUL_TANH = "MUL_TANH"


LATE_STRATEGIES = tuple(s for s in FusionStrategy if s is not FusionStrategy.EARLY)


def fuse_scores(selection_logits: torch.Tensor, editing_logits: torch.Tensor,
                strategy: FusionStrategy | str = FusionStrategy.MUL_TANH) -> torch.Tensor:
    """Combine the two branch score vectors elementwise.

    EARLY is not a late-fusion rule (the network concatenates features into a
    single head instead) and is rejected here.
    """
    strategy = FusionStrategy(strategy)
    if strategy is FusionStrategy.EARLY:
        raise FusionError("EARLY fusion combines features, not branch scores")
    s, e = selection_logits, editing_logits
    if s.shape != e.shape:
        raise ValueError(f"branch score shapes differ: {tuple(s.shape)} vs {tuple(e.shape)}")
    if strategy is FusionStrategy.SUM_LINEAR:
        return s + e
    if strategy is FusionStrategy.SUM_SIGMOID:
        return s + torch.sigmoid(e)
    if strategy is FusionStrategy.MUL_SIGMOID:
        return s * torch.sigmoid(e)
    if strategy is FusionStrategy.SUM_TANH:
        return s + torch.tanh(e)
    return s * torch.tanh(e)


def cross_entropy(logits: torch.Tensor, label: int | torch.Tensor) -> torch.Tensor:
    """Softmax cross-entropy over 2 logits for a single sample."""
    target = torch.as_tensor(label, dtype=torch.long, device=logits.device)
    if int(target) not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {int(target)}")
    return F.cross_entropy(logits.unsqueeze(0), target.unsqueeze(0))


def total_loss(final_logits: torch.Tensor,
               selection_logits: torch.Tensor | None,
               editing_logits: torch.Tensor | None,
               label: int,
               alpha: float = 0.1,
               beta: float = 2.0) -> torch.Tensor:
    """CE(final) + alpha * CE(selection) + beta * CE(editing).

    Branch terms are dropped when that branch is disabled (logits None).
    """
    if alpha < 0 or beta < 0:
        raise ValueError(f"loss weights must be >= 0, got alpha={alpha}, beta={beta}")
    loss = cross_entropy(final_logits, label)
    if selection_logits is not None:
        loss = loss + alpha * cross_entropy(selection_logits, label)
    if editing_logits is not None:
        loss = loss + beta * cross_entropy(editing_logits, label)
    return loss
