"""Optimization loop: Adam, seeded shuffling, early stopping on val macro F1."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .errors import TrainingDivergedError
from .fusion import total_loss
from .metrics import EvalReport, classification_report
from .network import DualBranchNet, SampleTensors


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_macro_f1: float


def train_network(net: DualBranchNet, config: ModelConfig,
                  train: list[SampleTensors], val: list[SampleTensors],
                  verbose: int = 0) -> tuple[list[EpochStats], int]:
    """Train in place; returns (history, best_epoch).

    The network is left holding the parameters of the best validation epoch
    (macro F1), never a later, worse one. Deterministic for a fixed seed.
    """
    if not train:
        raise ValueError("empty training set")
    if not val:
        raise ValueError("empty validation set")
    optimizer = torch.optim.Adam(net.parameters(), lr=config.lr,
                                 betas=(0.9, 0.999), eps=1e-8)
    rng = np.random.default_rng(config.seed + 2)
    history: list[EpochStats] = []
    best_f1 = -1.0
    best_epoch = -1
    best_state: dict[str, torch.Tensor] | None = None
    stale = 0
    for epoch in range(config.max_epochs):
        net.train()
        order = rng.permutation(len(train))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            optimizer.zero_grad()
            loss = torch.zeros((), dtype=torch.float32)
            for idx in batch:
                s = train[idx]
                out = net(s)
                loss = loss + total_loss(out.final, out.selection, out.editing,
                                         s.label, config.alpha, config.beta)
            loss = loss / len(batch)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}")
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(batch)
        val_report = evaluate_samples(net, val)
        stats = EpochStats(epoch=epoch,
                           train_loss=epoch_loss / len(order),
                           val_accuracy=val_report.accuracy,
                           val_macro_f1=val_report.macro_f1)
        history.append(stats)
        if verbose:
            print(f"epoch {epoch:3d}  loss {stats.train_loss:.4f}  "
                  f"val acc {stats.val_accuracy:.4f}  val f1 {stats.val_macro_f1:.4f}")
        if stats.val_macro_f1 > best_f1:
            best_f1 = stats.val_macro_f1
            best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    net.load_state_dict(best_state)
    net.eval()
    return history, best_epoch


def predict_scores(net: DualBranchNet, samples: list[SampleTensors]) -> np.ndarray:
    """Fused final scores, shape (n, 2)."""
    net.eval()
    rows = []
    with torch.no_grad():
        for s in samples:
            rows.append(net(s).final.detach().cpu().numpy())
    return np.stack(rows)


def evaluate_samples(net: DualBranchNet, samples: list[SampleTensors],
                     warn: bool = False) -> EvalReport:
    """Argmax over the fused score, then standard classification metrics."""
    if not samples:
        raise ValueError("cannot evaluate an empty sample list")
    scores = predict_scores(net, samples)
    preds = scores.argmax(axis=1)
    labels = [s.label for s in samples]
    if any(lb is None for lb in labels):
        raise ValueError("evaluation needs labeled samples")
    return classification_report(labels, preds, ids=[s.id for s in samples],
                                 scores=scores, warn=warn)


def write_history_csv(history: list[EpochStats], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_acc", "val_macro_f1"])
        for h in history:
            writer.writerow([h.epoch, f"{h.train_loss:.8f}",
                             f"{h.val_accuracy:.6f}", f"{h.val_macro_f1:.6f}"])
