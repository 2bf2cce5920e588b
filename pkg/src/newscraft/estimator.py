"""Scikit-learn style estimator wrapping the dual-branch detector.

``X`` everywhere is a list of NewsVideoSample (or a DatasetManifest, loaded
on the fly); labels live on the samples, so ``y`` is optional and, when
given, must agree with them.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .checkpoint import load_checkpoint, save_checkpoint
from .config import COMPONENTS, ModelConfig
from .dataset import DatasetManifest, NewsVideoSample, infer_dims, load_samples
from .encodings import DurationBinner, fit_duration_bins
from .errors import ConfigError
from .metrics import EvalReport
from .network import SampleTensors, build_network
from .trainer import evaluate_samples, predict_scores, train_network
from .validation import ValidationError


class CreativeProcessDetector(BaseEstimator, ClassifierMixin):
    """Fake-news short-video classifier over precomputed features.

    Two branches score how the video's material was selected (audio/text
    sentiment, text-visual semantics) and how it was edited (on-screen text
    layout, segment splicing); their scores are fused late (``fusion``,
    default multiplicative tanh gating) into the final prediction.

    Follows the scikit-learn estimator contract: constructor stores
    hyperparameters verbatim, ``fit`` learns, fitted state lives in
    trailing-underscore attributes.
    """

    def __init__(self, dim: int = 128, heads: int = 8, co_heads: int = 4,
                 ff_mult: int = 4, head_depth: int = 3, dropout: float = 0.1,
                 twoway_dim: int = 256, twoway_heads: int = 8, twoway_blocks: int = 2,
                 n_duration_bins: int = 10, alpha: float = 0.1, beta: float = 2.0,
                 fusion: str = "MUL_TANH", lr: float = 1e-3, batch_size: int = 128,
                 max_epochs: int = 30, patience: int = 5,
                 components: tuple[str, ...] = COMPONENTS,
                 val_fraction: float = 0.15, seed: int = 0, verbose: int = 0):
        self.dim = dim
        self.heads = heads
        self.co_heads = co_heads
        self.ff_mult = ff_mult
        self.head_depth = head_depth
        self.dropout = dropout
        self.twoway_dim = twoway_dim
        self.twoway_heads = twoway_heads
        self.twoway_blocks = twoway_blocks
        self.n_duration_bins = n_duration_bins
        self.alpha = alpha
        self.beta = beta
        self.fusion = fusion
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.components = components
        self.val_fraction = val_fraction
        self.seed = seed
        self.verbose = verbose

    # -- sklearn API --------------------------------------------------------

    def fit(self, X, y=None, validation=None):
        """Train on ``X``; early-stop on ``validation`` when given, else on a
        chronological tail of ``X`` (``val_fraction``)."""
        samples = _as_samples(X)
        _check_labels(samples, y)
        if validation is not None:
            train_samples, val_samples = samples, _as_samples(validation)
            _check_labels(val_samples, None)
        else:
            train_samples, val_samples = _chronological_holdout(samples, self.val_fraction)
        config = self._make_config()
        dims = infer_dims(train_samples + val_samples,
                          _sentiment_classes(X, validation))
        binners = fit_binners(train_samples, config.n_duration_bins) \
            if config.with_temporal() else None
        net = build_network(config, dims, binners)
        train_t = [SampleTensors.from_sample(s) for s in train_samples]
        val_t = [SampleTensors.from_sample(s) for s in val_samples]
        history, best_epoch = train_network(net, config, train_t, val_t,
                                            verbose=self.verbose)
        self.model_ = net
        self.config_ = config
        self.dims_ = dims
        self.binners_ = binners
        self.history_ = history
        self.best_epoch_ = best_epoch
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X) -> np.ndarray:
        """Fused branch scores, shape (n, 2). Column 1 favors fake."""
        self._check_fitted()
        return predict_scores(self.model_, self._tensors(X))

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)

    def predict_proba(self, X) -> np.ndarray:
        """Softmax over the fused scores (uncalibrated)."""
        scores = self.decision_function(X)
        z = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def score(self, X, y=None, sample_weight=None) -> float:
        report = self.evaluate(X)
        return report.accuracy

    # -- extras -------------------------------------------------------------

    def evaluate(self, X) -> EvalReport:
        """Full metric report on labeled samples."""
        self._check_fitted()
        return evaluate_samples(self.model_, self._tensors(X), warn=True)

    def save(self, out_dir: str | Path) -> Path:
        self._check_fitted()
        return save_checkpoint(out_dir, self.model_, self.config_,
                               self.dims_, self.binners_)

    @classmethod
    def load(cls, ckpt_dir: str | Path) -> "CreativeProcessDetector":
        net, config, dims, binners = load_checkpoint(ckpt_dir)
        est = cls(**{k: getattr(config, k) for k in (
            "dim", "heads", "co_heads", "ff_mult", "head_depth", "dropout",
            "twoway_dim", "twoway_heads", "twoway_blocks", "n_duration_bins",
            "alpha", "beta", "fusion", "lr", "batch_size", "max_epochs",
            "patience", "components", "seed")})
        est.model_ = net
        est.config_ = config
        est.dims_ = dims
        est.binners_ = binners
        est.history_ = []
        est.best_epoch_ = -1
        est.classes_ = np.array([0, 1])
        return est

    # -- internals ----------------------------------------------------------

    def _make_config(self) -> ModelConfig:
        return ModelConfig(
            dim=self.dim, heads=self.heads, co_heads=self.co_heads,
            ff_mult=self.ff_mult, head_depth=self.head_depth, dropout=self.dropout,
            twoway_dim=self.twoway_dim, twoway_heads=self.twoway_heads,
            twoway_blocks=self.twoway_blocks, n_duration_bins=self.n_duration_bins,
            alpha=self.alpha, beta=self.beta, fusion=self.fusion, lr=self.lr,
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            patience=self.patience, seed=self.seed,
            components=tuple(self.components),
        ).validate()

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise ConfigError("this detector is not fitted yet; call fit() first")

    def _tensors(self, X) -> list[SampleTensors]:
        return [SampleTensors.from_sample(s) for s in _as_samples(X)]


def evaluate_checkpoint(ckpt_dir: str | Path, data) -> EvalReport:
    """Load a saved detector and produce a full metric report on ``data``
    (a DatasetManifest or a list of labeled samples)."""
    net, _, _, _ = load_checkpoint(ckpt_dir)
    tensors = [SampleTensors.from_sample(s) for s in _as_samples(data)]
    return evaluate_samples(net, tensors, warn=True)


def fit_binners(samples: list[NewsVideoSample], n_bins: int) -> dict[str, DurationBinner]:
    """Fit per-modality duration binners on the training split only."""
    out = {}
    for key, pick in (("text", lambda s: s.text_segments),
                      ("visual", lambda s: s.visual_segments)):
        abs_values = [d for s in samples for d in pick(s).durations_abs()]
        rel_values = [d for s in samples for d in pick(s).durations_rel()]
        out[key] = fit_duration_bins(abs_values, rel_values, n_bins)
    return out


def _as_samples(X) -> list[NewsVideoSample]:
    if isinstance(X, DatasetManifest):
        return load_samples(X)  # validated against the manifest dims on load
    samples = list(X)
    if not samples:
        raise ValidationError("empty sample collection")
    if not all(isinstance(s, NewsVideoSample) for s in samples):
        raise ValidationError("X must be a DatasetManifest or a list of NewsVideoSample")
    for s in samples:
        s.validate()
    return samples


def _check_labels(samples: list[NewsVideoSample], y) -> None:
    for s in samples:
        if s.label not in (0, 1):
            raise ValidationError(f"sample {s.id}: label must be 0 or 1")
    if y is not None:
        y = np.asarray(y, dtype=int)
        got = np.array([s.label for s in samples])
        if y.shape != got.shape or (y != got).any():
            raise ValidationError("y disagrees with the labels stored on the samples")


def _chronological_holdout(samples, val_fraction: float):
    if not 0.0 < val_fraction < 1.0:
        raise ValidationError(f"val_fraction must be in (0, 1), got {val_fraction}")
    ordered = sorted(samples, key=lambda s: (s.published_at, s.id))
    n_val = max(1, int(len(ordered) * val_fraction))
    if n_val >= len(ordered):
        raise ValidationError(f"cannot hold out {n_val} of {len(ordered)} samples")
    return ordered[:-n_val], ordered[-n_val:]


def _sentiment_classes(X, validation) -> tuple[str, ...]:
    for source in (X, validation):
        if isinstance(source, DatasetManifest):
            return source.dims.sentiment_classes
    return ()
