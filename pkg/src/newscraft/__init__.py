"""Creative-process-aware fake news detection for short videos.

The package covers the full desk-scale workflow: a portable feature/manifest
data model, a synthetic corpus generator with planted cues, the dual-branch
detector (material selection + material editing) behind a scikit-learn style
estimator, the training/ablation harnesses, and the corpus analysis toolkit.
"""

__version__ = "0.1.0"

from .analysis import (
    AnalysisReport,
    audio_sentiment_distribution,
    color_richness,
    corpus_report,
    js_divergence,
    ks_test,
    text_dynamism,
    text_visual_jsd,
)
from .config import COMPONENTS, ModelConfig
from .dataset import (
    DatasetManifest,
    FeatureBundle,
    FeatureDims,
    NewsVideoSample,
    Segment,
    SegmentSequence,
    load_manifest,
    load_samples,
    save_manifest,
    temporal_split,
)
from .errors import (
    ConfigError,
    FusionError,
    ManifestError,
    NewscraftError,
    SplitError,
    TensorFormatError,
    TrainingDivergedError,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import CreativeProcessDetector, evaluate_checkpoint
from .fusion import FusionStrategy, fuse_scores, total_loss
from .metrics import EvalReport, classification_report
from .synth import SynthSpec, generate_corpus, synthesize_dataset
from .tensorio import read_tensor, write_tensor
from .validation import ValidationError

__all__ = [
    "AnalysisReport",
    "COMPONENTS",
    "ConfigError",
    "CreativeProcessDetector",
    "DatasetManifest",
    "EvalReport",
    "FeatureBundle",
    "FeatureDims",
    "FusionError",
    "FusionStrategy",
    "ManifestError",
    "ModelConfig",
    "NewsVideoSample",
    "NewscraftError",
    "Segment",
    "SegmentSequence",
    "SplitError",
    "SynthSpec",
    "TensorFormatError",
    "TrainingDivergedError",
    "ValidationError",
    "audio_sentiment_distribution",
    "classification_report",
    "color_richness",
    "corpus_report",
    "evaluate_checkpoint",
    "fuse_scores",
    "generate_corpus",
    "js_divergence",
    "ks_test",
    "load_checkpoint",
    "load_manifest",
    "load_samples",
    "read_tensor",
    "save_checkpoint",
    "save_manifest",
    "synthesize_dataset",
    "temporal_split",
    "text_dynamism",
    "text_visual_jsd",
    "total_loss",
    "write_tensor",
]
