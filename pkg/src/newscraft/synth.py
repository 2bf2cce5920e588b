"""Synthetic corpus generator with label-correlated planted cues.

Four controllable effects mirror the corpus-level discrepancies the analysis
toolkit measures; each effect size in [0, 1] scales its cue from absent
(fake and real identically distributed) to strong:

  sentiment_effect  fake samples skew toward emotionally charged audio classes
  semantic_effect   fake frame embeddings drift away from the text topic
  color_effect      fake on-screen text uses fewer distinct colors
  dynamism_effect   fake text exposure durations become long and uniform

With all effects at zero the label carries no information. Generation is
fully determined by (spec, seed); the same pair always yields byte-identical
output directories.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .dataset import (
    AnalysisAnnotations,
    DatasetManifest,
    FeatureBundle,
    FeatureDims,
    NewsVideoSample,
    Segment,
    SegmentSequence,
    load_manifest,
)
from .tensorio import write_tensor
from .validation import ValidationError

SENTIMENT_CLASSES = ("angry", "happy", "neutral", "sad")
NEUTRAL_CLASS = "neutral"


@dataclass
class SynthSpec:
    """Knobs for one synthetic corpus.

    ``world_seed`` fixes the population-level constants (class feature
    directions, color direction) so corpora drawn with different ``seed``
    values are i.i.d. samples from the same population; the generation
    ``seed`` drives everything per-sample.
    """

    n_samples: int = 200
    fake_fraction: float = 0.5
    sentiment_effect: float = 0.0
    semantic_effect: float = 0.0
    color_effect: float = 0.0
    dynamism_effect: float = 0.0
    world_seed: int = 0
    # feature widths
    sent_audio_dim: int = 16
    sent_text_dim: int = 16
    sem_text_dim: int = 24
    sem_frame_dim: int = 24
    grid_feat_dim: int = 32
    grid_size: int = 6
    # sequence geometry
    audio_tokens: tuple[int, int] = (2, 6)
    text_tokens: tuple[int, int] = (2, 8)
    sem_text_tokens: tuple[int, int] = (4, 10)
    frames: tuple[int, int] = (3, 8)
    text_segments: tuple[int, int] = (3, 8)
    visual_segments: tuple[int, int] = (2, 6)
    frames_per_segment: tuple[int, int] = (1, 4)
    boxes: tuple[int, int] = (1, 4)
    pixels_per_box: tuple[int, int] = (30, 80)
    no_text_rate: float = 0.1
    fps: float = 30.0

    def validate(self) -> None:
        if self.n_samples <= 0:
            raise ValidationError(f"n_samples must be > 0, got {self.n_samples}")
        if not 0.0 <= self.fake_fraction <= 1.0:
            raise ValidationError(f"fake_fraction must be in [0, 1], got {self.fake_fraction}")
        for name in ("sentiment_effect", "semantic_effect", "color_effect", "dynamism_effect"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {v}")
        for name in ("sent_audio_dim", "sent_text_dim", "sem_text_dim", "sem_frame_dim",
                     "grid_feat_dim", "grid_size"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        spec = cls()
        for key, value in d.items():
            if not hasattr(spec, key):
                raise ValidationError(f"unknown synth spec field {key!r}")
            default = getattr(spec, key)
            if isinstance(default, tuple):
                value = tuple(value)
            setattr(spec, key, value)
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_corpus(spec: SynthSpec, seed: int) -> tuple[FeatureDims, list[NewsVideoSample]]:
    """Generate in-memory samples; deterministic for a fixed (spec, seed)."""
    spec.validate()
    rng = np.random.default_rng(np.random.PCG64(seed))
    dims = FeatureDims(
        sent_audio=spec.sent_audio_dim,
        sent_text=spec.sent_text_dim,
        sem_text=spec.sem_text_dim,
        sem_frame=spec.sem_frame_dim,
        grid_feat=spec.grid_feat_dim,
        grid_size=spec.grid_size,
        sentiment_classes=SENTIMENT_CLASSES,
    )
    n = spec.n_samples
    n_fake = int(round(spec.fake_fraction * n))
    labels = np.zeros(n, dtype=int)
    labels[:n_fake] = 1
    rng.shuffle(labels)

    # population constants shared by every corpus with this world_seed
    world = np.random.default_rng(np.random.PCG64(spec.world_seed))
    audio_dirs = _unit_rows(world, len(SENTIMENT_CLASSES), spec.sent_audio_dim)
    text_sent_dirs = _unit_rows(world, len(SENTIMENT_CLASSES), spec.sent_text_dim)
    color_dir = _unit_rows(world, 1, spec.grid_feat_dim)[0]
    topic_anchor = _unit_rows(world, 1, spec.sem_text_dim)[0]

    base_time = datetime(2021, 1, 1, tzinfo=timezone.utc)
    samples = []
    for i in range(n):
        label = int(labels[i])
        samples.append(_generate_sample(
            spec, rng, dims, label,
            sample_id=f"v{i:05d}",
            published_at=base_time + timedelta(hours=i),
            audio_dirs=audio_dirs,
            text_sent_dirs=text_sent_dirs,
            color_dir=color_dir,
            topic_anchor=topic_anchor,
        ))
    return dims, samples


def synthesize_dataset(spec: SynthSpec, seed: int, out_dir: str | Path) -> DatasetManifest:
    """Generate a corpus and write it as a manifest + blobs under ``out_dir``."""
    dims, samples = generate_corpus(spec, seed)
    manifest_path = write_corpus(dims, samples, out_dir)
    return load_manifest(manifest_path)


def write_corpus(dims: FeatureDims, samples: list[NewsVideoSample],
                 out_dir: str | Path) -> Path:
    """Serialize samples to ``out_dir/manifest.json`` plus blobs/; returns the manifest path."""
    out = Path(out_dir)
    blob_dir = out / "blobs"
    blob_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for s in samples:
        blobs = {}

        def put(role: str, array: np.ndarray) -> None:
            rel = f"blobs/{s.id}.{role}.frt"
            write_tensor(array, out / rel)
            blobs[role] = rel

        put("sent_audio", s.bundle.sent_audio)
        put("sent_text", s.bundle.sent_text)
        put("sem_text", s.bundle.sem_text)
        put("sem_frames", s.bundle.sem_frames)
        put("ocr_frame_grid", s.bundle.ocr_frame_grid)
        put("text_segments", np.stack([seg.content for seg in s.text_segments.segments]))
        put("visual_segments", np.concatenate(
            [seg.content for seg in s.visual_segments.segments], axis=0))
        if s.analysis.ocr_text_pixels is not None:
            put("ocr_text_pixels", s.analysis.ocr_text_pixels)
        entry = {
            "id": s.id,
            "published_at": s.published_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "label": s.label,
            "blobs": blobs,
            "ocr_boxes": [[float(c) for c in box] for box in s.bundle.ocr_boxes],
            "text_segments": {
                "fps": s.text_segments.fps,
                "vframes": s.text_segments.vframes,
                "intervals": [[seg.begin, seg.end] for seg in s.text_segments.segments],
            },
            "visual_segments": {
                "fps": s.visual_segments.fps,
                "vframes": s.visual_segments.vframes,
                "intervals": [[seg.begin, seg.end] for seg in s.visual_segments.segments],
                "frame_counts": [seg.content.shape[0] for seg in s.visual_segments.segments],
            },
        }
        if s.analysis.audio_sentiment_probs is not None:
            entry["audio_sentiment_probs"] = [float(p) for p in s.analysis.audio_sentiment_probs]
        if s.analysis.pixel_counts is not None:
            entry["pixel_counts"] = list(s.analysis.pixel_counts)
        records.append(entry)
    doc = {"version": 1, "dims": dims.to_dict(), "records": records}
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return manifest_path


# sample construction -------------------------------------------------------


def _generate_sample(spec, rng, dims, label, sample_id, published_at,
                     audio_dirs, text_sent_dirs, color_dir,
                     topic_anchor) -> NewsVideoSample:
    fake = label == 1

    # Obs-1 cue: audio sentiment class, skewed toward charged classes for fakes
    cls = _draw_sentiment_class(rng, fake, spec.sentiment_effect)
    probs = _class_probs(rng, cls, len(SENTIMENT_CLASSES))
    sent_audio = _tokens_around(rng, audio_dirs[cls] * 2.5,
                                _randint(rng, spec.audio_tokens), 0.4)
    sent_text = _tokens_around(rng, text_sent_dirs[cls] * 2.0,
                               _randint(rng, spec.text_tokens), 0.4)

    # Obs-2 cue: frame embeddings drift off the text topic for fakes; topics
    # scatter around a population anchor so the drift is detectable
    topic = _renorm(topic_anchor + 0.5 * rng.normal(size=spec.sem_text_dim))
    sem_text = _tokens_around(rng, topic * 3.0, _randint(rng, spec.sem_text_tokens), 0.4)
    if fake and spec.semantic_effect > 0:
        off = _unit_rows(rng, 1, spec.sem_frame_dim)[0]
        frame_dir = _renorm((1.0 - spec.semantic_effect) * topic + spec.semantic_effect * off)
    else:
        frame_dir = topic
    sem_frames = _tokens_around(rng, frame_dir * 3.0, _randint(rng, spec.frames), 0.4)

    # Obs-3 cue: distinct-color budget of the on-screen text
    k_draw = int(rng.integers(4, 17))
    if fake:
        n_colors = max(1, int(round(k_draw * (1.0 - 0.9 * spec.color_effect))))
    else:
        n_colors = k_draw
    no_text = rng.random() < spec.no_text_rate
    boxes = _draw_boxes(rng, 0 if no_text else _randint(rng, spec.boxes))
    pixels, pixel_counts = _draw_text_pixels(rng, boxes, n_colors, spec.pixels_per_box)
    grid = _draw_grid(rng, spec.grid_size, spec.grid_feat_dim, boxes, n_colors, color_dir)

    # Obs-4 cue: text exposure durations, long-and-uniform for fakes
    vframes = int(rng.integers(400, 901))
    rel_durations = _draw_rel_durations(rng, fake, spec.dynamism_effect,
                                        _randint(rng, spec.text_segments))
    text_intervals = _place_intervals(rng, rel_durations, vframes)
    text_embs = _tokens_around(rng, topic * 1.0, len(text_intervals), 0.5)
    text_segments = SegmentSequence(
        "text",
        [Segment(text_embs[j], a, b) for j, (a, b) in enumerate(text_intervals)],
        fps=spec.fps, vframes=vframes)

    vis_intervals = _partition_intervals(rng, _randint(rng, spec.visual_segments), vframes)
    vis_segs = []
    for a, b in vis_intervals:
        k = _randint(rng, spec.frames_per_segment)
        vis_segs.append(Segment(
            rng.normal(0.0, 0.5, size=(k, spec.sem_frame_dim)).astype(np.float32), a, b))
    visual_segments = SegmentSequence("visual", vis_segs, fps=spec.fps, vframes=vframes)

    bundle = FeatureBundle(
        sent_audio=sent_audio, sent_text=sent_text, sem_text=sem_text,
        sem_frames=sem_frames, ocr_frame_grid=grid, ocr_boxes=boxes)
    analysis = AnalysisAnnotations(
        audio_sentiment_probs=probs,
        ocr_text_pixels=pixels,
        pixel_counts=pixel_counts,
    )
    sample = NewsVideoSample(
        id=sample_id, published_at=published_at, label=label, bundle=bundle,
        text_segments=text_segments, visual_segments=visual_segments, analysis=analysis)
    sample.validate()
    return sample


def _draw_sentiment_class(rng, fake: bool, effect: float) -> int:
    # real: neutral 0.6, charged classes share 0.4; fake shifts mass off neutral
    p_neutral = 0.6 - (0.55 * effect if fake else 0.0)
    classes = list(SENTIMENT_CLASSES)
    neutral = classes.index(NEUTRAL_CLASS)
    p = np.full(len(classes), (1.0 - p_neutral) / (len(classes) - 1))
    p[neutral] = p_neutral
    return int(rng.choice(len(classes), p=p))


def _class_probs(rng, cls: int, n_classes: int) -> np.ndarray:
    base = rng.dirichlet(np.ones(n_classes))
    p = 0.3 * base
    p[cls] += 0.7
    return p / p.sum()


def _draw_rel_durations(rng, fake: bool, effect: float, n_seg: int) -> np.ndarray:
    dispersed = rng.uniform(0.05, 0.5, size=n_seg)
    if not fake or effect == 0.0:
        return dispersed
    static = 0.45 + rng.normal(0.0, 0.01, size=n_seg)
    return np.clip((1.0 - effect) * dispersed + effect * static, 0.01, 0.6)


def _place_intervals(rng, rel_durations, vframes: int) -> list[tuple[int, int]]:
    intervals = []
    for rel in rel_durations:
        length = max(1, int(round(rel * vframes)))
        length = min(length, vframes - 1)
        begin = int(rng.integers(0, vframes - length))
        intervals.append((begin, begin + length))
    return sorted(intervals)


def _partition_intervals(rng, n_seg: int, vframes: int) -> list[tuple[int, int]]:
    cuts = np.sort(rng.choice(np.arange(1, vframes - 1), size=n_seg - 1, replace=False)) \
        if n_seg > 1 else np.array([], dtype=int)
    bounds = [0, *cuts.tolist(), vframes - 1]
    return [(bounds[i], bounds[i + 1]) for i in range(n_seg)]


def _draw_boxes(rng, n_boxes: int) -> np.ndarray:
    if n_boxes == 0:
        return np.zeros((0, 4), dtype=np.float32)
    x1 = rng.uniform(0.02, 0.55, n_boxes)
    y1 = rng.uniform(0.02, 0.55, n_boxes)
    w = rng.uniform(0.1, 0.35, n_boxes)
    h = rng.uniform(0.08, 0.3, n_boxes)
    boxes = np.stack([x1, y1, np.minimum(x1 + w, 1.0), np.minimum(y1 + h, 1.0)], axis=1)
    return boxes.astype(np.float32)


def _draw_text_pixels(rng, boxes, n_colors: int, pixels_per_box):
    """RGB payloads built from exactly ``n_colors`` quantization-distinct colors."""
    if boxes.shape[0] == 0:
        return None, None
    # palette on 4-bit bucket centers so the distinct count survives quantization
    buckets = rng.choice(16 ** 3, size=n_colors, replace=False)
    palette = np.stack([(buckets // 256) % 16, (buckets // 16) % 16, buckets % 16], axis=1)
    palette = palette * 16 + 8
    counts = []
    rows = []
    for b in range(boxes.shape[0]):
        n_px = _randint(rng, pixels_per_box)
        idx = rng.integers(0, n_colors, size=n_px)
        if b == 0:  # guarantee the full palette appears
            idx[:n_colors] = np.arange(n_colors)
            n_px = max(n_px, n_colors)
            idx = idx[:n_px]
        rows.append(palette[idx])
        counts.append(n_px)
    return np.concatenate(rows, axis=0).astype(np.float32), tuple(counts)


def _draw_grid(rng, g: int, d: int, boxes, n_colors: int, color_dir) -> np.ndarray:
    grid = rng.normal(0.0, 0.3, size=(g, g, d)).astype(np.float32)
    if boxes.shape[0] == 0:
        return grid
    richness = (n_colors / 16.0) * 2.5
    mask = np.zeros((g, g), dtype=bool)
    for x1, y1, x2, y2 in boxes:
        c0, c1 = int(x1 * g), min(g - 1, int(x2 * g))
        r0, r1 = int(y1 * g), min(g - 1, int(y2 * g))
        mask[r0:r1 + 1, c0:c1 + 1] = True
    grid[mask] += (richness * color_dir).astype(np.float32)
    return grid


def _tokens_around(rng, center, n: int, noise: float) -> np.ndarray:
    return (center[None, :] + rng.normal(0.0, noise, size=(n, center.shape[0]))
            ).astype(np.float32)


def _unit_rows(rng, n: int, d: int) -> np.ndarray:
    m = rng.normal(0.0, 1.0, size=(n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _renorm(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _randint(rng, bounds: tuple[int, int]) -> int:
    lo, hi = bounds
    return int(rng.integers(lo, hi + 1))
