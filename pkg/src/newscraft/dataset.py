"""Sample types, dataset manifests, and the chronological split.

A dataset on disk is one ``manifest.json`` plus tensor blobs referenced by
paths relative to the manifest's directory (see docs/manifest_schema.md).
Manifests are immutable once loaded and safe to share across workers.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ManifestError, SplitError
from .tensorio import read_tensor, read_tensor_header
from .validation import (
    ValidationError,
    check_boxes,
    check_grid,
    check_interval,
    check_label,
    check_simplex,
    check_token_matrix,
)

MANIFEST_VERSION = 1

# blob roles every record must reference
REQUIRED_BLOBS = (
    "sent_audio",
    "sent_text",
    "sem_text",
    "sem_frames",
    "ocr_frame_grid",
    "text_segments",
    "visual_segments",
)


@dataclass(frozen=True)
class FeatureDims:
    """Per-corpus feature widths declared by the manifest."""

    sent_audio: int
    sent_text: int
    sem_text: int
    sem_frame: int
    grid_feat: int
    grid_size: int
    sentiment_classes: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "sent_audio_dim": self.sent_audio,
            "sent_text_dim": self.sent_text,
            "sem_text_dim": self.sem_text,
            "sem_frame_dim": self.sem_frame,
            "grid_feat_dim": self.grid_feat,
            "grid_size": self.grid_size,
            "sentiment_classes": list(self.sentiment_classes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureDims":
        try:
            return cls(
                sent_audio=int(d["sent_audio_dim"]),
                sent_text=int(d["sent_text_dim"]),
                sem_text=int(d["sem_text_dim"]),
                sem_frame=int(d["sem_frame_dim"]),
                grid_feat=int(d["grid_feat_dim"]),
                grid_size=int(d["grid_size"]),
                sentiment_classes=tuple(d["sentiment_classes"]),
            )
        except KeyError as e:
            raise ManifestError(f"manifest dims block missing key {e}") from e


@dataclass(frozen=True)
class Segment:
    """One time-span of content: a single embedding (text) or a (k, D) frame stack (visual)."""

    content: np.ndarray
    begin: int
    end: int  # inclusive frame index

    def duration_frames(self) -> int:
        return self.end - self.begin


@dataclass
class SegmentSequence:
    """Ordered segments of one modality with the video's frame context."""

    modality: str  # "text" | "visual"
    segments: list[Segment]
    fps: float
    vframes: int

    def validate(self, name: str = "segments") -> None:
        if self.modality not in ("text", "visual"):
            raise ValidationError(f"{name}: unknown modality {self.modality!r}")
        if not self.segments:
            raise ValidationError(f"{name}: needs at least one segment")
        if not self.fps > 0:
            raise ValidationError(f"{name}: fps must be > 0, got {self.fps}")
        if not self.vframes > 0:
            raise ValidationError(f"{name}: vframes must be > 0, got {self.vframes}")
        widths = set()
        prev_begin = -1
        for i, seg in enumerate(self.segments):
            check_interval(seg.begin, seg.end, self.vframes, f"{name}[{i}]")
            if seg.begin < prev_begin:
                raise ValidationError(f"{name}: segments not sorted by begin frame")
            prev_begin = seg.begin
            c = np.asarray(seg.content)
            widths.add(c.shape[-1])
            if self.modality == "visual" and (c.ndim != 2 or c.shape[0] < 1):
                raise ValidationError(f"{name}[{i}]: visual content must be (k>=1, D)")
            if self.modality == "text" and c.ndim != 1:
                raise ValidationError(f"{name}[{i}]: text content must be a vector")
        if len(widths) != 1:
            raise ValidationError(f"{name}: embedding widths not uniform: {sorted(widths)}")

    def durations_abs(self) -> list[float]:
        """Per-segment exposure in seconds, (end - begin) / fps."""
        return [s.duration_frames() / self.fps for s in self.segments]

    def durations_rel(self) -> list[float]:
        """Per-segment exposure as a fraction of the video, (end - begin) / vframes."""
        return [s.duration_frames() / self.vframes for s in self.segments]


@dataclass
class FeatureBundle:
    """One video's precomputed per-modality features."""

    sent_audio: np.ndarray       # (L_a, D_sa) audio sentiment tokens
    sent_text: np.ndarray        # (L_t, D_st) text sentiment tokens
    sem_text: np.ndarray         # (L_s, D_ct) text semantic tokens
    sem_frames: np.ndarray       # (L_f, D_cv) keyframe embeddings
    ocr_frame_grid: np.ndarray   # (G, G, D_img) patch grid of the text-rich frame
    ocr_boxes: np.ndarray        # (N, 4) normalized [x1, y1, x2, y2]; may be empty

    def validate(self, dims: FeatureDims | None = None) -> None:
        d = dims
        self.sent_audio = check_token_matrix("sent_audio", self.sent_audio,
                                             d.sent_audio if d else None)
        self.sent_text = check_token_matrix("sent_text", self.sent_text,
                                            d.sent_text if d else None)
        self.sem_text = check_token_matrix("sem_text", self.sem_text,
                                           d.sem_text if d else None)
        self.sem_frames = check_token_matrix("sem_frames", self.sem_frames,
                                             d.sem_frame if d else None)
        self.ocr_frame_grid = check_grid("ocr_frame_grid", self.ocr_frame_grid,
                                         d.grid_size if d else None,
                                         d.grid_feat if d else None)
        self.ocr_boxes = check_boxes(self.ocr_boxes)


@dataclass
class AnalysisAnnotations:
    """Optional per-sample measurements consumed by the analysis toolkit."""

    audio_sentiment_probs: np.ndarray | None = None  # simplex over sentiment classes
    ocr_text_pixels: np.ndarray | None = None        # (N_px, 3) RGB values in 0..255
    pixel_counts: tuple[int, ...] | None = None      # pixels per OCR box


@dataclass
class NewsVideoSample:
    """A fully loaded sample: features, segments, label, and metadata."""

    id: str
    published_at: datetime
    label: int
    bundle: FeatureBundle
    text_segments: SegmentSequence
    visual_segments: SegmentSequence
    analysis: AnalysisAnnotations = field(default_factory=AnalysisAnnotations)

    def validate(self, dims: FeatureDims | None = None) -> None:
        self.label = check_label(self.label, f"sample {self.id}: label")
        if self.published_at.tzinfo is None:
            raise ValidationError(f"sample {self.id}: published_at must be timezone-aware")
        self.bundle.validate(dims)
        self.text_segments.validate(f"sample {self.id}: text_segments")
        self.visual_segments.validate(f"sample {self.id}: visual_segments")
        if self.analysis.audio_sentiment_probs is not None:
            self.analysis.audio_sentiment_probs = check_simplex(
                f"sample {self.id}: audio_sentiment_probs",
                self.analysis.audio_sentiment_probs)


@dataclass(frozen=True)
class SegmentIndex:
    """Manifest-side description of a segment sequence (content lives in a blob)."""

    fps: float
    vframes: int
    intervals: tuple[tuple[int, int], ...]
    frame_counts: tuple[int, ...] | None = None  # visual only: frames per segment


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    published_at: datetime
    label: int
    blobs: dict[str, str]  # role -> path relative to manifest dir
    ocr_boxes: tuple[tuple[float, float, float, float], ...]
    text_segments: SegmentIndex
    visual_segments: SegmentIndex
    audio_sentiment_probs: tuple[float, ...] | None = None
    pixel_counts: tuple[int, ...] | None = None


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    dims: FeatureDims
    records: tuple[ManifestRecord, ...]
    version: int = MANIFEST_VERSION

    def __len__(self) -> int:
        return len(self.records)

    def blob_path(self, record: ManifestRecord, role: str) -> Path:
        return (self.root / record.blobs[role]).resolve()

    def subset(self, records) -> "DatasetManifest":
        return replace(self, records=tuple(records))


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def load_manifest(path: str | Path, probe_blobs: bool = True) -> DatasetManifest:
    """Load and fully validate a manifest.

    With ``probe_blobs`` (default) every referenced tensor file is opened and
    its header checked against the declared dims; payloads are not read.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot parse manifest {path}: {e}") from e
    root = path.parent
    if doc.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version {doc.get('version')!r}")
    dims = FeatureDims.from_dict(doc.get("dims", {}))
    records = []
    seen: set[str] = set()
    for entry in doc.get("records", []):
        rec = _parse_record(entry)
        if rec.id in seen:
            raise ManifestError(f"duplicate sample id {rec.id!r}")
        seen.add(rec.id)
        records.append(rec)
    manifest = DatasetManifest(root=root, dims=dims, records=tuple(records))
    if probe_blobs:
        for rec in manifest.records:
            _probe_record(manifest, rec)
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest JSON; blob paths are rewritten relative to ``path``."""
    path = Path(path)
    out_root = path.parent.resolve()
    recs = []
    for rec in manifest.records:
        blobs = {
            role: os.path.relpath((manifest.root / rel).resolve(), out_root)
            for role, rel in rec.blobs.items()
        }
        recs.append(_record_to_dict(rec, blobs))
    doc = {
        "version": manifest.version,
        "dims": manifest.dims.to_dict(),
        "records": recs,
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def temporal_split(manifest: DatasetManifest,
                   ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
                   ) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Chronological train/val/test partition.

    Samples are ordered by (published_at, id); the first floor(r_train*n) go
    to train, the next floor(r_val*n) to val, the remainder to test.
    """
    if not manifest.records:
        raise SplitError("cannot split an empty manifest")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise SplitError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {sum(ratios)!r}")
    order = sorted(manifest.records, key=lambda r: (r.published_at, r.id))
    n = len(order)
    n_train = math.floor(ratios[0] * n + 1e-9)
    n_val = math.floor(ratios[1] * n + 1e-9)
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    for name, part in zip(("train", "val", "test"), parts):
        if not part:
            raise SplitError(f"{name} split is empty for n={n}, ratios={ratios}")
    return tuple(manifest.subset(p) for p in parts)


def load_sample(manifest: DatasetManifest, record: ManifestRecord) -> NewsVideoSample:
    """Materialize one record: read its blobs and build a validated sample."""
    tensors = {role: read_tensor(manifest.blob_path(record, role))
               for role in REQUIRED_BLOBS}
    bundle = FeatureBundle(
        sent_audio=tensors["sent_audio"],
        sent_text=tensors["sent_text"],
        sem_text=tensors["sem_text"],
        sem_frames=tensors["sem_frames"],
        ocr_frame_grid=tensors["ocr_frame_grid"],
        ocr_boxes=np.asarray(record.ocr_boxes, dtype=np.float32).reshape(-1, 4),
    )
    text_seq = _build_text_sequence(record.text_segments, tensors["text_segments"])
    vis_seq = _build_visual_sequence(record.visual_segments, tensors["visual_segments"])
    analysis = AnalysisAnnotations(
        audio_sentiment_probs=(np.asarray(record.audio_sentiment_probs, dtype=np.float64)
                               if record.audio_sentiment_probs is not None else None),
        pixel_counts=record.pixel_counts,
    )
    if "ocr_text_pixels" in record.blobs:
        analysis.ocr_text_pixels = read_tensor(manifest.blob_path(record, "ocr_text_pixels"))
    sample = NewsVideoSample(
        id=record.id,
        published_at=record.published_at,
        label=record.label,
        bundle=bundle,
        text_segments=text_seq,
        visual_segments=vis_seq,
        analysis=analysis,
    )
    sample.validate(manifest.dims)
    return sample


def load_samples(manifest: DatasetManifest) -> list[NewsVideoSample]:
    return [load_sample(manifest, rec) for rec in manifest.records]


def infer_dims(samples: list[NewsVideoSample],
               sentiment_classes: tuple[str, ...] = ()) -> FeatureDims:
    """Derive FeatureDims from loaded samples, checking they are uniform."""
    if not samples:
        raise ValidationError("cannot infer dims from an empty sample list")
    b = samples[0].bundle
    dims = FeatureDims(
        sent_audio=b.sent_audio.shape[1],
        sent_text=b.sent_text.shape[1],
        sem_text=b.sem_text.shape[1],
        sem_frame=b.sem_frames.shape[1],
        grid_feat=b.ocr_frame_grid.shape[2],
        grid_size=b.ocr_frame_grid.shape[0],
        sentiment_classes=tuple(sentiment_classes),
    )
    for s in samples[1:]:
        bb = s.bundle
        got = (bb.sent_audio.shape[1], bb.sent_text.shape[1], bb.sem_text.shape[1],
               bb.sem_frames.shape[1], bb.ocr_frame_grid.shape[2], bb.ocr_frame_grid.shape[0])
        want = (dims.sent_audio, dims.sent_text, dims.sem_text,
                dims.sem_frame, dims.grid_feat, dims.grid_size)
        if got != want:
            raise ValidationError(
                f"sample {s.id}: feature dims {got} differ from first sample {want}")
    return dims


# internal helpers ----------------------------------------------------------


def _parse_record(entry: dict) -> ManifestRecord:
    try:
        rid = str(entry["id"])
        rec = ManifestRecord(
            id=rid,
            published_at=parse_timestamp(entry["published_at"]),
            label=check_label(entry["label"], f"sample {rid}: label"),
            blobs=dict(entry["blobs"]),
            ocr_boxes=tuple(tuple(float(c) for c in box) for box in entry.get("ocr_boxes", [])),
            text_segments=_parse_segment_index(entry["text_segments"], visual=False),
            visual_segments=_parse_segment_index(entry["visual_segments"], visual=True),
            audio_sentiment_probs=(tuple(float(p) for p in entry["audio_sentiment_probs"])
                                   if entry.get("audio_sentiment_probs") is not None else None),
            pixel_counts=(tuple(int(c) for c in entry["pixel_counts"])
                          if entry.get("pixel_counts") is not None else None),
        )
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise ManifestError(f"malformed record {entry.get('id', '<no id>')!r}: {e}") from e
    missing = [role for role in REQUIRED_BLOBS if role not in rec.blobs]
    if missing:
        raise ManifestError(f"sample {rec.id!r}: missing blob role(s) {missing}")
    return rec


def _parse_segment_index(d: dict, visual: bool) -> SegmentIndex:
    intervals = tuple((int(a), int(b)) for a, b in d["intervals"])
    counts = tuple(int(c) for c in d["frame_counts"]) if visual else None
    if visual and len(counts) != len(intervals):
        raise ValueError("frame_counts length must match intervals")
    return SegmentIndex(fps=float(d["fps"]), vframes=int(d["vframes"]),
                        intervals=intervals, frame_counts=counts)


def _record_to_dict(rec: ManifestRecord, blobs: dict[str, str]) -> dict:
    d = {
        "id": rec.id,
        "published_at": format_timestamp(rec.published_at),
        "label": rec.label,
        "blobs": blobs,
        "ocr_boxes": [list(b) for b in rec.ocr_boxes],
        "text_segments": {
            "fps": rec.text_segments.fps,
            "vframes": rec.text_segments.vframes,
            "intervals": [list(iv) for iv in rec.text_segments.intervals],
        },
        "visual_segments": {
            "fps": rec.visual_segments.fps,
            "vframes": rec.visual_segments.vframes,
            "intervals": [list(iv) for iv in rec.visual_segments.intervals],
            "frame_counts": list(rec.visual_segments.frame_counts or ()),
        },
    }
    if rec.audio_sentiment_probs is not None:
        d["audio_sentiment_probs"] = list(rec.audio_sentiment_probs)
    if rec.pixel_counts is not None:
        d["pixel_counts"] = list(rec.pixel_counts)
    return d


def _expected_shapes(dims: FeatureDims, rec: ManifestRecord) -> dict[str, tuple]:
    # None entries are free lengths, checked only for consistency rules below
    n_text = len(rec.text_segments.intervals)
    n_vis_frames = sum(rec.visual_segments.frame_counts or ())
    return {
        "sent_audio": (None, dims.sent_audio),
        "sent_text": (None, dims.sent_text),
        "sem_text": (None, dims.sem_text),
        "sem_frames": (None, dims.sem_frame),
        "ocr_frame_grid": (dims.grid_size, dims.grid_size, dims.grid_feat),
        "text_segments": (n_text, dims.sem_text),
        "visual_segments": (n_vis_frames, dims.sem_frame),
        "ocr_text_pixels": (None, 3),
    }


def _probe_record(manifest: DatasetManifest, rec: ManifestRecord) -> None:
    expected = _expected_shapes(manifest.dims, rec)
    for role in rec.blobs:
        if role not in expected:
            raise ManifestError(f"sample {rec.id!r}: unknown blob role {role!r}")
        p = manifest.blob_path(rec, role)
        if not p.is_file():
            raise ManifestError(f"sample {rec.id!r}: missing blob {role} at {p}")
        try:
            shape = read_tensor_header(p)
        except Exception as e:
            raise ManifestError(f"sample {rec.id!r}: unreadable blob {role}: {e}") from e
        want = expected[role]
        ok = len(shape) == len(want) and all(
            w is None or w == s for w, s in zip(want, shape))
        if not ok:
            raise ManifestError(
                f"sample {rec.id!r}: blob {role} has shape {shape}, expected {want}")
        if any(s is not None and s < 1 for s in shape):
            raise ManifestError(f"sample {rec.id!r}: blob {role} has an empty axis")
    try:
        check_boxes(list(rec.ocr_boxes), f"sample {rec.id}: ocr_boxes")
    except ValidationError as e:
        raise ManifestError(str(e)) from e
    for i, (a, b) in enumerate(rec.text_segments.intervals):
        if not (0 <= a <= b < rec.text_segments.vframes):
            raise ManifestError(f"sample {rec.id!r}: bad text interval [{a}, {b}]")
    for i, (a, b) in enumerate(rec.visual_segments.intervals):
        if not (0 <= a <= b < rec.visual_segments.vframes):
            raise ManifestError(f"sample {rec.id!r}: bad visual interval [{a}, {b}]")
    if rec.audio_sentiment_probs is not None:
        try:
            check_simplex(f"sample {rec.id}: audio_sentiment_probs",
                          rec.audio_sentiment_probs)
        except ValidationError as e:
            raise ManifestError(str(e)) from e
        if len(rec.audio_sentiment_probs) != len(manifest.dims.sentiment_classes):
            raise ManifestError(
                f"sample {rec.id!r}: {len(rec.audio_sentiment_probs)} sentiment probs for "
                f"{len(manifest.dims.sentiment_classes)} declared classes")
    if ("ocr_text_pixels" in rec.blobs) != (rec.pixel_counts is not None):
        raise ManifestError(
            f"sample {rec.id!r}: ocr_text_pixels blob and pixel_counts must come together")
    if rec.pixel_counts is not None:
        rows = read_tensor_header(manifest.blob_path(rec, "ocr_text_pixels"))[0]
        if rows != sum(rec.pixel_counts):
            raise ManifestError(
                f"sample {rec.id!r}: ocr_text_pixels holds {rows} rows, "
                f"pixel_counts sum to {sum(rec.pixel_counts)}")


def _build_text_sequence(idx: SegmentIndex, embs: np.ndarray) -> SegmentSequence:
    if embs.shape[0] != len(idx.intervals):
        raise ManifestError(
            f"text segment blob holds {embs.shape[0]} rows for {len(idx.intervals)} intervals")
    segs = [Segment(content=embs[i], begin=a, end=b)
            for i, (a, b) in enumerate(idx.intervals)]
    return SegmentSequence("text", segs, fps=idx.fps, vframes=idx.vframes)


def _build_visual_sequence(idx: SegmentIndex, frames: np.ndarray) -> SegmentSequence:
    counts = idx.frame_counts or ()
    if frames.shape[0] != sum(counts):
        raise ManifestError(
            f"visual segment blob holds {frames.shape[0]} rows, frame_counts sum to {sum(counts)}")
    segs = []
    offset = 0
    for (a, b), k in zip(idx.intervals, counts):
        segs.append(Segment(content=frames[offset:offset + k], begin=a, end=b))
        offset += k
    return SegmentSequence("visual", segs, fps=idx.fps, vframes=idx.vframes)
