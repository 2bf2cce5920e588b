"""Corpus-level measurements comparing fake and real videos.

Four observations are measured per video and compared across labels:

  1. audio sentiment: argmax class proportions, charged (non-neutral) share
  2. text-visual divergence: mean Jensen-Shannon divergence between the
     normalized pooled text feature and each frame feature
  3. on-screen text color richness: distinct colors after 4-bit-per-channel
     quantization over all OCR boxes
  4. text dynamism: sigma * (1 - mu) over relative exposure durations

Distributional gaps get a two-sample KS test (divergence, dynamism) or a
Welch t-test (color richness); significance is read at p < 0.05.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as _scipy_stats

from .dataset import DatasetManifest, NewsVideoSample, load_samples
from .validation import ValidationError, check_simplex

NEUTRAL_CLASS = "neutral"
SIGNIFICANCE_LEVEL = 0.05


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence in bits: 0.5 KL(P||M) + 0.5 KL(Q||M) with
    M = (P+Q)/2 and base-2 logs. Symmetric, in [0, 1]."""
    p = check_simplex("P", p)
    q = check_simplex("Q", q)
    if p.shape != q.shape:
        raise ValidationError(f"P and Q lengths differ: {p.size} vs {q.size}")
    m = (p + q) / 2.0
    return max(0.0, 0.5 * _kl_bits(p, m) + 0.5 * _kl_bits(q, m))


def _kl_bits(p: np.ndarray, m: np.ndarray) -> float:
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / m[nz])))


def softmax(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    v = v - v.max()
    e = np.exp(v)
    return e / e.sum()


def shift_l1(x, eps: float = 1e-9) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    v = v - v.min() + eps
    return v / v.sum()


def text_visual_jsd(sample: NewsVideoSample, normalization: str = "softmax") -> float:
    """Mean JS divergence between the pooled text feature and each frame.

    Features are mapped to distributions by softmax (default) or by
    shift-and-L1 when ``normalization="shift_l1"``.
    """
    norm = {"softmax": softmax, "shift_l1": shift_l1}.get(normalization)
    if norm is None:
        raise ValidationError(f"unknown normalization {normalization!r}")
    text = sample.bundle.sem_text
    frames = sample.bundle.sem_frames
    if text.shape[1] != frames.shape[1]:
        raise ValidationError(
            f"sample {sample.id}: text width {text.shape[1]} != frame width {frames.shape[1]}")
    p = norm(text.mean(axis=0))
    values = [js_divergence(p, norm(frame)) for frame in frames]
    return float(np.mean(values))


def text_dynamism(relative_durations) -> float:
    """Dynamism indicator sigma * (1 - mu) over exposure-duration fractions
    (population standard deviation)."""
    d = np.asarray(relative_durations, dtype=np.float64)
    if d.size == 0:
        raise ValidationError("dynamism needs at least one duration")
    if (d < 0).any() or (d > 1).any():
        raise ValidationError("relative durations must lie in [0, 1]")
    mu = float(d.mean())
    sigma = float(d.std())  # population
    return sigma * (1.0 - mu)


def sample_dynamism(sample: NewsVideoSample) -> float:
    return text_dynamism(sample.text_segments.durations_rel())


def ks_test(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov test.

    D is the supremum ECDF gap; the p-value comes from the asymptotic
    Kolmogorov distribution at sqrt(nm/(n+m)) * D.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValidationError("KS test needs two non-empty samples")
    points = np.concatenate([a, b])
    fa = np.searchsorted(a, points, side="right") / a.size
    fb = np.searchsorted(b, points, side="right") / b.size
    d = float(np.abs(fa - fb).max())
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    return d, kolmogorov_sf(en * d)


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """Survival function of the Kolmogorov distribution,
     2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2), clipped to [0, 1]."""
    if lam <= 0:
        return 1.0
    total = 0.0
    for k in range(1, terms + 1):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += -term if k % 2 == 0 else term
        if term < 1e-16:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_critical_value(n: int, m: int, alpha: float = 0.05) -> float:
    """Asymptotic two-sample KS rejection threshold for level ``alpha``."""
    c = {0.10: 1.22, 0.05: 1.358, 0.01: 1.628}.get(alpha)
    if c is None:
        raise ValidationError(f"no tabulated coefficient for alpha={alpha}")
    return c * math.sqrt((n + m) / (n * m))


def welch_t_test(a, b) -> tuple[float, float]:
    """Two-sample t-test with unequal variances (two-sided)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValidationError("t-test needs at least two values per sample")
    t, p = _scipy_stats.ttest_ind(a, b, equal_var=False)
    return float(t), float(p)


def color_richness(pixels) -> int:
    """Distinct colors after 4-bit-per-channel quantization.

    ``pixels`` is an (N, 3) array of RGB values in 0..255 covering all the
    video's OCR boxes.
    """
    px = np.asarray(pixels)
    if px.ndim != 2 or px.shape[1] != 3 or px.shape[0] == 0:
        raise ValidationError(f"pixels must be a non-empty (N, 3) array, got {px.shape}")
    if (px < 0).any() or (px > 255).any():
        raise ValidationError("pixel values must lie in 0..255")
    quant = (px.astype(np.int64) >> 4)
    codes = quant[:, 0] * 256 + quant[:, 1] * 16 + quant[:, 2]
    return int(np.unique(codes).size)


def audio_sentiment_distribution(samples: list[NewsVideoSample],
                                 classes: tuple[str, ...]) -> dict:
    """Per-label argmax-class proportions plus raw counts.

    Samples without sentiment probabilities are excluded and counted.
    """
    counts = {0: np.zeros(len(classes), dtype=int), 1: np.zeros(len(classes), dtype=int)}
    excluded = 0
    for s in samples:
        probs = s.analysis.audio_sentiment_probs
        if probs is None:
            excluded += 1
            continue
        if len(probs) != len(classes):
            raise ValidationError(
                f"sample {s.id}: {len(probs)} probs for {len(classes)} classes")
        counts[s.label][int(np.argmax(probs))] += 1
    result = {"classes": list(classes), "excluded": excluded}
    for label, name in ((1, "fake"), (0, "real")):
        c = counts[label]
        total = int(c.sum())
        props = (c / total).tolist() if total else [0.0] * len(classes)
        charged = sum(p for p, cls in zip(props, classes) if cls != NEUTRAL_CLASS)
        result[name] = {
            "counts": c.tolist(),
            "proportions": props,
            "charged_share": charged,
            "n": total,
        }
    return result


@dataclass
class ObservationResult:
    name: str
    available: bool
    note: str = ""
    fake_values: list[float] = field(default_factory=list)
    real_values: list[float] = field(default_factory=list)
    fake_mean: float | None = None
    real_mean: float | None = None
    test: str | None = None            # "ks" | "t"
    statistic: float | None = None
    p_value: float | None = None
    significant: bool | None = None
    direction: str | None = None       # "fake_higher" | "fake_lower" | "none"
    histogram: dict | None = None


@dataclass
class AnalysisReport:
    n_fake: int
    n_real: int
    significance_level: float
    sentiment: dict
    divergence: ObservationResult
    color: ObservationResult
    dynamism: ObservationResult

    def to_dict(self) -> dict:
        return {
            "n_fake": self.n_fake,
            "n_real": self.n_real,
            "significance_level": self.significance_level,
            "sentiment": self.sentiment,
            "divergence": asdict(self.divergence),
            "color": asdict(self.color),
            "dynamism": asdict(self.dynamism),
        }


def corpus_report(data: DatasetManifest | list[NewsVideoSample],
                  sentiment_classes: tuple[str, ...] | None = None,
                  normalization: str = "softmax",
                  n_hist_bins: int = 20) -> AnalysisReport:
    """Run all four observations over a corpus and attach significance tests."""
    if isinstance(data, DatasetManifest):
        classes = data.dims.sentiment_classes
        samples = load_samples(data)
    else:
        samples = list(data)
        classes = sentiment_classes or ()
    if not samples:
        raise ValidationError("cannot analyze an empty corpus")
    n_fake = sum(1 for s in samples if s.label == 1)
    n_real = len(samples) - n_fake

    sentiment = audio_sentiment_distribution(samples, classes) if classes else {
        "classes": [], "note": "no sentiment classes declared"}

    divergence = _two_sample_observation(
        "text_visual_divergence", samples,
        value_fn=lambda s: text_visual_jsd(s, normalization),
        applies=lambda s: s.bundle.sem_text.shape[1] == s.bundle.sem_frames.shape[1],
        test="ks", n_hist_bins=n_hist_bins)

    color = _two_sample_observation(
        "color_richness", samples,
        value_fn=lambda s: float(color_richness(s.analysis.ocr_text_pixels)),
        applies=lambda s: s.analysis.ocr_text_pixels is not None,
        test="t", n_hist_bins=n_hist_bins)

    dynamism = _two_sample_observation(
        "text_dynamism", samples,
        value_fn=sample_dynamism,
        applies=lambda s: len(s.text_segments.segments) > 0,
        test="ks", n_hist_bins=n_hist_bins)

    return AnalysisReport(
        n_fake=n_fake, n_real=n_real,
        significance_level=SIGNIFICANCE_LEVEL,
        sentiment=sentiment, divergence=divergence,
        color=color, dynamism=dynamism)


def write_report(report: AnalysisReport, out_dir: str | Path) -> None:
    """Emit report.json plus one plot-ready CSV per observation."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    if report.sentiment.get("classes"):
        with open(out / "obs_sentiment.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["class", "fake_proportion", "real_proportion",
                        "fake_count", "real_count"])
            for i, cls in enumerate(report.sentiment["classes"]):
                w.writerow([cls,
                            f"{report.sentiment['fake']['proportions'][i]:.6f}",
                            f"{report.sentiment['real']['proportions'][i]:.6f}",
                            report.sentiment["fake"]["counts"][i],
                            report.sentiment["real"]["counts"][i]])
    for obs in (report.divergence, report.color, report.dynamism):
        if not obs.available or obs.histogram is None:
            continue
        with open(out / f"obs_{obs.name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "fake_count", "real_count",
                        "fake_density", "real_density"])
            h = obs.histogram
            for i in range(len(h["fake_counts"])):
                w.writerow([f"{h['edges'][i]:.8f}", f"{h['edges'][i + 1]:.8f}",
                            h["fake_counts"][i], h["real_counts"][i],
                            f"{h['fake_density'][i]:.8f}", f"{h['real_density'][i]:.8f}"])


def _two_sample_observation(name, samples, value_fn, applies, test,
                            n_hist_bins) -> ObservationResult:
    fake, real, skipped = [], [], 0
    for s in samples:
        if not applies(s):
            skipped += 1
            continue
        value = value_fn(s)
        (fake if s.label == 1 else real).append(float(value))
    if not fake or not real:
        return ObservationResult(
            name=name, available=False,
            note=f"needs values for both labels; skipped {skipped} sample(s), "
                 f"got fake={len(fake)}, real={len(real)}")
    if test == "ks":
        statistic, p = ks_test(fake, real)
    else:
        statistic, p = welch_t_test(fake, real)
    fake_mean = float(np.mean(fake))
    real_mean = float(np.mean(real))
    if fake_mean > real_mean:
        direction = "fake_higher"
    elif fake_mean < real_mean:
        direction = "fake_lower"
    else:
        direction = "none"
    note = f"skipped {skipped} sample(s) without this measurement" if skipped else ""
    return ObservationResult(
        name=name, available=True, note=note,
        fake_values=fake, real_values=real,
        fake_mean=fake_mean, real_mean=real_mean,
        test=test, statistic=statistic, p_value=p,
        significant=p < SIGNIFICANCE_LEVEL,
        direction=direction,
        histogram=_histogram(fake, real, n_hist_bins))


def _histogram(fake, real, n_bins: int) -> dict:
    lo = min(min(fake), min(real))
    hi = max(max(fake), max(real))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, n_bins + 1)
    fc, _ = np.histogram(fake, bins=edges)
    rc, _ = np.histogram(real, bins=edges)
    width = edges[1] - edges[0]
    return {
        "edges": edges.tolist(),
        "fake_counts": fc.tolist(),
        "real_counts": rc.tolist(),
        "fake_density": (fc / (fc.sum() * width)).tolist(),
        "real_density": (rc / (rc.sum() * width)).tolist(),
    }
