"""Binary classification metrics with fake (label 1) as the positive class."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    fake: ClassMetrics
    real: ClassMetrics
    confusion: dict[str, int]          # tp/fp/fn/tn with fake positive
    n: int
    records: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int = 1) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _safe_ratio(num: int, denom: int, what: str, warn: bool) -> float:
    if denom == 0:
        if warn:
            warnings.warn(f"{what} undefined (empty denominator); reporting 0", stacklevel=3)
        return 0.0
    return num / denom


def classification_report(y_true, y_pred, ids=None, scores=None,
                          warn: bool = True) -> EvalReport:
    """Accuracy, macro F1 and per-class precision/recall/F1.

    Undefined ratios (empty denominator) are reported as 0 with a warning.
    """
    t = np.asarray(y_true, dtype=int)
    p = np.asarray(y_pred, dtype=int)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"label/prediction shapes differ: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    bad = set(np.unique(np.concatenate([t, p]))) - {0, 1}
    if bad:
        raise ValueError(f"labels/predictions must be 0 or 1, found {sorted(bad)}")
    tp = int(np.sum((t == 1) & (p == 1)))
    fp = int(np.sum((t == 0) & (p == 1)))
    fn = int(np.sum((t == 1) & (p == 0)))
    tn = int(np.sum((t == 0) & (p == 0)))
    n = t.size

    def f1(prec: float, rec: float) -> float:
        return 0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec)

    fake_p = _safe_ratio(tp, tp + fp, "fake precision", warn)
    fake_r = _safe_ratio(tp, tp + fn, "fake recall", warn)
    real_p = _safe_ratio(tn, tn + fn, "real precision", warn)
    real_r = _safe_ratio(tn, tn + fp, "real recall", warn)
    fake = ClassMetrics(fake_p, fake_r, f1(fake_p, fake_r), tp + fn)
    real = ClassMetrics(real_p, real_r, f1(real_p, real_r), tn + fp)
    records = []
    if ids is not None:
        for i, sid in enumerate(ids):
            rec = {"id": str(sid), "label": int(t[i]), "prediction": int(p[i])}
            if scores is not None:
                rec["scores"] = [float(v) for v in np.asarray(scores[i]).ravel()]
            records.append(rec)
    return EvalReport(
        accuracy=(tp + tn) / n,
        macro_f1=(fake.f1 + real.f1) / 2.0,
        fake=fake,
        real=real,
        confusion={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
        n=n,
        records=records,
    )
