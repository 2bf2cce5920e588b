"""Input validation helpers used by the data layer and the estimator."""

from __future__ import annotations

import numpy as np

from .errors import NewscraftError


class ValidationError(NewscraftError):
    """An input violates a documented invariant."""


def check_token_matrix(name: str, arr: np.ndarray, width: int | None = None,
                       min_len: int = 1) -> np.ndarray:
    """Validate a (length, width) float feature matrix and return it as float32."""
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim != 2:
        raise ValidationError(f"{name}: expected a 2-D token matrix, got shape {a.shape}")
    if a.shape[0] < min_len:
        raise ValidationError(f"{name}: needs at least {min_len} row(s), got {a.shape[0]}")
    if width is not None and a.shape[1] != width:
        raise ValidationError(f"{name}: expected width {width}, got {a.shape[1]}")
    if not np.isfinite(a).all():
        raise ValidationError(f"{name}: contains non-finite values")
    return a


def check_grid(name: str, arr: np.ndarray, size: int | None = None,
               width: int | None = None) -> np.ndarray:
    """Validate a square (G, G, width) patch grid."""
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim != 3 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name}: expected a square (G, G, D) grid, got shape {a.shape}")
    if size is not None and a.shape[0] != size:
        raise ValidationError(f"{name}: expected grid size {size}, got {a.shape[0]}")
    if width is not None and a.shape[2] != width:
        raise ValidationError(f"{name}: expected feature width {width}, got {a.shape[2]}")
    if not np.isfinite(a).all():
        raise ValidationError(f"{name}: contains non-finite values")
    return a


def check_boxes(boxes, name: str = "ocr_boxes") -> np.ndarray:
    """Validate normalized [x1, y1, x2, y2] boxes; an empty list is allowed."""
    b = np.asarray(boxes, dtype=np.float32).reshape(-1, 4)
    if b.size == 0:
        return b.reshape(0, 4)
    if not np.isfinite(b).all():
        raise ValidationError(f"{name}: contains non-finite coordinates")
    x1, y1, x2, y2 = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    if (b < 0).any() or (b > 1).any():
        raise ValidationError(f"{name}: coordinates must lie in [0, 1]")
    if (x1 > x2).any() or (y1 > y2).any():
        raise ValidationError(f"{name}: requires x1 <= x2 and y1 <= y2 per box")
    return b


def check_simplex(name: str, p, tol: float = 1e-6) -> np.ndarray:
    """Validate a probability vector: non-negative, sums to 1 within ``tol``."""
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError(f"{name}: expected a non-empty 1-D probability vector")
    if (v < 0).any():
        raise ValidationError(f"{name}: contains negative entries")
    s = float(v.sum())
    if abs(s - 1.0) > tol:
        raise ValidationError(f"{name}: entries sum to {s!r}, expected 1 +- {tol}")
    return v


def check_label(value, name: str = "label") -> int:
    v = int(value)
    if v not in (0, 1):
        raise ValidationError(f"{name}: must be 0 (real) or 1 (fake), got {value!r}")
    return v


def check_interval(begin: int, end: int, vframes: int, name: str = "interval") -> None:
    if not (0 <= begin <= end < vframes):
        raise ValidationError(
            f"{name}: needs 0 <= begin <= end < vframes, got [{begin}, {end}] "
            f"with vframes={vframes}"
        )


def check_positive(name: str, value: float) -> float:
    v = float(value)
    if not v > 0:
        raise ValidationError(f"{name}: must be > 0, got {value!r}")
    return v
