"""Portable binary tensor files.

Layout (all integers little-endian):

    bytes 0..7    magic ``FRTENSOR``
    byte  8       dtype code (0 = float32 little-endian, the only code in v1)
    byte  9       rank (1..255)
    next 4*rank   dims, u32 each, all >= 1
    rest          payload, row-major float32, exactly prod(dims) values

Files round-trip bit-exactly: ``read_tensor(write_tensor(a, p))`` returns an
array equal to ``a`` byte for byte. Readers are reentrant; writers assume
exclusive access to their target path.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    TensorFormatError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
)

MAGIC = b"FRTENSOR"
DTYPE_F32 = 0
MAX_RANK = 64  # the header field is u8, but numpy caps ndarray rank at 64

_HEADER_FIXED = len(MAGIC) + 2  # magic + dtype code + rank


def write_tensor(array: np.ndarray, path: str | Path) -> None:
    """Write ``array`` (cast to contiguous float32) to ``path``."""
    if np.asarray(array).ndim < 1:
        raise TensorFormatError("tensor rank must be >= 1 (got a scalar)")
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim > MAX_RANK:
        raise TensorFormatError(f"tensor rank {arr.ndim} exceeds maximum {MAX_RANK}")
    if any(d < 1 for d in arr.shape):
        raise TensorFormatError(f"all dims must be >= 1, got shape {arr.shape}")
    header = MAGIC + struct.pack("<BB", DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor file, returning a float32 array.

    Raises BadMagicError, UnsupportedDtypeError or TruncatedPayloadError for
    the corresponding format violations.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    shape, offset = _parse_header(raw, str(path))
    count = int(np.prod(shape))
    expected = offset + 4 * count
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload truncated, expected {4 * count} bytes "
            f"for shape {shape}, found {len(raw) - offset}"
        )
    if len(raw) > expected:
        raise TensorFormatError(
            f"{path}: {len(raw) - expected} trailing bytes after payload"
        )
    flat = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    return flat.reshape(shape).copy()


def read_tensor_header(path: str | Path) -> tuple[int, ...]:
    """Return the declared shape without loading the payload.

    Also verifies the file size matches the declared payload, so a header
    probe still catches truncated files.
    """
    p = Path(path)
    size = p.stat().st_size
    with open(p, "rb") as fh:
        raw = fh.read(_HEADER_FIXED + 4 * MAX_RANK)
    shape, offset = _parse_header(raw, str(path))
    expected = offset + 4 * int(np.prod(shape))
    if size < expected:
        raise TruncatedPayloadError(
            f"{path}: payload truncated, file holds {size - offset} payload bytes, "
            f"header declares {expected - offset}"
        )
    if size > expected:
        raise TensorFormatError(f"{path}: {size - expected} trailing bytes after payload")
    return shape


def _parse_header(raw: bytes, name: str) -> tuple[tuple[int, ...], int]:
    if len(raw) < _HEADER_FIXED:
        raise BadMagicError(f"{name}: file too short to hold a tensor header")
    if raw[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{name}: bad magic bytes {raw[:len(MAGIC)]!r}")
    dtype_code, rank = struct.unpack_from("<BB", raw, len(MAGIC))
    if dtype_code != DTYPE_F32:
        raise UnsupportedDtypeError(f"{name}: unsupported dtype code {dtype_code}")
    if not 1 <= rank <= MAX_RANK:
        raise TensorFormatError(f"{name}: rank must be in 1..{MAX_RANK}, got {rank}")
    offset = _HEADER_FIXED + 4 * rank
    if len(raw) < offset:
        raise TruncatedPayloadError(f"{name}: header truncated inside dims")
    shape = struct.unpack_from(f"<{rank}I", raw, _HEADER_FIXED)
    if any(d < 1 for d in shape):
        raise TensorFormatError(f"{name}: non-positive dimension in {shape}")
    return tuple(int(d) for d in shape), offset
