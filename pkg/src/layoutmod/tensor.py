"""Dense float64 matrix helpers and deterministic hashing / PRNG.

Matrices are plain 2-D ``numpy.float64`` arrays. Reductions that feed golden
values use a fixed summation order so results do not depend on the BLAS build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from layoutmod.errors import InvalidInputError

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
FNV_OFFSET64 = 0xCBF29CE484222325
FNV_PRIME64 = 0x100000001B3


def as_matrix(x: Any, name: str = "matrix") -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidInputError(f"{name}: expected a 2-D matrix, got shape {m.shape}")
    return m


def _check_finite(m: np.ndarray, name: str) -> None:
    bad = ~np.isfinite(m)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise InvalidInputError(f"{name}: non-finite entry at row {r}, col {c}")


def row_softmax(logits: np.ndarray, scale: float) -> np.ndarray:
    """``softmax(logits / scale)`` along each row, max-subtracted."""
    logits = as_matrix(logits, "logits")
    if not scale > 0:
        raise InvalidInputError(f"scale must be positive, got {scale}")
    _check_finite(logits, "logits")
    z = logits / scale
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def row_extrema(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = as_matrix(m)
    if m.size == 0:
        raise InvalidInputError("row_extrema of an empty matrix")
    return m.max(axis=1), m.min(axis=1)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product accumulated left to right over the inner index.

    Each partial sum is a separate elementwise multiply and add (no fused or
    pairwise reduction), so results are bit-reproducible on any IEEE-754
    platform regardless of the BLAS build.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise InvalidInputError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


@dataclass(frozen=True)
class RngStream:
    state: int = 0


def splitmix64_next(s: RngStream) -> tuple[int, RngStream]:
    state = (s.state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), RngStream(state)


def splitmix64_take(s: RngStream, n: int) -> tuple[list[int], RngStream]:
    out = []
    for _ in range(n):
        v, s = splitmix64_next(s)
        out.append(v)
    return out, s


def fnv1a64(data: bytes | str) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET64
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME64) & MASK64
    return h


def u64_to_unit(v: int) -> float:
    """Top 53 bits of ``v`` as a float in [0, 1)."""
    return (v >> 11) * (1.0 / (1 << 53))


def u64_to_signed_unit(v: int) -> float:
    """Map ``v`` to [-1, 1)."""
    return u64_to_unit(v) * 2.0 - 1.0


def uniform_signed(s: RngStream, shape: tuple[int, ...]) -> tuple[np.ndarray, RngStream]:
    vals, s = splitmix64_take(s, math.prod(shape))
    return np.array([u64_to_signed_unit(v) for v in vals], dtype=np.float64).reshape(shape), s


def box_muller(s: RngStream, n: int) -> tuple[np.ndarray, RngStream]:
    """``n`` standard normals; each pair consumes (angle uniform, radius uniform)."""
    out = np.empty(n)
    i = 0
    while i < n:
        (v1, v2), s = splitmix64_take(s, 2)
        angle = 2.0 * math.pi * u64_to_unit(v1)
        radius = math.sqrt(-2.0 * math.log(1.0 - u64_to_unit(v2)))
        out[i] = radius * math.cos(angle)
        if i + 1 < n:
            out[i + 1] = radius * math.sin(angle)
        i += 2
    return out, s


def matrix_to_json(m: np.ndarray) -> dict:
    m = as_matrix(m)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": [float(x) for x in m.ravel()]}


def matrix_from_json(obj: Any, name: str = "matrix") -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: expected {{rows, cols, data}} object") from exc
    if rows < 0 or cols < 0 or not isinstance(data, list) or len(data) != rows * cols:
        raise InvalidInputError(f"{name}: data length does not equal rows x cols")
    try:
        m = np.array(data, dtype=np.float64).reshape(rows, cols)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: data must be numbers") from exc
    _check_finite(m, name)
    return m
