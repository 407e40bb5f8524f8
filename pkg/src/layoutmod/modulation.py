"""Layout-guided modulation of attention logits.

Scores of query/key pairs that belong to the same segment are pushed toward
the row maximum and all other pairs toward the row minimum, attenuated by the
area of the query's segment and by a timestep-dependent strength
``lambda_t = w * t**p``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from layoutmod.errors import ConsistencyError, InvalidInputError
from layoutmod.layout import ResolvedLayout
from layoutmod.tensor import as_matrix, row_extrema, row_softmax


@dataclass(frozen=True)
class ModulationParams:
    w_cross: float = 1.0
    w_self: float = 0.3
    p: float = 5.0
    t_low: float = 0.7
    t_high: float = 1.0
    steps: int = 50
    # count background (id 0) as a segment in the self-attention condition map
    self_background: bool = True

    def __post_init__(self):
        if self.w_cross < 0 or self.w_self < 0:
            raise InvalidInputError("modulation weights must be non-negative")
        if not self.p > 0:
            raise InvalidInputError("p must be positive")
        if not 0.0 <= self.t_low <= self.t_high <= 1.0:
            raise InvalidInputError("timestep window must satisfy 0 <= t_low <= t_high <= 1")
        if self.steps < 1:
            raise InvalidInputError("steps must be >= 1")

    def in_window(self, t: float) -> bool:
        return self.t_low <= t <= self.t_high

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModulationParams":
        fields = cls.__dataclass_fields__
        unknown = set(obj) - set(fields)
        if unknown:
            raise InvalidInputError(f"unknown modulation parameters: {sorted(unknown)}")
        return cls(**obj)


def compute_lambda(t: float, w: float, p: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"normalized timestep must lie in [0, 1], got {t}")
    return w * t**p


def build_r_cross(k: np.ndarray, layout: ResolvedLayout) -> np.ndarray:
    """Queries x tokens map: column ``j`` is the mask of segment ``k[j]``, zero if ``k[j] == 0``."""
    k = np.asarray(k, dtype=np.int64)
    if k.size and (k.min() < 0 or k.max() > layout.n_segments):
        raise ConsistencyError(
            f"token map references segment {int(k.max())} but layout has {layout.n_segments}"
        )
    owner = layout.owner[:, None]
    return ((owner == k[None, :]) & (k[None, :] > 0)).astype(np.float64)


def build_r_self(layout: ResolvedLayout, background_as_segment: bool = True) -> np.ndarray:
    owner = layout.owner
    same = owner[:, None] == owner[None, :]
    if not background_as_segment:
        same &= owner[:, None] > 0
    return same.astype(np.float64)


def value_range_matrices(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance of every raw logit to its row maximum and row minimum."""
    logits = as_matrix(logits, "logits")
    hi, lo = row_extrema(logits)
    return hi[:, None] - logits, logits - lo[:, None]


def area_matrix(layout: ResolvedLayout, keys: int) -> np.ndarray:
    """Area fraction of each query's owner (background included), repeated over keys."""
    if keys < 1:
        raise InvalidInputError("keys must be >= 1")
    per_query = layout.areas[layout.owner]
    return np.repeat(per_query[:, None], keys, axis=1)


def modulation_offsets(
    logits: np.ndarray,
    r: np.ndarray,
    s: np.ndarray,
    lambda_t: float,
    value_range: bool = True,
) -> np.ndarray:
    """The additive logit offset ``M``.

    ``value_range=False`` replaces both range matrices by ones, leaving a
    constant-magnitude push in the same direction.
    """
    logits = as_matrix(logits, "logits")
    r = as_matrix(r, "r")
    s = as_matrix(s, "s")
    if not (logits.shape == r.shape == s.shape):
        raise InvalidInputError(
            f"shape mismatch: logits {logits.shape}, r {r.shape}, s {s.shape}"
        )
    if lambda_t < 0:
        raise InvalidInputError("lambda_t must be non-negative")
    if value_range:
        m_pos, m_neg = value_range_matrices(logits)
    else:
        m_pos = m_neg = np.ones_like(logits)
    keep = 1.0 - s
    return lambda_t * r * m_pos * keep - lambda_t * (1.0 - r) * m_neg * keep


def modulate(
    logits: np.ndarray,
    r: np.ndarray,
    s: np.ndarray,
    lambda_t: float,
    scale: float,
    value_range: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A', M)`` with ``A' = softmax((logits + M) / scale)``."""
    if not scale > 0:
        raise InvalidInputError(f"scale must be positive, got {scale}")
    m = modulation_offsets(logits, r, s, lambda_t, value_range)
    return row_softmax(logits + m, scale), m
