"""Layout conditions: parsing, caption/segment token alignment, mask pooling."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from layoutmod.errors import (
    AlignmentError,
    EmptyMaskError,
    InvalidInputError,
    MalformedLayoutError,
    OverlapError,
    ResolutionError,
)

_PUNCT = string.punctuation


@dataclass(frozen=True, eq=False)
class Segment:
    text: str
    mask: np.ndarray  # bool, shape (height, width)


@dataclass(frozen=True, eq=False)
class LayoutCondition:
    caption: str
    width: int
    height: int
    segments: tuple[Segment, ...]

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @cached_property
    def caption_tokens(self) -> list[str]:
        return tokenize(self.caption)

    @cached_property
    def segment_tokens(self) -> list[list[str]]:
        return [tokenize(s.text) for s in self.segments]

    @cached_property
    def token_map(self) -> np.ndarray:
        return map_tokens_to_segments(self.caption_tokens, self.segment_tokens)

    def to_json(self) -> dict[str, Any]:
        return {
            "caption": self.caption,
            "width": self.width,
            "height": self.height,
            "segments": [
                {"text": s.text, "mask": s.mask.astype(int).tolist()} for s in self.segments
            ],
        }

    def same_as(self, other: "LayoutCondition") -> bool:
        return self.to_json() == other.to_json()


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace split, strip surrounding punctuation.

    Tokens made only of punctuation vanish.
    """
    tokens = (t.strip(_PUNCT) for t in text.lower().split())
    return [t for t in tokens if t]


def map_tokens_to_segments(
    caption_tokens: Sequence[str], segment_token_lists: Sequence[Sequence[str]]
) -> np.ndarray:
    """Vector ``k`` with ``k[j]`` = 1-based segment id of caption token ``j`` (0 if none).

    Segments are matched in input order, each to the first contiguous
    occurrence of its tokens that does not reuse an already matched token.
    """
    n = len(caption_tokens)
    k = np.zeros(n, dtype=np.int64)
    for idx, seg in enumerate(segment_token_lists, start=1):
        seg = list(seg)
        if not seg:
            raise AlignmentError(idx, "", "segment has no tokens")
        width = len(seg)
        for start in range(n - width + 1):
            if list(caption_tokens[start : start + width]) == seg and not k[start : start + width].any():
                k[start : start + width] = idx
                break
        else:
            raise AlignmentError(idx, " ".join(seg), "no unmatched occurrence in the caption tokens")
    return k


def _fail(msg: str) -> MalformedLayoutError:
    return MalformedLayoutError(msg)


def parse_layout(document: bytes | str | dict) -> LayoutCondition:
    """Parse and validate a layout-condition JSON document."""
    if isinstance(document, dict):
        obj = document
    else:
        try:
            obj = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise _fail(f"layout is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise _fail("layout must be a JSON object")
    caption = obj.get("caption")
    width, height = obj.get("width"), obj.get("height")
    raw_segments = obj.get("segments")
    if not isinstance(caption, str):
        raise _fail("'caption' must be a string")
    for name, v in (("width", width), ("height", height)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise _fail(f"'{name}' must be a positive integer")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise _fail("'segments' must be a non-empty list")

    segments = []
    for i, seg in enumerate(raw_segments, start=1):
        if not isinstance(seg, dict) or not isinstance(seg.get("text"), str):
            raise _fail(f"segment {i}: expected an object with a string 'text'")
        mask = seg.get("mask")
        if (
            not isinstance(mask, list)
            or len(mask) != height
            or any(not isinstance(row, list) or len(row) != width for row in mask)
        ):
            raise _fail(f"segment {i}: mask must be {height} rows of {width} entries")
        if any(v not in (0, 1) or isinstance(v, float) for row in mask for v in row):
            raise _fail(f"segment {i}: mask entries must be 0 or 1")
        arr = np.array(mask, dtype=bool).reshape(height, width)
        if not arr.any():
            raise EmptyMaskError(i)
        segments.append(Segment(seg["text"], arr))

    owner = np.zeros((height, width), dtype=np.int64)
    for i, seg in enumerate(segments, start=1):
        clash = seg.mask & (owner > 0)
        if clash.any():
            r, c = np.argwhere(clash)[0]
            raise OverlapError(int(owner[r, c]), i, (int(r), int(c)))
        owner[seg.mask] = i

    _check_caption_spans(caption, segments)
    cond = LayoutCondition(caption, width, height, tuple(segments))
    cond.token_map  # alignment errors surface at parse time
    return cond


def _check_caption_spans(caption: str, segments: Sequence[Segment]) -> None:
    taken: list[tuple[int, int]] = []
    for i, seg in enumerate(segments, start=1):
        text = seg.text
        if not text.strip():
            raise AlignmentError(i, text, "segment text is empty")
        if text not in caption:
            raise AlignmentError(i, text, "text does not occur in the caption")
        start = caption.find(text)
        while start != -1:
            end = start + len(text)
            if all(end <= a or start >= b for a, b in taken):
                taken.append((start, end))
                break
            start = caption.find(text, start + 1)
        else:
            raise AlignmentError(i, text, "text only occurs overlapping another segment's text")


@dataclass(frozen=True, eq=False)
class ResolvedLayout:
    """Layout pooled to an ``h x h`` attention grid; ``owner[i]`` is 0 for background."""

    resolution: int
    owner: np.ndarray  # int64, shape (h*h,)
    n_segments: int

    @property
    def n_queries(self) -> int:
        return self.resolution * self.resolution

    @cached_property
    def masks(self) -> np.ndarray:
        ids = np.arange(1, self.n_segments + 1)[:, None]
        return self.owner[None, :] == ids

    @property
    def background_mask(self) -> np.ndarray:
        return self.owner == 0

    @property
    def query_segment(self) -> np.ndarray:
        return self.owner

    @cached_property
    def areas(self) -> np.ndarray:
        return segment_areas(self)

    def grid(self) -> np.ndarray:
        return self.owner.reshape(self.resolution, self.resolution)


def base_owner(cond: LayoutCondition) -> np.ndarray:
    owner = np.zeros((cond.height, cond.width), dtype=np.int64)
    for i, seg in enumerate(cond.segments, start=1):
        owner[seg.mask] = i
    return owner


def resolve_layout(cond: LayoutCondition, resolution: int) -> ResolvedLayout:
    """Pool the base masks onto an ``h x h`` grid.

    A coarse cell is claimed by every segment covering at least one of its
    base cells; the segment covering the most base cells wins, lowest index
    on ties. Unclaimed cells are background.
    """
    h = resolution
    if cond.width != cond.height:
        raise InvalidInputError(f"base grid must be square, got {cond.width}x{cond.height}")
    side = cond.width
    if h < 2 or side % h:
        raise InvalidInputError(f"resolution {h} must be >= 2 and divide the base side {side}")
    f = side // h
    counts = np.stack(
        [seg.mask.reshape(h, f, h, f).sum(axis=(1, 3)).ravel() for seg in cond.segments]
    )
    owner = np.where(counts.max(axis=0) > 0, counts.argmax(axis=0) + 1, 0).astype(np.int64)
    present = np.bincount(owner, minlength=cond.n_segments + 1)
    for i in range(1, cond.n_segments + 1):
        if present[i] == 0:
            raise ResolutionError(i, h)
    return ResolvedLayout(h, owner, cond.n_segments)


def segment_areas(layout: ResolvedLayout) -> np.ndarray:
    """Area fraction per id ``0..N`` (index 0 is background)."""
    counts = np.bincount(layout.owner, minlength=layout.n_segments + 1)
    return counts / layout.n_queries
