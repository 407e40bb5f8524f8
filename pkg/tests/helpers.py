"""Random layout generation shared by the property and acceptance tests."""

from __future__ import annotations

import numpy as np

from layoutmod.layout import parse_layout

COLORS = ["red", "blue", "green", "yellow", "black", "white", "orange", "pink"]
NOUNS = ["dog", "cat", "tree", "car", "lamp", "bird", "boat", "chair", "vase"]
FILLER = ["near", "and", "beside", "under", "with", "on", "the", "grass"]


def random_layout_doc(rng: np.random.Generator, side: int = 16, max_segments: int = 4, coarse: int = 4) -> dict:
    """A disjoint random layout that survives pooling down to ``coarse``.

    Each segment owns one full ``side/coarse`` anchor block, then grows ragged
    rectangles and single cells into free space, so pooling still has to
    resolve partially covered cells.
    """
    n = int(rng.integers(1, max_segments + 1))
    f = side // coarse
    owner = np.zeros((side, side), dtype=int)
    anchors = rng.choice(coarse * coarse, size=n, replace=False)
    for seg, a in enumerate(anchors, start=1):
        r, c = divmod(int(a), coarse)
        owner[r * f : (r + 1) * f, c * f : (c + 1) * f] = seg
    anchor_cells = owner > 0
    for _ in range(int(rng.integers(0, 8))):
        seg = int(rng.integers(1, n + 1))
        h, w = rng.integers(1, side // 2, size=2)
        r0, c0 = rng.integers(0, side - h + 1), rng.integers(0, side - w + 1)
        block = np.zeros_like(anchor_cells)
        block[r0 : r0 + h, c0 : c0 + w] = True
        owner[block & (owner == 0)] = seg
    for _ in range(int(rng.integers(0, 12))):
        r, c = rng.integers(0, side, size=2)
        if owner[r, c] == 0:
            owner[r, c] = int(rng.integers(1, n + 1))

    texts = []
    words = []
    for seg in range(1, n + 1):
        text = f"a {COLORS[int(rng.integers(len(COLORS)))]} {NOUNS[int(rng.integers(len(NOUNS)))]}"
        texts.append(text)
        words.append(text)
        words.extend(FILLER[int(x)] for x in rng.integers(0, len(FILLER), size=int(rng.integers(0, 3))))
    return {
        "caption": " ".join(words),
        "width": side,
        "height": side,
        "segments": [
            {"text": t, "mask": (owner == seg).astype(int).tolist()} for seg, t in enumerate(texts, start=1)
        ],
    }


def random_layout(rng: np.random.Generator, **kw):
    return parse_layout(random_layout_doc(rng, **kw))
