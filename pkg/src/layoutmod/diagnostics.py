"""Attention diagnostics: matched/unmatched statistics, concentration, attention IoU.

All run-level aggregates use the window steps only, i.e. the steps where the
modulation hook is (or would be) active, so modulated and unmodulated runs
with the same params are compared over the same steps.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from layoutmod.errors import InvalidInputError
from layoutmod.layout import ResolvedLayout

_REL_TOL = 1e-12


@dataclass(frozen=True)
class KindStats:
    matched_mean: float
    unmatched_mean: float
    matched_max_mean: float
    unmatched_max_mean: float

    @property
    def gap(self) -> float:
        return self.matched_mean - self.unmatched_mean


def matched_mask(kind: str, owner: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Boolean query x key mask of matched pairs.

    Cross: key token ``j`` belongs to the query's segment. Self: both image
    tokens share a segment. Background queries never match.
    """
    owner = np.asarray(owner)
    if kind == "cross":
        keys = np.asarray(k)
    elif kind == "self":
        keys = owner
    else:
        raise InvalidInputError(f"unknown attention kind {kind!r}")
    return (owner[:, None] == keys[None, :]) & (owner[:, None] > 0)


class _Accumulator:
    def __init__(self):
        self.sum = {True: 0.0, False: 0.0}
        self.count = {True: 0, False: 0}
        self.max_sum = {True: 0.0, False: 0.0}
        self.max_count = {True: 0, False: 0}

    def add(self, attn: np.ndarray, matched: np.ndarray) -> None:
        for cls_ in (True, False):
            sel = matched if cls_ else ~matched
            self.sum[cls_] += float(attn[sel].sum())
            self.count[cls_] += int(sel.sum())
            rows = sel.any(axis=1)
            if rows.any():
                row_max = np.where(sel, attn, -np.inf).max(axis=1)
                self.max_sum[cls_] += float(row_max[rows].sum())
                self.max_count[cls_] += int(rows.sum())

    def result(self) -> KindStats:
        def div(a, b):
            return a / b if b else float("nan")

        return KindStats(
            div(self.sum[True], self.count[True]),
            div(self.sum[False], self.count[False]),
            div(self.max_sum[True], self.max_count[True]),
            div(self.max_sum[False], self.max_count[False]),
        )


def attention_stats(entries: Iterable[tuple[np.ndarray, np.ndarray]]) -> KindStats:
    """Pooled statistics over ``(attention map, matched mask)`` pairs."""
    acc = _Accumulator()
    n = 0
    for attn, matched in entries:
        acc.add(np.asarray(attn), np.asarray(matched, dtype=bool))
        n += 1
    if n == 0:
        raise InvalidInputError("no attention records to aggregate")
    return acc.result()


def matched_unmatched_stats(run, which: str = "modulated") -> dict[str, KindStats]:
    """Per layer kind statistics over the run's window-step records."""
    k = run.token_map
    out = {}
    for kind in ("cross", "self"):
        recs = run.window_records(kind)
        if not recs:
            raise InvalidInputError(f"run has no window-step {kind} records")
        out[kind] = attention_stats(
            (getattr(r, which), matched_mask(kind, run.layouts[r.resolution].owner, k)) for r in recs
        )
    return out


def concentration(attn: np.ndarray, owner: np.ndarray, k: np.ndarray, n_segments: int) -> np.ndarray:
    """Fraction of each segment's token attention mass that falls inside its mask.

    Entry ``n-1`` is NaN when segment ``n`` has no tokens or receives no mass.
    """
    attn = np.asarray(attn)
    owner = np.asarray(owner)
    k = np.asarray(k)
    out = np.full(n_segments, np.nan)
    for n in range(1, n_segments + 1):
        cols = k == n
        if not cols.any():
            continue
        per_query = attn[:, cols].sum(axis=1)
        total = per_query.sum()
        if total > 0:
            out[n - 1] = per_query[owner == n].sum() / total
    return out


def run_concentration(run, which: str = "modulated") -> np.ndarray:
    """Per-segment concentration averaged over window-step cross records."""
    recs = run.window_records("cross")
    if not recs:
        raise InvalidInputError("run has no window-step cross records")
    vals = np.stack(
        [
            concentration(getattr(r, which), run.layouts[r.resolution].owner, run.token_map, run.cond.n_segments)
            for r in recs
        ]
    )
    with np.errstate(all="ignore"):
        return np.nanmean(vals, axis=0) if np.isfinite(vals).any() else vals[0]


def segmentation_from_maps(maps: Sequence[np.ndarray], k: np.ndarray, n_segments: int) -> np.ndarray:
    """Label each query with the segment whose tokens it attends to most.

    Scores are the mean (over maps) of summed attention to each segment's
    tokens; ties go to the lower id. A query is background unless its best
    score exceeds the uniform baseline ``span / keys``. A segment spanning every
    key cannot exceed its baseline of 1, so reaching it is enough.
    """
    if not maps:
        raise InvalidInputError("no attention maps to segment")
    k = np.asarray(k)
    keys = k.size
    scores = np.zeros((maps[0].shape[0], n_segments))
    spans = np.zeros(n_segments)
    for n in range(1, n_segments + 1):
        cols = k == n
        spans[n - 1] = cols.sum()
        scores[:, n - 1] = sum(np.asarray(m)[:, cols].sum(axis=1) for m in maps) / len(maps)
    best = scores.argmax(axis=1)
    best_score = scores[np.arange(scores.shape[0]), best]
    baseline = spans[best] / keys
    above = best_score > baseline * (1 + _REL_TOL)
    full_span = (spans[best] == keys) & (best_score >= 1 - _REL_TOL)
    labeled = (spans[best] > 0) & (above | full_span)
    return np.where(labeled, best + 1, 0).astype(np.int64)


def attention_segmentation(run, resolution: int, which: str = "modulated") -> np.ndarray:
    """Label grid (``h x h``) from the run's window-step cross records at ``resolution``."""
    maps = [getattr(r, which) for r in run.window_records("cross") if r.resolution == resolution]
    if not maps:
        raise InvalidInputError(f"no window-step cross records at resolution {resolution}")
    labels = segmentation_from_maps(maps, run.token_map, run.cond.n_segments)
    return labels.reshape(resolution, resolution)


@dataclass(frozen=True)
class IoUResult:
    per_segment: tuple[float, ...]
    mean: float
    empty_union: tuple[bool, ...]


def iou(predicted: np.ndarray, condition: ResolvedLayout | np.ndarray, n_segments: int | None = None) -> IoUResult:
    """Per-segment IoU between two label grids (0 = background, ignored)."""
    if isinstance(condition, ResolvedLayout):
        n_segments = condition.n_segments
        target = condition.owner
    else:
        target = np.asarray(condition).ravel()
        if n_segments is None:
            n_segments = int(max(target.max(), np.asarray(predicted).max()))
    pred = np.asarray(predicted).ravel()
    if pred.shape != target.shape:
        raise InvalidInputError(f"label grids differ in size: {pred.size} vs {target.size}")
    vals, empty = [], []
    for n in range(1, n_segments + 1):
        p, t = pred == n, target == n
        union = int((p | t).sum())
        empty.append(union == 0)
        vals.append(float((p & t).sum()) / union if union else 0.0)
    return IoUResult(tuple(vals), float(np.mean(vals)) if vals else 0.0, tuple(empty))


@dataclass(frozen=True)
class LayoutScore:
    per_segment_concentration: tuple[float, ...]
    mean_concentration: float
    iou_per_segment: tuple[float, ...]
    mean_iou: float
    iou_by_resolution: dict[int, float]
    stats: dict[str, KindStats]

    def to_json(self) -> dict:
        d = asdict(self)
        d["iou_by_resolution"] = {str(k): v for k, v in self.iou_by_resolution.items()}
        for kind, st in self.stats.items():
            d["stats"][kind]["gap"] = st.gap
        return d


def score_run(run, which: str = "modulated") -> LayoutScore:
    """All run-level layout-fidelity scores.

    ``mean_iou`` is taken at the finest cross-attention resolution.
    """
    conc = run_concentration(run, which)
    resolutions = sorted({r.resolution for r in run.window_records("cross")}, reverse=True)
    ious = {res: iou(attention_segmentation(run, res, which), run.layouts[res]) for res in resolutions}
    finest = ious[resolutions[0]]
    return LayoutScore(
        per_segment_concentration=tuple(float(c) for c in conc),
        mean_concentration=float(np.nanmean(conc)),
        iou_per_segment=finest.per_segment,
        mean_iou=finest.mean,
        iou_by_resolution={res: r.mean for res, r in ious.items()},
        stats=matched_unmatched_stats(run, which),
    )


COMPARED_METRICS = ("mean_concentration", "mean_iou", "cross_gap", "self_gap")


def _metric_values(score: LayoutScore) -> dict[str, float]:
    return {
        "mean_concentration": score.mean_concentration,
        "mean_iou": score.mean_iou,
        "cross_gap": score.stats["cross"].gap,
        "self_gap": score.stats["self"].gap,
    }


def compare_scores(a: LayoutScore, b: LayoutScore) -> dict[str, dict]:
    va, vb = _metric_values(a), _metric_values(b)
    out = {}
    for name in COMPARED_METRICS:
        delta = va[name] - vb[name]
        out[name] = {
            "a": va[name],
            "b": vb[name],
            "delta": delta,
            "winner": "a" if delta > 0 else "b" if delta < 0 else "tie",
        }
    return out


def compare_runs(run_a, run_b) -> dict[str, dict]:
    """Metric-by-metric deltas ``a - b``; both runs must share condition and seed."""
    if run_a.seed != run_b.seed or not run_a.cond.same_as(run_b.cond):
        raise InvalidInputError("compare_runs needs runs with the same condition and seed")
    return compare_scores(score_run(run_a), score_run(run_b))
