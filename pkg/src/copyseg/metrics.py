"""Copy-overlap aware evaluation of predicted segment boxes.

Per pair, recall looks at every ground-truth box, intersects it with all
predictions, and measures the union of those intersections projected on
each time axis.  The per-axis coverage ratios (summed over GT boxes before
dividing) multiply into the recall.  Precision swaps the roles of GT and
predictions.  Projections rather than areas make a box and any consecutive
division of it score the same.

Empty-set conventions: with no GT and no predictions both recall and
precision are 1; missing GT leaves recall at 1 and precision at 0; missing
predictions give recall 0 and precision 1.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import DataError
from .geometry import (
    PairLabel,
    SegmentBox,
    TimeInterval,
    VideoPairId,
    box_intersection,
    interval_union_length,
)

log = logging.getLogger(__name__)


def fscore(recall: float, precision: float) -> float:
    total = recall + precision
    return 2.0 * recall * precision / total if total > 0 else 0.0


@dataclass(frozen=True)
class PairEvaluation:
    recall: float
    precision: float
    gt_count: int
    pred_count: int

    @property
    def fscore(self) -> float:
        return fscore(self.recall, self.precision)


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def _coverage(targets: Sequence[SegmentBox], others: Sequence[SegmentBox]) -> float:
    """Product over both axes of the covered fraction of ``targets`` by ``others``."""
    covered_x = covered_y = extent_x = extent_y = 0.0
    for t in targets:
        extent_x += t.x.length()
        extent_y += t.y.length()
        overlaps = [o for o in (box_intersection(t, other) for other in others) if o is not None]
        if overlaps:
            covered_x += interval_union_length(o.x for o in overlaps)
            covered_y += interval_union_length(o.y for o in overlaps)
    return _ratio(covered_x, extent_x) * _ratio(covered_y, extent_y)


def evaluate_pair(gt: Sequence[SegmentBox], pred: Sequence[SegmentBox]) -> PairEvaluation:
    """Recall, precision and F-score of ``pred`` against ``gt`` for one video pair."""
    gt, pred = list(gt), list(pred)
    if not gt:
        recall, precision = 1.0, (1.0 if not pred else 0.0)
    elif not pred:
        recall, precision = 0.0, 1.0
    else:
        recall = _coverage(gt, pred)
        precision = _coverage(pred, gt)
    return PairEvaluation(recall, precision, len(gt), len(pred))


def evaluate_pair_segment_baseline(gt: Sequence[SegmentBox], pred: Sequence[SegmentBox]) -> tuple[float, float]:
    """Segment-level recall and precision extended to box pairs.

    A prediction is correct when it overlaps any GT box with positive area,
    a GT box is recalled when any prediction overlaps it.  Returns
    ``(recall, precision)``; empty denominators follow the per-pair
    conventions of :func:`evaluate_pair`.
    """
    gt, pred = list(gt), list(pred)
    correct = sum(any(box_intersection(p, g) for g in gt) for p in pred)
    recalled = sum(any(box_intersection(g, p) for p in pred) for g in gt)
    recall = recalled / len(gt) if gt else 1.0
    precision = correct / len(pred) if pred else 1.0
    return recall, precision


@dataclass(frozen=True)
class FrameBaseline:
    recall_x: float
    precision_x: float
    recall_y: float
    precision_y: float

    @property
    def recall(self) -> float:
        return self.recall_x * self.recall_y

    @property
    def precision(self) -> float:
        return self.precision_x * self.precision_y


def _union_intersection_length(a: Sequence[TimeInterval], b: Sequence[TimeInterval]) -> float:
    """Measure of ``union(a) & union(b)`` by inclusion-exclusion on unions."""
    return interval_union_length(a) + interval_union_length(b) - interval_union_length(list(a) + list(b))


def evaluate_pair_frame_baseline(gt: Sequence[SegmentBox], pred: Sequence[SegmentBox]) -> FrameBaseline:
    """Frame-level recall and precision computed independently on each axis."""
    values = []
    for axis in ("x", "y"):
        g = [getattr(b, axis) for b in gt]
        p = [getattr(b, axis) for b in pred]
        g_len, p_len = interval_union_length(g), interval_union_length(p)
        both = _union_intersection_length(g, p)
        recall = both / g_len if g_len > 0 else 1.0
        precision = both / p_len if p_len > 0 else (1.0 if not pred else 0.0)
        values += [recall, precision]
    return FrameBaseline(*values)


# -- protocol-level aggregation ----------------------------------------------


def video_level_rates(
    labels: Sequence[PairLabel], preds: Mapping[VideoPairId, object]
) -> tuple[Optional[float], Optional[float]]:
    """Video-level false rejection and false alarm rates.

    A pair counts as flagged when its prediction holds at least one box.
    A rate without any pair of its polarity is ``None``.
    """
    preds = canonical_boxes(preds)
    pos = neg = missed = alarms = 0
    for label in labels:
        flagged = len(preds.get(label.pair.canonical(), ()) or ()) > 0
        if label.is_positive:
            pos += 1
            missed += not flagged
        else:
            neg += 1
            alarms += flagged
    frr = missed / pos if pos else None
    far = alarms / neg if neg else None
    return frr, far


def _boxes(store: Mapping[VideoPairId, Sequence[SegmentBox]], pair: VideoPairId) -> Sequence[SegmentBox]:
    value = store.get(pair, ())
    return getattr(value, "boxes", value)


def canonical_boxes(store: Mapping[VideoPairId, object]) -> dict[VideoPairId, list[SegmentBox]]:
    """Re-key a pair -> boxes (or Prediction) mapping by canonical pair ids.

    Boxes of reversed pairs are transposed; repeated pairs are concatenated.
    """
    out: dict[VideoPairId, list[SegmentBox]] = {}
    for pair, value in store.items():
        boxes = [pair.canonical_box(b) for b in _boxes(store, pair)]
        out.setdefault(pair.canonical(), []).extend(boxes)
    return out


def evaluate_labels(
    labels: Sequence[PairLabel],
    gt_store: Mapping[VideoPairId, Sequence[SegmentBox]],
    preds: Mapping[VideoPairId, object],
) -> dict[VideoPairId, PairEvaluation]:
    """Per-pair evaluation of every labeled pair, keyed by canonical pair id.

    Negative pairs are evaluated against empty ground truth.
    """
    gt_store, preds = canonical_boxes(gt_store), canonical_boxes(preds)
    out = {}
    for label in sorted(labels, key=lambda lb: lb.pair.canonical()):
        pair = label.pair.canonical()
        gt = _boxes(gt_store, pair) if label.is_positive else ()
        out[pair] = evaluate_pair(gt, _boxes(preds, pair))
    return out


def aggregate_overall(
    labels: Sequence[PairLabel],
    gt_store: Mapping[VideoPairId, Sequence[SegmentBox]],
    preds: Mapping[VideoPairId, object],
    per_pair: Optional[Mapping[VideoPairId, PairEvaluation]] = None,
) -> tuple[float, float, float]:
    """Overall recall, precision and F-score over positive and negative pairs.

    Recall averages over positive pairs.  Precision averages over every pair
    that received at least one predicted box, so alarms on negative pairs
    count as zero precision and silent negatives are ignored.
    """
    if per_pair is None:
        per_pair = evaluate_labels(labels, gt_store, preds)
    positives = sorted({lb.pair.canonical() for lb in labels if lb.is_positive})
    if not positives:
        raise DataError("overall metric needs at least one positive pair")
    recall = sum(per_pair[p].recall for p in positives) / len(positives)
    emitting = sorted(p for p, ev in per_pair.items() if ev.pred_count > 0)
    precision = sum(per_pair[p].precision for p in emitting) / len(emitting) if emitting else 1.0
    return recall, precision, fscore(recall, precision)


@dataclass(frozen=True)
class QuerySetScore:
    recall: float
    precision: float
    pairs: int

    @property
    def fscore(self) -> float:
        return fscore(self.recall, self.precision)


def aggregate_macro_over_query_sets(
    labels: Sequence[PairLabel],
    gt_store: Mapping[VideoPairId, Sequence[SegmentBox]],
    preds: Mapping[VideoPairId, object],
    per_pair: Optional[Mapping[VideoPairId, PairEvaluation]] = None,
    query_sets: Sequence[str] = (),
) -> tuple[float, float, float, dict[str, QuerySetScore]]:
    """Macro recall/precision/F over query sets, positive pairs only.

    Each query set averages its pairs' recall and precision; the macro
    values average the sets without weighting.  Query sets listed in
    ``query_sets`` that hold no positive pair are skipped with a warning.
    """
    if per_pair is None:
        per_pair = evaluate_labels(labels, gt_store, preds)
    members: dict[str, set[VideoPairId]] = defaultdict(set)
    for label in labels:
        if not label.is_positive:
            continue
        if not label.query_set:
            raise DataError(f"positive pair {label.pair} has no query set")
        members[label.query_set].add(label.pair.canonical())
    for qs in query_sets:
        if qs not in members:
            log.warning("query set %s has no positive pairs; excluded from macro average", qs)
    if not members:
        raise DataError("macro metric needs at least one positive pair")
    per_set = {}
    for qs in sorted(members):
        pairs = sorted(members[qs])
        r = sum(per_pair[p].recall for p in pairs) / len(pairs)
        pr = sum(per_pair[p].precision for p in pairs) / len(pairs)
        per_set[qs] = QuerySetScore(r, pr, len(pairs))
    recall = sum(s.recall for s in per_set.values()) / len(per_set)
    precision = sum(s.precision for s in per_set.values()) / len(per_set)
    return recall, precision, fscore(recall, precision), per_set


@dataclass
class BenchmarkReport:
    overall_recall: float
    overall_precision: float
    overall_f: float
    frr: Optional[float]
    far: Optional[float]
    macro_recall: Optional[float]
    macro_precision: Optional[float]
    macro_f: Optional[float]
    per_query_set: dict[str, QuerySetScore] = field(default_factory=dict)
    per_pair: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_query_set"] = {
            k: {"recall": v.recall, "precision": v.precision, "fscore": v.fscore, "pairs": v.pairs}
            for k, v in self.per_query_set.items()
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _baseline_row(gt, pred) -> dict:
    sr, sp = evaluate_pair_segment_baseline(gt, pred)
    fb = evaluate_pair_frame_baseline(gt, pred)
    return {
        "seg_recall": sr,
        "seg_precision": sp,
        "frame_recall_x": fb.recall_x,
        "frame_precision_x": fb.precision_x,
        "frame_recall_y": fb.recall_y,
        "frame_precision_y": fb.precision_y,
        "frame_recall": fb.recall,
        "frame_precision": fb.precision,
    }


def build_report(
    labels: Sequence[PairLabel],
    gt_store: Mapping[VideoPairId, Sequence[SegmentBox]],
    preds: Mapping[VideoPairId, object],
    *,
    baselines: bool = False,
    query_sets: Sequence[str] = (),
) -> BenchmarkReport:
    """Evaluate every labeled pair and fold the results into a report."""
    per_pair = evaluate_labels(labels, gt_store, preds)
    recall, precision, f = aggregate_overall(labels, gt_store, preds, per_pair)
    frr, far = video_level_rates(labels, preds)
    if any(lb.is_positive for lb in labels):
        mr, mp, mf, per_set = aggregate_macro_over_query_sets(labels, gt_store, preds, per_pair, query_sets)
    else:
        mr = mp = mf = None
        per_set = {}
    gt_store, preds = canonical_boxes(gt_store), canonical_boxes(preds)
    by_pair = {lb.pair.canonical(): lb for lb in labels}
    rows = []
    for pair, ev in per_pair.items():
        label = by_pair[pair]
        row = {
            "pair": pair.key,
            "polarity": label.polarity.value,
            "query_set": label.query_set,
            "recall": ev.recall,
            "precision": ev.precision,
            "fscore": ev.fscore,
            "gt_count": ev.gt_count,
            "pred_count": ev.pred_count,
        }
        if baselines:
            gt = _boxes(gt_store, pair) if label.is_positive else ()
            row.update(_baseline_row(gt, _boxes(preds, pair)))
        rows.append(row)
    return BenchmarkReport(recall, precision, f, frr, far, mr, mp, mf, per_set, rows)


def _pct(value: Optional[float]) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def format_table(rows: Sequence[tuple[str, BenchmarkReport]]) -> str:
    """Human-readable comparison table, values in percent with two decimals."""
    header = ["method", "Recall", "Precision", "F-score", "FRR", "FAR", "mRecall", "mPrecision", "mF-score"]
    body = [
        [
            name,
            _pct(r.overall_recall),
            _pct(r.overall_precision),
            _pct(r.overall_f),
            _pct(r.frr),
            _pct(r.far),
            _pct(r.macro_recall),
            _pct(r.macro_precision),
            _pct(r.macro_f),
        ]
        for name, r in rows
    ]
    widths = [max(len(str(line[k])) for line in [header] + body) for k in range(len(header))]

    def fmt(line):
        cells = [str(line[0]).ljust(widths[0])] + [str(c).rjust(w) for c, w in zip(line[1:], widths[1:])]
        return " | ".join(cells).rstrip()

    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(line) for line in body]) + "\n"
