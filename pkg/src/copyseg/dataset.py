"""Segment-level copy annotations, query sets, splits and pair sampling.

File formats
------------
annotation file
    JSON object mapping ``"idA-idB"`` to a list of
    ``[start_a, start_b, end_a, end_b]`` records in seconds, where ``a`` is
    the seed side of the annotated pair.
metadata file
    CSV with header ``video_id,duration,category,query_set,split``; empty
    cells mean unknown.
label file
    CSV with header ``video_a,video_b,polarity,query_set,split``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import DataError
from .geometry import PairLabel, Polarity, SegmentBox, Split, TimeInterval, VideoPairId

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

METADATA_FIELDS = ["video_id", "duration", "category", "query_set", "split"]
LABEL_FIELDS = ["video_a", "video_b", "polarity", "query_set", "split"]
DEFAULT_QUERY_SET = "default"


@dataclass(frozen=True)
class VideoMeta:
    duration: Optional[float] = None
    category: Optional[str] = None
    query_set: Optional[str] = None
    split: Optional[Split] = None


@dataclass(frozen=True)
class AnnotationStore:
    """Ground-truth boxes per canonical pair, pair labels and video metadata."""

    pairs: Mapping[VideoPairId, tuple[SegmentBox, ...]] = field(default_factory=dict)
    labels: tuple[PairLabel, ...] = ()
    videos: Mapping[str, VideoMeta] = field(default_factory=dict)

    def boxes(self, pair: VideoPairId) -> tuple[SegmentBox, ...]:
        if pair.is_canonical:
            return self.pairs.get(pair, ())
        return tuple(b.transpose() for b in self.pairs.get(pair.canonical(), ()))

    def durations(self) -> dict[str, float]:
        return {vid: m.duration for vid, m in self.videos.items() if m.duration is not None}

    def positive_pairs(self) -> set[VideoPairId]:
        return set(self.pairs) | {lb.pair.canonical() for lb in self.labels if lb.is_positive}

    def query_sets(self) -> list[str]:
        found = {m.query_set for m in self.videos.values() if m.query_set}
        found |= {lb.query_set for lb in self.labels if lb.query_set}
        return sorted(found)

    def query_set_splits(self) -> dict[str, Optional[Split]]:
        """Split of every known query set (``None`` when unassigned).

        Conflicting assignments raise :class:`DataError`.
        """
        out: dict[str, Optional[Split]] = {qs: None for qs in self.query_sets()}
        sources = [(m.query_set, m.split, f"video {vid}") for vid, m in self.videos.items()]
        sources += [(lb.query_set, lb.split, f"pair {lb.pair}") for lb in self.labels]
        for qs, split, origin in sources:
            if not qs or split is None:
                continue
            if out[qs] is not None and out[qs] is not split:
                raise DataError(f"query set {qs} assigned to both {out[qs].value} and {split.value} ({origin})")
            out[qs] = split
        return out


# -- loading and saving -------------------------------------------------------


def _optional(value: Optional[str]) -> Optional[str]:
    value = (value or "").strip()
    return value or None


def _parse_split(value: Optional[str], where: str) -> Optional[Split]:
    value = _optional(value)
    if value is None:
        return None
    try:
        return Split(value.lower())
    except ValueError:
        raise DataError(f"{where}: unknown split {value!r}") from None


def load_metadata(path: PathLike) -> dict[str, VideoMeta]:
    videos = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "video_id" not in reader.fieldnames:
            raise DataError(f"{path}: metadata needs a 'video_id' column")
        for lineno, row in enumerate(reader, 2):
            where = f"{path}:{lineno}"
            vid = _optional(row.get("video_id"))
            if vid is None:
                raise DataError(f"{where}: empty video_id")
            duration = _optional(row.get("duration"))
            try:
                duration = float(duration) if duration is not None else None
            except ValueError:
                raise DataError(f"{where}: invalid duration {duration!r}") from None
            if duration is not None and not (math.isfinite(duration) and duration > 0):
                raise DataError(f"{where}: duration must be positive")
            if vid in videos:
                raise DataError(f"{where}: duplicate video {vid}")
            videos[vid] = VideoMeta(
                duration,
                _optional(row.get("category")),
                _optional(row.get("query_set")),
                _parse_split(row.get("split"), where),
            )
    return videos


def save_metadata(videos: Mapping[str, VideoMeta], path: PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METADATA_FIELDS)
        for vid in sorted(videos):
            m = videos[vid]
            writer.writerow(
                [
                    vid,
                    "" if m.duration is None else repr(m.duration),
                    m.category or "",
                    m.query_set or "",
                    m.split.value if m.split else "",
                ]
            )
    return path


def load_labels(path: PathLike) -> list[PairLabel]:
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"video_a", "video_b", "polarity"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: label file lacks columns {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            where = f"{path}:{lineno}"
            a, b = _optional(row.get("video_a")), _optional(row.get("video_b"))
            if not a or not b or a == b:
                raise DataError(f"{where}: a label needs two distinct video ids")
            try:
                polarity = Polarity((row.get("polarity") or "").strip().lower())
                labels.append(
                    PairLabel(
                        VideoPairId(a, b).canonical(),
                        polarity,
                        _optional(row.get("query_set")),
                        _parse_split(row.get("split"), where),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{where}: {exc}") from None
    return labels


def save_labels(labels: Iterable[PairLabel], path: PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LABEL_FIELDS)
        for lb in sorted(labels, key=lambda lb: (lb.pair.canonical(), lb.polarity.value)):
            pair = lb.pair.canonical()
            writer.writerow(
                [pair.video_a, pair.video_b, lb.polarity.value, lb.query_set or "", lb.split.value if lb.split else ""]
            )
    return path


def _merge_duplicate_keys(items):
    out: dict[str, list] = {}
    for key, value in items:
        if key in out:
            log.warning("duplicate annotation entry for %s; merging", key)
            if isinstance(out[key], list) and isinstance(value, list):
                out[key] = out[key] + value
                continue
        out[key] = value
    return out


def _parse_box(rec, where: str) -> SegmentBox:
    if (
        not isinstance(rec, list)
        or len(rec) != 4
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in rec)
    ):
        raise DataError(f"{where}: expected [start_a, start_b, end_a, end_b], got {rec!r}")
    sa, sb, ea, eb = (float(v) for v in rec)
    if min(sa, sb) < 0:
        raise DataError(f"{where}: negative timestamp in {rec!r}")
    if sa > ea or sb > eb:
        raise DataError(f"{where}: start after end in {rec!r}")
    if sa == ea or sb == eb:
        raise DataError(f"{where}: zero-length interval in {rec!r}")
    return SegmentBox(TimeInterval(sa, ea), TimeInterval(sb, eb))


def parse_annotations(
    doc: Mapping[str, list], videos: Mapping[str, VideoMeta] = {}, source: str = "<annotations>"
) -> dict[VideoPairId, tuple[SegmentBox, ...]]:
    pairs: dict[VideoPairId, list[SegmentBox]] = {}
    for key, records in doc.items():
        try:
            raw_pair = VideoPairId.parse(key)
        except ValueError as exc:
            raise DataError(f"{source}: {exc}") from None
        if raw_pair.video_a == raw_pair.video_b:
            raise DataError(f"{source}: pair {key} joins a video with itself")
        if not isinstance(records, list):
            raise DataError(f"{source}: pair {key}: expected a list of records")
        pair = raw_pair.canonical()
        if pair in pairs:
            log.warning("pair %s annotated more than once; merging", pair)
        target = pairs.setdefault(pair, [])
        for k, rec in enumerate(records):
            b = raw_pair.canonical_box(_parse_box(rec, f"{source}: pair {key} record #{k}"))
            for vid, iv in ((pair.video_a, b.x), (pair.video_b, b.y)):
                duration = videos.get(vid, VideoMeta()).duration
                if duration is not None and iv.end > duration:
                    raise DataError(f"{source}: pair {key} record #{k} ends after video {vid} ({duration}s)")
            if b in target:
                log.warning("%s: pair %s: dropping duplicate box %s", source, key, b.to_record())
                continue
            target.append(b)
    return {p: tuple(bs) for p, bs in sorted(pairs.items())}


def load_annotations(
    source: PathLike,
    metadata: Optional[PathLike] = None,
    labels: Optional[PathLike] = None,
) -> AnnotationStore:
    """Load ground truth plus optional metadata and labels.

    Without a label file every annotated pair becomes a positive label
    whose query set comes from the metadata of either video.
    """
    path = Path(source)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"), object_pairs_hook=_merge_duplicate_keys)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read annotations {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: annotation file must be a JSON object")
    videos = load_metadata(metadata) if metadata else {}
    pairs = parse_annotations(doc, videos, str(path))
    if labels:
        label_list = load_labels(labels)
    else:
        label_list = [_derived_label(pair, videos) for pair in pairs]
    return AnnotationStore(pairs, tuple(label_list), videos)


def _derived_label(pair: VideoPairId, videos: Mapping[str, VideoMeta]) -> PairLabel:
    meta_a = videos.get(pair.video_a, VideoMeta())
    meta_b = videos.get(pair.video_b, VideoMeta())
    qs = meta_a.query_set or meta_b.query_set or DEFAULT_QUERY_SET
    return PairLabel(pair, Polarity.POSITIVE, qs, meta_a.split or meta_b.split)


def annotations_to_json(pairs: Mapping[VideoPairId, Sequence[SegmentBox]]) -> str:
    doc = {p.key: [b.to_record() for b in boxes] for p, boxes in sorted(pairs.items())}
    return json.dumps(doc, indent=1) + "\n"


def save_annotations(store: AnnotationStore, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(annotations_to_json(store.pairs), encoding="utf-8")
    return path


# -- transitivity ------------------------------------------------------------


@dataclass(frozen=True)
class PropagatedSegment:
    """A box between two searched videos inferred through their common seed.

    ``provisional`` marks boxes that still need human verification.
    """

    pair: VideoPairId
    box: SegmentBox
    provisional: bool = True


def _map_into(lo: float, hi: float, seed: TimeInterval, target: TimeInterval) -> TimeInterval:
    scale = target.length() / seed.length()
    start = target.start + (lo - seed.start) * scale
    end = target.start + (hi - seed.start) * scale
    start = min(max(start, target.start), target.end)
    end = min(max(end, start), target.end)
    return TimeInterval(start, end)


def compose_through_seed(to_b: SegmentBox, to_c: SegmentBox) -> Optional[SegmentBox]:
    """Compose seed->B and seed->C boxes (seed on ``x``) into a B->C box.

    The seed-side overlap is mapped into each searched video assuming a
    constant playback speed inside each box.  ``None`` when the seed
    intervals overlap in less than a positive length.
    """
    lo = max(to_b.x.start, to_c.x.start)
    hi = min(to_b.x.end, to_c.x.end)
    if not hi > lo:
        return None
    out = SegmentBox(_map_into(lo, hi, to_b.x, to_b.y), _map_into(lo, hi, to_c.x, to_c.y))
    return out if out.area() > 0 else None


def propagate_transitivity(store: AnnotationStore, seed_id: str) -> list[PropagatedSegment]:
    """Infer copies between videos that both copy overlapping parts of ``seed_id``."""
    by_partner: dict[str, list[SegmentBox]] = defaultdict(list)
    for pair, boxes in store.pairs.items():
        if seed_id not in (pair.video_a, pair.video_b):
            continue
        if pair.video_a == seed_id:
            by_partner[pair.video_b].extend(boxes)
        else:
            by_partner[pair.video_a].extend(b.transpose() for b in boxes)
    partners = sorted(by_partner)
    out = []
    for k, vb in enumerate(partners):
        for vc in partners[k + 1 :]:
            pair = VideoPairId(vb, vc)
            for gb in by_partner[vb]:
                for gc in by_partner[vc]:
                    composed = compose_through_seed(gb, gc)
                    if composed is not None:
                        out.append(PropagatedSegment(pair, composed))
    return out


# -- negatives and splits ---------------------------------------------------------


def sample_negative_pairs(
    store: AnnotationStore, count: int, seed: int, split: Optional[Split] = Split.TEST
) -> list[PairLabel]:
    """Draw ``count`` distinct cross-category pairs that are not annotated copies.

    When the metadata assigns videos to splits, only videos of ``split`` are
    paired.  The result is sorted and depends only on the store and ``seed``.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    in_split = [vid for vid, m in store.videos.items() if split is not None and m.split is split]
    pool = in_split if in_split else list(store.videos)
    videos = sorted(vid for vid in pool if store.videos[vid].category)
    categories = {store.videos[v].category for v in videos}
    if len(categories) < 2:
        raise DataError("negative sampling needs videos from at least two categories")
    positives = store.positive_pairs()

    candidates = [
        VideoPairId(a, b)
        for k, a in enumerate(videos)
        for b in videos[k + 1 :]
        if store.videos[a].category != store.videos[b].category
    ]
    candidates = [c for c in candidates if c not in positives]
    if count > len(candidates):
        raise DataError(f"only {len(candidates)} cross-category non-copy pairs available, {count} requested")
    chosen = sorted(random.Random(seed).sample(candidates, count))
    return [PairLabel(pair, Polarity.NEGATIVE, None, split) for pair in chosen]


def split_filter(store: AnnotationStore, split: Union[Split, str]) -> AnnotationStore:
    """Restrict ``store`` to the pairs whose query set belongs to ``split``.

    Negative labels are kept when their own split matches.  Raises when a
    query set has no split or a kept pair uses a video assigned to another
    split.
    """
    split = Split(split)
    assignment = store.query_set_splits()
    if not assignment:
        raise DataError("no query set is assigned to a split")
    unassigned = sorted(qs for qs, s in assignment.items() if s is None)
    if unassigned:
        raise DataError(f"query sets without a split assignment: {', '.join(unassigned)}")
    kept_sets = {qs for qs, s in assignment.items() if s is split}
    labels = tuple(
        lb
        for lb in store.labels
        if (lb.is_positive and lb.query_set in kept_sets) or (not lb.is_positive and lb.split is split)
    )
    positive = {lb.pair.canonical() for lb in labels if lb.is_positive}
    pairs = {p: b for p, b in store.pairs.items() if p in positive}
    used = {v for lb in labels for v in (lb.pair.video_a, lb.pair.video_b)}
    for vid in sorted(used):
        meta = store.videos.get(vid)
        if meta is None:
            continue
        other = meta.split or assignment.get(meta.query_set or "")
        if other is not None and other is not split:
            raise DataError(f"video {vid} belongs to the {other.value} split but appears in {split.value} pairs")
    videos = {
        vid: m
        for vid, m in store.videos.items()
        if vid in used or (m.query_set in kept_sets) or m.split is split
    }
    return replace(store, pairs=pairs, labels=labels, videos=videos)
