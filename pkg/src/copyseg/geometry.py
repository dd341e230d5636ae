"""Time intervals and segment boxes on the two temporal axes of a video pair.

A copied segment pair between video A and video B is a box on the
frame-to-frame similarity map: its ``x`` extent lives on A's time axis and its
``y`` extent on B's.  All coordinates are seconds stored as floats.

Box tuples follow the annotation record order
``(start_a, start_b, end_a, end_b)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence


@dataclass(frozen=True, order=True)
class TimeInterval:
    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.start >= 0:
            raise ValueError(f"invalid TimeInterval: negative start ({self.start})")
        if not self.start <= self.end:
            raise ValueError(f"invalid TimeInterval: end ({self.end}) < start ({self.start})")

    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True, order=True)
class SegmentBox:
    x: TimeInterval
    y: TimeInterval

    @classmethod
    def from_record(cls, record: Sequence[float]) -> SegmentBox:
        """Build a box from ``[start_a, start_b, end_a, end_b]``."""
        if len(record) != 4:
            raise ValueError(f"box record needs 4 numbers, got {len(record)}")
        sa, sb, ea, eb = (float(v) for v in record)
        return cls(TimeInterval(sa, ea), TimeInterval(sb, eb))

    def to_record(self) -> list[float]:
        return [self.x.start, self.y.start, self.x.end, self.y.end]

    def area(self) -> float:
        return self.x.length() * self.y.length()

    def transpose(self) -> SegmentBox:
        return SegmentBox(self.y, self.x)


def box(start_a: float, start_b: float, end_a: float, end_b: float) -> SegmentBox:
    """Shorthand for ``SegmentBox.from_record``."""
    return SegmentBox(TimeInterval(float(start_a), float(end_a)), TimeInterval(float(start_b), float(end_b)))


@dataclass(frozen=True, order=True)
class VideoPairId:
    """Ordered pair of video ids.

    ``canonical()`` sorts the ids lexicographically; ``transposed`` records
    whether that reordering swapped them, in which case boxes attached to
    the original pair must be transposed.
    """

    video_a: str
    video_b: str

    SEPARATOR = "-"

    @classmethod
    def parse(cls, key: str) -> VideoPairId:
        parts = key.split(cls.SEPARATOR)
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ValueError(f"pair key must look like 'idA{cls.SEPARATOR}idB', got {key!r}")
        return cls(parts[0], parts[1])

    @property
    def key(self) -> str:
        return f"{self.video_a}{self.SEPARATOR}{self.video_b}"

    @property
    def is_canonical(self) -> bool:
        return self.video_a <= self.video_b

    def canonical(self) -> VideoPairId:
        return self if self.is_canonical else VideoPairId(self.video_b, self.video_a)

    def canonical_box(self, b: SegmentBox) -> SegmentBox:
        """Express a box given on this pair in the canonical pair's orientation."""
        return b if self.is_canonical else b.transpose()

    def __str__(self) -> str:
        return self.key


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class PairLabel:
    pair: VideoPairId
    polarity: Polarity
    query_set: Optional[str] = None
    split: Optional[Split] = None

    def __post_init__(self) -> None:
        if self.polarity is Polarity.POSITIVE and not self.query_set:
            raise ValueError(f"positive pair {self.pair} must carry a query set id")

    @property
    def is_positive(self) -> bool:
        return self.polarity is Polarity.POSITIVE


def interval_union_length(intervals: Iterable[TimeInterval]) -> float:
    """Total measure of the union of ``intervals``."""
    spans = sorted((iv.start, iv.end) for iv in intervals)
    total = 0.0
    cur_start = cur_end = None
    for start, end in spans:
        if cur_end is None or start > cur_end:
            if cur_end is not None:
                total += cur_end - cur_start
            cur_start, cur_end = start, end
        elif end > cur_end:
            cur_end = end
    if cur_end is not None:
        total += cur_end - cur_start
    return total


def box_intersection(a: SegmentBox, b: SegmentBox) -> Optional[SegmentBox]:
    """Intersection of two boxes, or ``None`` unless it has positive area.

    Boxes that only share an edge or a corner do not overlap.
    """
    x0 = max(a.x.start, b.x.start)
    x1 = min(a.x.end, b.x.end)
    if x1 <= x0:
        return None
    y0 = max(a.y.start, b.y.start)
    y1 = min(a.y.end, b.y.end)
    if y1 <= y0:
        return None
    return SegmentBox(TimeInterval(x0, x1), TimeInterval(y0, y1))


def project(boxes: Iterable[SegmentBox], axis: str) -> list[TimeInterval]:
    """Projection of each box onto ``axis`` ("x" or "y"), in input order."""
    if axis == "x":
        return [b.x for b in boxes]
    if axis == "y":
        return [b.y for b in boxes]
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def box_iou(a: SegmentBox, b: SegmentBox) -> float:
    """Area IoU of two boxes; 0 when the union has no area."""
    inter = box_intersection(a, b)
    if inter is None:
        return 0.0
    ia = inter.area()
    union = a.area() + b.area() - ia
    return ia / union if union > 0 else 0.0
