from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, NamedTuple

from ..errors import ConfigError
from ..geometry import SegmentBox, TimeInterval, VideoPairId
from ..similarity import SimilarityMatrix

NMS_IOU = 0.5


@dataclass(frozen=True)
class AlignParams:
    """Knobs shared by the alignment algorithms.

    Lengths and gaps are counted in frames.  ``bin_width`` and ``min_votes``
    only affect Hough voting, ``max_link`` only the temporal network.
    """

    sim_threshold: float = 0.5
    min_length: int = 3
    max_gap: int = 2
    bin_width: int = 1
    min_votes: int = 3
    max_link: int = 5
    max_paths: int = 50

    def __post_init__(self) -> None:
        if not -1.0 < self.sim_threshold < 1.0:
            raise ConfigError(f"sim_threshold must lie in (-1, 1), got {self.sim_threshold}")
        lower = {"min_length": 1, "max_gap": 0, "bin_width": 1, "min_votes": 1, "max_link": 1, "max_paths": 1}
        for name, lo in lower.items():
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {value!r}")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Prediction:
    pair: VideoPairId
    boxes: tuple[SegmentBox, ...] = ()
    scores: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.scores:
            object.__setattr__(self, "scores", (1.0,) * len(self.boxes))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if len(self.scores) != len(self.boxes):
            raise ValueError(f"{self.pair}: {len(self.boxes)} boxes but {len(self.scores)} scores")

    def __len__(self) -> int:
        return len(self.boxes)

    def canonical(self) -> Prediction:
        if self.pair.is_canonical:
            return self
        return Prediction(self.pair.canonical(), tuple(b.transpose() for b in self.boxes), self.scores)


class Candidate(NamedTuple):
    """A detection in frame indices, inclusive on both ends."""

    rank: float
    score: float
    i0: int
    j0: int
    i1: int
    j1: int


def _cell_iou(a: Candidate, b: Candidate) -> float:
    iw = min(a.i1, b.i1) + 1 - max(a.i0, b.i0)
    jh = min(a.j1, b.j1) + 1 - max(a.j0, b.j0)
    if iw <= 0 or jh <= 0:
        return 0.0
    inter = iw * jh
    area_a = (a.i1 - a.i0 + 1) * (a.j1 - a.j0 + 1)
    area_b = (b.i1 - b.i0 + 1) * (b.j1 - b.j0 + 1)
    return inter / (area_a + area_b - inter)


def suppress(candidates: Iterable[Candidate], limit: int) -> list[Candidate]:
    """Greedy non-maximum suppression by descending rank.

    Ties go to the candidate starting at the smallest ``(i, j)``.  At most
    ``limit`` candidates survive.
    """
    ordered = sorted(candidates, key=lambda c: (-c.rank, c.i0, c.j0, c.i1, c.j1))
    kept: list[Candidate] = []
    for cand in ordered:
        if len(kept) >= limit:
            break
        if all(_cell_iou(cand, k) <= NMS_IOU for k in kept):
            kept.append(cand)
    return kept


def to_prediction(m: SimilarityMatrix, candidates: Iterable[Candidate]) -> Prediction:
    """Convert frame-index detections to second-based boxes.

    Frame ``i`` covers ``[i / fps, (i + 1) / fps)``.
    """
    boxes, scores = [], []
    for c in candidates:
        boxes.append(
            SegmentBox(
                TimeInterval(c.i0 / m.fps_a, (c.i1 + 1) / m.fps_a),
                TimeInterval(c.j0 / m.fps_b, (c.j1 + 1) / m.fps_b),
            )
        )
        scores.append(float(c.score))
    return Prediction(m.pair, tuple(boxes), tuple(scores))
