"""Synthetic similarity maps and small copy datasets for tests and demos."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import AnnotationStore, VideoMeta, sample_negative_pairs, save_annotations, save_labels, save_metadata
from .geometry import PairLabel, Polarity, SegmentBox, Split, TimeInterval, VideoPairId
from .similarity import FrameFeatureSequence, SimilarityMatrix, save_features


@dataclass(frozen=True)
class PlantedSegment:
    i0: int
    j0: int
    length: int

    def box(self, fps: float = 1.0) -> SegmentBox:
        return SegmentBox(
            TimeInterval(self.i0 / fps, (self.i0 + self.length) / fps),
            TimeInterval(self.j0 / fps, (self.j0 + self.length) / fps),
        )


def background(rng: np.random.Generator, shape: tuple[int, int], cap: float, low: float = -0.2) -> np.ndarray:
    """I.i.d. uniform noise in ``[low, cap)``."""
    return rng.uniform(low, cap, size=shape)


def _disjoint_starts(rng, size: int, lengths: list[int], gap: int) -> Optional[list[int]]:
    """Random non-overlapping starts for ``lengths`` inside ``[0, size)``."""
    order = rng.permutation(len(lengths))
    slack = size - sum(lengths) - gap * (len(lengths) - 1)
    if slack < 0:
        return None
    cuts = np.sort(rng.integers(0, slack + 1, size=len(lengths)))
    starts = [0] * len(lengths)
    pos = 0
    prev_cut = 0
    for rank, k in enumerate(order):
        pos += cuts[rank] - prev_cut
        prev_cut = cuts[rank]
        starts[k] = int(pos)
        pos += lengths[k] + gap
    return starts


def planted_matrix(
    rng: np.random.Generator,
    shape: tuple[int, int] = (200, 200),
    n_segments: int = 1,
    min_length: int = 10,
    max_length: int = 50,
    noise_cap: float = 0.45,
    gap: int = 1,
) -> tuple[np.ndarray, list[PlantedSegment]]:
    """Noise below ``noise_cap`` with ``n_segments`` diagonal runs of similarity 1.

    Segments occupy disjoint frame ranges on both axes, separated by at
    least ``gap`` frames, and their order on the two axes is independent.
    """
    values = background(rng, shape, noise_cap)
    lengths = [int(v) for v in rng.integers(min_length, max_length + 1, size=n_segments)]
    xs = _disjoint_starts(rng, shape[0], lengths, gap)
    ys = _disjoint_starts(rng, shape[1], lengths, gap)
    if xs is None or ys is None:
        raise ValueError("segments do not fit in the matrix")
    segments = []
    for i0, j0, n in zip(xs, ys, lengths):
        k = np.arange(n)
        values[i0 + k, j0 + k] = 1.0
        segments.append(PlantedSegment(i0, j0, n))
    return values, segments


def staircase_matrix(
    rng: np.random.Generator, shape: tuple[int, int], i0: int, j0: int, length: int, noise_cap: float = 0.45
) -> np.ndarray:
    """A half-speed copy: frame ``i0 + k`` of A matches frames ``j0 + 2k`` and ``j0 + 2k + 1`` of B."""
    values = background(rng, shape, noise_cap)
    k = np.arange(length)
    values[i0 + k, j0 + 2 * k] = 1.0
    values[i0 + k, j0 + 2 * k + 1] = 1.0
    return values


def as_matrix(values: np.ndarray, a: str = "a", b: str = "b", fps: float = 1.0) -> SimilarityMatrix:
    return SimilarityMatrix(VideoPairId(a, b), values, fps, fps)


# -- feature-level dataset ------------------------------------------------------

CATEGORIES = ["movies", "sports", "games", "news", "music", "animation"]
SPLIT_CYCLE = [Split.TRAIN, Split.VAL, Split.TEST]


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def make_dataset(
    out_dir,
    *,
    query_sets: int = 4,
    searched_per_set: int = 3,
    negatives: int = 8,
    dim: int = 64,
    frames: tuple[int, int] = (24, 48),
    copy_noise: float = 0.1,
    seed: int = 0,
) -> AnnotationStore:
    """Write a small copy dataset with features under ``out_dir``.

    Each query set has a seed video and ``searched_per_set`` videos that copy
    one segment of it.  Layout: ``features/<video>.feat``,
    ``annotations.json``, ``metadata.csv`` and ``labels.csv``.
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)

    videos: dict[str, VideoMeta] = {}
    pairs: dict[VideoPairId, tuple[SegmentBox, ...]] = {}
    labels: list[PairLabel] = []
    for q in range(query_sets):
        qs = f"q{q + 1}"
        category = CATEGORIES[q % len(CATEGORIES)]
        split = SPLIT_CYCLE[q % len(SPLIT_CYCLE)]
        seed_id = f"{qs}s0"
        m_seed = int(rng.integers(*frames))
        seed_frames = _unit_rows(rng, m_seed, dim)
        save_features(FrameFeatureSequence(seed_id, seed_frames, normalized=True), feat_dir / f"{seed_id}.feat")
        videos[seed_id] = VideoMeta(float(m_seed), category, qs, split)
        for k in range(1, searched_per_set + 1):
            vid = f"{qs}v{k}"
            m = int(rng.integers(*frames))
            length = int(rng.integers(8, min(m, m_seed) // 2 + 1))
            s = int(rng.integers(0, m_seed - length + 1))
            u = int(rng.integers(0, m - length + 1))
            data = _unit_rows(rng, m, dim)
            copied = seed_frames[s : s + length] + copy_noise * rng.standard_normal((length, dim)) / np.sqrt(dim)
            data[u : u + length] = copied / np.linalg.norm(copied, axis=1, keepdims=True)
            save_features(FrameFeatureSequence(vid, data, normalized=True), feat_dir / f"{vid}.feat")
            videos[vid] = VideoMeta(float(m), category, qs, split)
            pair = VideoPairId(seed_id, vid)
            b = pair.canonical_box(SegmentBox(TimeInterval(s, s + length), TimeInterval(u, u + length)))
            pairs[pair.canonical()] = (b,)
            labels.append(PairLabel(pair.canonical(), Polarity.POSITIVE, qs, split))

    store = AnnotationStore(dict(sorted(pairs.items())), tuple(labels), videos)
    if negatives:
        labels += sample_negative_pairs(store, negatives, seed, split=None)
        store = AnnotationStore(store.pairs, tuple(labels), videos)
    save_annotations(store, out / "annotations.json")
    save_metadata(videos, out / "metadata.csv")
    save_labels(labels, out / "labels.csv")
    return store
