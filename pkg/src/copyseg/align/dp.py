"""Gap-tolerant diagonal run detection on the binarized similarity map."""

from __future__ import annotations

import numpy as np

from ..similarity import SimilarityMatrix
from .common import AlignParams, Candidate, Prediction, suppress, to_prediction


def diagonal_runs(hits: np.ndarray, max_gap: int, min_length: int):
    """Yield ``(i0, j0, idx)`` for each maximal gap-tolerant diagonal run.

    ``idx`` holds the positions of the hit cells along the diagonal that
    starts at ``(i0, j0)``.  A run survives up to ``max_gap`` consecutive
    misses and must contain at least ``min_length`` hits.
    """
    rows, cols = hits.shape
    for k in range(-(rows - 1), cols):
        diag = np.diagonal(hits, offset=k)
        idx = np.flatnonzero(diag)
        if idx.size < min_length:
            continue
        i0, j0 = (0, k) if k >= 0 else (-k, 0)
        cuts = np.flatnonzero(np.diff(idx) - 1 > max_gap) + 1
        for run in np.split(idx, cuts):
            if run.size >= min_length:
                yield i0, j0, run


def align_dp(m: SimilarityMatrix, p: AlignParams = AlignParams()) -> Prediction:
    """Detect diagonal runs of matches, tolerating up to ``max_gap`` misses.

    Overlapping runs are suppressed in order of hit count; the reported
    score is the mean similarity of the hit cells.
    """
    values = m.values
    hits = values >= p.sim_threshold
    candidates = []
    for i0, j0, run in diagonal_runs(hits, p.max_gap, p.min_length):
        ri, rj = i0 + run, j0 + run
        score = float(values[ri, rj].mean())
        candidates.append(Candidate(float(run.size), score, int(ri[0]), int(rj[0]), int(ri[-1]), int(rj[-1])))
    return to_prediction(m, suppress(candidates, p.max_paths))
