"""Temporal Hough voting over frame-offset bins."""

from __future__ import annotations

import numpy as np

from ..similarity import SimilarityMatrix
from .common import AlignParams, Candidate, Prediction, suppress, to_prediction


def _split_runs(ii: np.ndarray, jj: np.ndarray, max_gap: int) -> list[tuple[int, int]]:
    """Index ranges ``[lo, hi)`` of runs in matches sorted by ``(i, j)``."""
    if ii.size == 0:
        return []
    breaks = (np.diff(ii) - 1 > max_gap) | (np.abs(np.diff(jj)) - 1 > max_gap)
    cuts = np.flatnonzero(breaks) + 1
    bounds = np.concatenate(([0], cuts, [ii.size]))
    return list(zip(bounds[:-1].tolist(), bounds[1:].tolist()))


def align_hough(m: SimilarityMatrix, p: AlignParams = AlignParams()) -> Prediction:
    """Vote matched frame pairs into offset bins and merge each bin into runs.

    A box's score is the summed similarity of its member matches.
    """
    values = m.values
    ii, jj = np.nonzero(values >= p.sim_threshold)
    if ii.size == 0:
        return Prediction(m.pair)
    bins = np.floor_divide(ii - jj, p.bin_width)
    order = np.lexsort((jj, ii, bins))
    ii, jj, bins = ii[order], jj[order], bins[order]
    sims = values[ii, jj]

    _, starts, counts = np.unique(bins, return_index=True, return_counts=True)
    candidates = []
    for start, count in zip(starts.tolist(), counts.tolist()):
        if count < p.min_votes:
            continue
        bi, bj = ii[start : start + count], jj[start : start + count]
        for lo, hi in _split_runs(bi, bj, p.max_gap):
            if hi - lo < p.min_length:
                continue
            ri, rj = bi[lo:hi], bj[lo:hi]
            score = float(sims[start + lo : start + hi].sum())
            candidates.append(Candidate(score, score, int(ri.min()), int(rj.min()), int(ri.max()), int(rj.max())))
    return to_prediction(m, suppress(candidates, p.max_paths))
