"""Subsequence dynamic time warping with free start and end on both axes.

Cell cost is ``1 - s``; cells costing at most ``1 - sim_threshold`` (the
cost ceiling) are matched.  Accumulation runs on the cost in excess of the
ceiling, so a path restarts at a matched cell whenever every predecessor has
already exceeded the ceiling budget, and the optimal path ends wherever the
accumulated excess is lowest.  Steps are (1, 0), (0, 1) and (1, 1), which
lets a path stretch one video relative to the other.
"""

from __future__ import annotations

import numba
import numpy as np

from ..similarity import SimilarityMatrix
from .common import AlignParams, Candidate, Prediction, suppress, to_prediction

_START, _DIAG, _DOWN, _RIGHT = 0, 1, 2, 3


@numba.njit(cache=True, nogil=True)
def _accumulate(excess):
    rows, cols = excess.shape
    acc = np.empty((rows, cols))
    move = np.zeros((rows, cols), np.int8)
    for i in range(rows):
        for j in range(cols):
            top = 0.0
            step = 0
            if i > 0 and j > 0 and acc[i - 1, j - 1] < top:
                top = acc[i - 1, j - 1]
                step = 1
            if i > 0 and acc[i - 1, j] < top:
                top = acc[i - 1, j]
                step = 2
            if j > 0 and acc[i, j - 1] < top:
                top = acc[i, j - 1]
                step = 3
            acc[i, j] = excess[i, j] + top
            move[i, j] = step
    return acc, move


def _trace(move: np.ndarray, i: int, j: int) -> list[tuple[int, int]]:
    path = [(i, j)]
    while True:
        step = move[i, j]
        if step == _START:
            break
        if step == _DIAG:
            i, j = i - 1, j - 1
        elif step == _DOWN:
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    path.reverse()
    return path


def split_path(path, matched, max_gap: int):
    """Split a warping path where more than ``max_gap`` consecutive cells are unmatched.

    Returns the matched cells of each piece.
    """
    pieces, current, misses = [], [], 0
    for cell, ok in zip(path, matched):
        if ok:
            current.append(cell)
            misses = 0
            continue
        misses += 1
        if misses > max_gap and current:
            pieces.append(current)
            current = []
    if current:
        pieces.append(current)
    return pieces


def align_dtw(m: SimilarityMatrix, p: AlignParams = AlignParams()) -> Prediction:
    """Repeatedly extract the optimal warping path and cut it into segments.

    Each path's cells are masked before the next search.  Extraction stops
    when the optimal path yields no segment with ``min_length`` matched
    cells.  A box's score is one minus the mean cost of its matched cells.
    """
    values = m.values
    ceiling = 1.0 - p.sim_threshold
    excess = (1.0 - values) - ceiling
    matched_grid = values >= p.sim_threshold
    if not matched_grid.any():
        return Prediction(m.pair)
    excess = np.ascontiguousarray(excess, dtype=np.float64)

    candidates = []
    while len(candidates) < p.max_paths:
        acc, move = _accumulate(excess)
        end = int(np.argmin(acc))
        ei, ej = divmod(end, acc.shape[1])
        if not acc[ei, ej] < 0:
            break
        path = _trace(move, ei, ej)
        matched = [bool(matched_grid[c]) for c in path]
        emitted = 0
        for piece in split_path(path, matched, p.max_gap):
            if len(piece) < p.min_length:
                continue
            pi = np.array([c[0] for c in piece])
            pj = np.array([c[1] for c in piece])
            score = float(values[pi, pj].mean())
            candidates.append(Candidate(score * len(piece), score, int(pi.min()), int(pj.min()), int(pi.max()), int(pj.max())))
            emitted += 1
        if not emitted:
            break
        rows, cols = zip(*path)
        excess[list(rows), list(cols)] = np.inf
    return to_prediction(m, suppress(candidates, p.max_paths))
