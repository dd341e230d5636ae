"""Temporal network alignment: repeated maximum-weight paths in a DAG of matches.

Nodes are frame pairs with similarity at or above the threshold, weighted by
that similarity.  An edge joins ``(i, j)`` to ``(i', j')`` when both indices
advance by between 1 and ``max_link`` frames.
"""

from __future__ import annotations

import numba
import numpy as np

from ..similarity import SimilarityMatrix
from .common import AlignParams, Candidate, Prediction, suppress, to_prediction


@numba.njit(cache=True, nogil=True)
def _best_path(node_i, node_j, weight, alive, slot, max_link):
    """Longest path over live nodes in lexicographic order.

    ``slot`` maps a cell to its node index (-1 when the cell is not a node).
    Returns the node indices of the best path, first node first.
    """
    n = node_i.size
    best = np.full(n, -np.inf)
    prev = np.full(n, -1, np.int64)
    rows, cols = slot.shape
    for v in range(n):
        if not alive[v]:
            continue
        i, j = node_i[v], node_j[v]
        top = 0.0
        arg = -1
        for ii in range(max(0, i - max_link), i):
            for jj in range(max(0, j - max_link), j):
                u = slot[ii, jj]
                if u >= 0 and alive[u] and best[u] > top:
                    top = best[u]
                    arg = u
        best[v] = weight[v] + top
        prev[v] = arg
    end = -1
    for v in range(n):
        if alive[v] and (end < 0 or best[v] > best[end]):
            end = v
    if end < 0:
        return np.empty(0, np.int64)
    length = 0
    v = end
    while v >= 0:
        length += 1
        v = prev[v]
    path = np.empty(length, np.int64)
    v = end
    for k in range(length - 1, -1, -1):
        path[k] = v
        v = prev[v]
    return path


def align_tn(m: SimilarityMatrix, p: AlignParams = AlignParams()) -> Prediction:
    """Extract maximum-weight paths until the best remaining one is too short.

    Each extracted path with at least ``min_length`` nodes becomes a box
    scored by the path weight; its nodes are then removed from the network.
    """
    values = m.values
    node_i, node_j = np.nonzero(values >= p.sim_threshold)
    if node_i.size == 0:
        return Prediction(m.pair)
    node_i = node_i.astype(np.int64)
    node_j = node_j.astype(np.int64)
    weight = values[node_i, node_j].astype(np.float64)
    slot = np.full(values.shape, -1, np.int64)
    slot[node_i, node_j] = np.arange(node_i.size)
    alive = np.ones(node_i.size, np.bool_)

    candidates = []
    while len(candidates) < p.max_paths and alive.any():
        path = _best_path(node_i, node_j, weight, alive, slot, p.max_link)
        if path.size < p.min_length:
            break
        alive[path] = False
        pi, pj = node_i[path], node_j[path]
        score = float(weight[path].sum())
        candidates.append(Candidate(score, score, int(pi.min()), int(pj.min()), int(pi.max()), int(pj.max())))
    return to_prediction(m, suppress(candidates, p.max_paths))
