"""Independent reference implementations used by the tests.

Nothing here calls into the interval or box geometry of the package.
"""

from __future__ import annotations

import numpy as np

from copyseg.geometry import SegmentBox, box

GRID = 50


def rasterize(b: SegmentBox, size: int = GRID) -> np.ndarray:
    """Unit cells ``[x, x+1) x [y, y+1)`` covered by an integer box."""
    mask = np.zeros((size, size), dtype=bool)
    mask[int(b.x.start) : int(b.x.end), int(b.y.start) : int(b.y.end)] = True
    return mask


def union_length_raster(intervals, resolution: float = 1.0, size: int = GRID) -> float:
    cells = np.zeros(int(round(size / resolution)) + 1, dtype=bool)
    for lo, hi in intervals:
        cells[int(round(lo / resolution)) : int(round(hi / resolution))] = True
    return cells.sum() * resolution


def _coverage_raster(targets, others, size):
    cov_x = cov_y = ext_x = ext_y = 0
    other_masks = [rasterize(o, size) for o in others]
    for t in targets:
        ext_x += int(t.x.end - t.x.start)
        ext_y += int(t.y.end - t.y.start)
        tm = rasterize(t, size)
        proj_x = np.zeros(size, dtype=bool)
        proj_y = np.zeros(size, dtype=bool)
        for om in other_masks:
            inter = tm & om
            proj_x |= inter.any(axis=1)
            proj_y |= inter.any(axis=0)
        cov_x += int(proj_x.sum())
        cov_y += int(proj_y.sum())
    rx = cov_x / ext_x if ext_x > 0 else 0.0
    ry = cov_y / ext_y if ext_y > 0 else 0.0
    return rx * ry


def evaluate_pair_raster(gt, pred, size: int = GRID) -> tuple[float, float]:
    """Brute-force recall and precision on integer boxes by counting unit cells."""
    if not gt:
        return 1.0, (1.0 if not pred else 0.0)
    if not pred:
        return 0.0, 1.0
    return _coverage_raster(gt, pred, size), _coverage_raster(pred, gt, size)


def random_int_box(rng: np.random.Generator, size: int = GRID, allow_degenerate: bool = False) -> SegmentBox:
    lo = 0 if allow_degenerate else 1
    w = int(rng.integers(lo, size // 2 + 1))
    h = int(rng.integers(lo, size // 2 + 1))
    x0 = int(rng.integers(0, size - w + 1))
    y0 = int(rng.integers(0, size - h + 1))
    return box(x0, y0, x0 + w, y0 + h)


def random_case(rng: np.random.Generator, size: int = GRID):
    n_gt = int(rng.integers(0, 5))
    n_pred = int(rng.integers(0, 6))
    gt = [random_int_box(rng, size) for _ in range(n_gt)]
    pred = [random_int_box(rng, size, allow_degenerate=rng.random() < 0.1) for _ in range(n_pred)]
    return gt, pred


def tile(b: SegmentBox, rng: np.random.Generator, pieces: int, shuffle_y: bool = False) -> list[SegmentBox]:
    """Split ``b`` into sub-boxes whose x and y projections each tile ``b``'s.

    With ``shuffle_y`` the y pieces are paired with the x pieces in random
    order, which still tiles both projections.
    """
    xs = np.sort(rng.uniform(b.x.start, b.x.end, pieces - 1))
    ys = np.sort(rng.uniform(b.y.start, b.y.end, pieces - 1))
    xs = [b.x.start, *xs.tolist(), b.x.end]
    ys = [b.y.start, *ys.tolist(), b.y.end]
    order = rng.permutation(pieces) if shuffle_y else np.arange(pieces)
    return [box(xs[k], ys[yk], xs[k + 1], ys[yk + 1]) for k, yk in enumerate(order.tolist())]
