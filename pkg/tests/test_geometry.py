import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from copyseg.geometry import (
    PairLabel,
    Polarity,
    SegmentBox,
    TimeInterval,
    VideoPairId,
    box,
    box_intersection,
    interval_union_length,
    project,
)
from oracles import union_length_raster


def iv(a, b):
    return TimeInterval(float(a), float(b))


def merge_sweep(spans):
    """Union length by merging sorted endpoint events."""
    events = sorted([(lo, 1) for lo, hi in spans] + [(hi, -1) for lo, hi in spans], key=lambda e: (e[0], -e[1]))
    depth, total, opened = 0, 0.0, None
    for t, kind in events:
        if kind == 1:
            if depth == 0:
                opened = t
            depth += 1
        else:
            depth -= 1
            if depth == 0:
                total += t - opened
    return total


def test_interval_invariants():
    assert iv(2, 5).length() == 3
    with pytest.raises(ValueError):
        TimeInterval(5.0, 2.0)
    with pytest.raises(ValueError):
        TimeInterval(-1.0, 2.0)


def test_union_empty():
    assert interval_union_length([]) == 0


def test_union_overlapping_pair():
    spans = [(0, 5), (3, 8)]
    expected = merge_sweep(spans)
    assert expected == 8
    assert interval_union_length([iv(*s) for s in spans]) == expected


def test_union_bridged():
    spans = [(0, 2), (4, 6), (1, 5)]
    expected = union_length_raster(spans, resolution=0.001, size=10)
    assert expected == pytest.approx(6.0, abs=1e-9)
    assert interval_union_length([iv(*s) for s in spans]) == 6


spans_st = st.lists(
    st.tuples(st.integers(0, 60), st.integers(0, 20)).map(lambda t: (t[0], t[0] + t[1])), max_size=12
)


@given(spans_st)
def test_union_matches_unit_raster(spans):
    assert interval_union_length([iv(*s) for s in spans]) == union_length_raster(spans, size=100)


@given(spans_st, st.randoms(use_true_random=False))
def test_union_permutation_and_splitting(spans, rnd):
    total = interval_union_length([iv(*s) for s in spans])
    shuffled = list(spans)
    rnd.shuffle(shuffled)
    assert interval_union_length([iv(*s) for s in shuffled]) == total
    pieces = []
    for lo, hi in spans:
        cut = rnd.randint(lo, hi)
        pieces += [(lo, cut), (cut, hi)]
    assert interval_union_length([iv(*s) for s in pieces]) == total


@given(spans_st)
def test_union_bounded_by_sum(spans):
    total = interval_union_length([iv(*s) for s in spans])
    assert total <= sum(hi - lo for lo, hi in spans)
    if len(spans) == 1:
        assert total == spans[0][1] - spans[0][0]


def test_union_equals_sum_only_for_disjoint():
    assert interval_union_length([iv(0, 2), iv(2, 5), iv(7, 8)]) == 6
    assert interval_union_length([iv(0, 3), iv(2, 5)]) < 6


def test_intersection_examples():
    a = box(0, 0, 10, 10)
    assert box_intersection(a, box(5, 5, 15, 15)) == box(5, 5, 10, 10)
    assert box_intersection(a, box(10, 10, 20, 20)) is None
    assert box_intersection(a, box(10, 0, 20, 10)) is None
    assert box_intersection(a, a) == a


box_st = st.tuples(st.integers(0, 30), st.integers(0, 30), st.integers(0, 15), st.integers(0, 15)).map(
    lambda t: box(t[0], t[1], t[0] + t[2], t[1] + t[3])
)


@given(box_st, box_st)
def test_intersection_commutative_and_contained(a, b):
    ab, ba = box_intersection(a, b), box_intersection(b, a)
    assert ab == ba
    if ab is not None:
        for outer in (a, b):
            assert outer.x.start <= ab.x.start <= ab.x.end <= outer.x.end
            assert outer.y.start <= ab.y.start <= ab.y.end <= outer.y.end
        assert ab.area() > 0


def test_project():
    assert project([box(0, 0, 10, 5)], "x") == [iv(0, 10)]
    assert project([box(0, 0, 10, 5)], "y") == [iv(0, 5)]
    boxes = [box(0, 0, 2, 2), box(3, 1, 5, 4)]
    expected = [iv(b.to_record()[1], b.to_record()[3]) for b in boxes]
    assert project(boxes, "y") == expected == [iv(0, 2), iv(1, 4)]
    with pytest.raises(ValueError):
        project(boxes, "z")


def test_box_record_order():
    b = SegmentBox.from_record([10, 0, 20, 10])
    assert b.x == iv(10, 20) and b.y == iv(0, 10)
    assert b.to_record() == [10, 0, 20, 10]
    assert b.area() == 100


def test_pair_canonical_transposes():
    pair = VideoPairId("b", "a")
    assert not pair.is_canonical
    assert pair.canonical() == VideoPairId("a", "b")
    assert pair.canonical_box(box(1, 2, 3, 4)) == box(2, 1, 4, 3)
    assert VideoPairId.parse("x-y") == VideoPairId("x", "y")
    with pytest.raises(ValueError):
        VideoPairId.parse("x-y-z")


def test_positive_label_needs_query_set():
    with pytest.raises(ValueError):
        PairLabel(VideoPairId("a", "b"), Polarity.POSITIVE)
    assert not PairLabel(VideoPairId("a", "b"), Polarity.NEGATIVE).is_positive
