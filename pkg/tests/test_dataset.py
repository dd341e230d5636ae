import json
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from copyseg.dataset import (
    AnnotationStore,
    VideoMeta,
    compose_through_seed,
    load_annotations,
    load_labels,
    propagate_transitivity,
    sample_negative_pairs,
    save_annotations,
    save_labels,
    save_metadata,
    split_filter,
)
from copyseg.errors import DataError
from copyseg.geometry import PairLabel, Polarity, Split, VideoPairId, box


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_load_record_order(tmp_path):
    store = load_annotations(write_json(tmp_path / "a.json", {"s-b": [[10, 0, 20, 10]]}))
    assert store.pairs[VideoPairId("b", "s")] == (box(0, 10, 10, 20),)
    assert store.boxes(VideoPairId("s", "b")) == (box(10, 0, 20, 10),)
    store = load_annotations(write_json(tmp_path / "b.json", {"a-b": [[10, 0, 20, 10]]}))
    (b,) = store.pairs[VideoPairId("a", "b")]
    assert (b.x.start, b.x.end, b.y.start, b.y.end) == (10, 20, 0, 10)


@pytest.mark.parametrize(
    "record, message",
    [([5, 5, 5, 10], "zero-length"), ([5, 0, 2, 10], "start after end"), ([-1, 0, 2, 10], "negative"), ([1, 2], "expected")],
)
def test_load_rejects_bad_records(tmp_path, record, message):
    with pytest.raises(DataError, match=message):
        load_annotations(write_json(tmp_path / "a.json", {"a-b": [record]}))


def test_two_records_one_pair(tmp_path):
    store = load_annotations(write_json(tmp_path / "a.json", {"a-b": [[0, 0, 5, 5], [10, 10, 20, 20]]}))
    assert len(store.pairs) == 1 and len(store.pairs[VideoPairId("a", "b")]) == 2


def test_duplicate_entries_merged(tmp_path, caplog):
    path = tmp_path / "a.json"
    path.write_text('{"a-b": [[0, 0, 5, 5]], "a-b": [[10, 10, 20, 20]], "b-a": [[0, 0, 5, 5]]}')
    store = load_annotations(path)
    assert store.pairs[VideoPairId("a", "b")] == (box(0, 0, 5, 5), box(10, 10, 20, 20))
    assert "merging" in caplog.text and "duplicate box" in caplog.text


def test_duration_bounds(tmp_path):
    meta = tmp_path / "m.csv"
    save_metadata({"a": VideoMeta(10.0, "c1", "q1", Split.TEST), "b": VideoMeta(30.0, "c1", "q1", Split.TEST)}, meta)
    with pytest.raises(DataError, match="ends after video a"):
        load_annotations(write_json(tmp_path / "a.json", {"a-b": [[0, 0, 12, 5]]}), meta)


def test_roundtrip_bit_exact(tmp_path):
    doc = {"a-b": [[0.1, 0.2, 1 / 3, 2 ** 0.5]], "c-d": [[1e-9, 3.0, 7.25, 1e6]]}
    first = load_annotations(write_json(tmp_path / "a.json", doc))
    save_annotations(first, tmp_path / "b.json")
    second = load_annotations(tmp_path / "b.json")
    assert first.pairs == second.pairs
    save_annotations(second, tmp_path / "c.json")
    assert (tmp_path / "b.json").read_bytes() == (tmp_path / "c.json").read_bytes()


@given(
    st.lists(
        st.tuples(
            st.floats(0, 1e4, allow_nan=False),
            st.floats(0, 1e4, allow_nan=False),
            st.floats(1e-3, 1e3),
            st.floats(1e-3, 1e3),
        ),
        min_size=1,
        max_size=5,
        unique=True,
    )
)
def test_roundtrip_property(tmp_path_factory, recs):
    d = tmp_path_factory.mktemp("rt")
    doc = {"a-b": [[sa, sb, sa + w, sb + h] for sa, sb, w, h in recs]}
    first = load_annotations(write_json(d / "a.json", doc))
    save_annotations(first, d / "b.json")
    assert load_annotations(d / "b.json").pairs == first.pairs


def test_labels_roundtrip(tmp_path):
    labels = [
        PairLabel(VideoPairId("a", "b"), Polarity.POSITIVE, "q1", Split.TEST),
        PairLabel(VideoPairId("c", "d"), Polarity.NEGATIVE, None, Split.TEST),
    ]
    save_labels(labels, tmp_path / "l.csv")
    assert load_labels(tmp_path / "l.csv") == labels


# -- transitivity ----------------------------------------------------------------


def seed_store(*entries):
    pairs = {}
    for pair_key, rec in entries:
        pair = VideoPairId.parse(pair_key)
        pairs.setdefault(pair.canonical(), []).append(pair.canonical_box(box(*rec)))
    return AnnotationStore({p: tuple(b) for p, b in pairs.items()})


def test_transitivity_example():
    store = seed_store(("S-B", (10, 0, 20, 10)), ("S-C", (15, 100, 25, 110)))
    (seg,) = propagate_transitivity(store, "S")
    assert seg.pair == VideoPairId("B", "C")
    assert seg.box == box(5, 100, 10, 105)
    assert seg.provisional


def test_transitivity_identity_and_touching():
    store = seed_store(("S-B", (0, 0, 10, 10)), ("S-C", (0, 0, 10, 10)))
    assert propagate_transitivity(store, "S")[0].box == box(0, 0, 10, 10)
    store = seed_store(("S-B", (0, 0, 10, 10)), ("S-C", (10, 0, 20, 10)))
    assert propagate_transitivity(store, "S") == []


seed_box = st.tuples(st.integers(0, 50), st.integers(1, 30), st.integers(0, 80), st.integers(1, 40)).map(
    lambda t: box(t[0], t[2], t[0] + t[1], t[2] + t[3])
)


@given(seed_box, seed_box)
def test_transitivity_symmetric_and_bounded(gb, gc):
    bc = compose_through_seed(gb, gc)
    cb = compose_through_seed(gc, gb)
    assert (bc is None) == (cb is None)
    if bc is None:
        return
    assert cb == bc.transpose()
    assert gb.y.start <= bc.x.start and bc.x.end <= gb.y.end
    assert gc.y.start <= bc.y.start and bc.y.end <= gc.y.end


# -- negatives and splits ---------------------------------------------------------


def small_store():
    videos = {
        "a1": VideoMeta(10.0, "movies", "q1", Split.TEST),
        "a2": VideoMeta(10.0, "movies", "q1", Split.TEST),
        "b1": VideoMeta(10.0, "sports", "q2", Split.TEST),
        "b2": VideoMeta(10.0, "sports", "q2", Split.TEST),
    }
    pairs = {VideoPairId("a1", "a2"): (box(0, 0, 5, 5),), VideoPairId("b1", "b2"): (box(0, 0, 5, 5),)}
    labels = tuple(PairLabel(p, Polarity.POSITIVE, videos[p.video_a].query_set, Split.TEST) for p in pairs)
    return AnnotationStore(pairs, labels, videos)


def test_sample_negatives():
    store = small_store()
    negs = sample_negative_pairs(store, 2, seed=1)
    assert len(negs) == 2 and len(set(negs)) == 2
    for lb in negs:
        a, b = store.videos[lb.pair.video_a], store.videos[lb.pair.video_b]
        assert a.category != b.category
        assert lb.pair not in store.positive_pairs()
        assert lb.polarity is Polarity.NEGATIVE
    assert sample_negative_pairs(store, 2, seed=1) == negs
    assert len(sample_negative_pairs(store, 4, seed=0)) == 4
    with pytest.raises(DataError):
        sample_negative_pairs(store, 5, seed=0)


def test_sample_negatives_needs_two_categories():
    store = AnnotationStore(videos={"a": VideoMeta(category="x"), "b": VideoMeta(category="x")})
    with pytest.raises(DataError, match="two categories"):
        sample_negative_pairs(store, 1, seed=0)


def three_set_store():
    videos = {}
    pairs = {}
    labels = []
    for qs, split, n in (("q1", Split.TRAIN, 3), ("q2", Split.VAL, 2), ("q3", Split.TEST, 4)):
        videos[f"{qs}s"] = VideoMeta(60.0, qs, qs, split)
        for k in range(n):
            vid = f"{qs}v{k}"
            videos[vid] = VideoMeta(60.0, qs, qs, split)
            pair = VideoPairId(f"{qs}s", vid)
            pairs[pair] = (box(0, 0, 10, 10),)
            labels.append(PairLabel(pair, Polarity.POSITIVE, qs, split))
    labels.append(PairLabel(VideoPairId("q3v0", "q3v1"), Polarity.NEGATIVE, None, Split.TEST))
    return AnnotationStore(pairs, tuple(labels), videos)


def test_split_filter_partitions():
    store = three_set_store()
    parts = {s: split_filter(store, s) for s in Split}
    assert [len(parts[s].pairs) for s in Split] == [3, 2, 4]
    assert sum(len(p.labels) for p in parts.values()) == len(store.labels)
    videos = [
        {v for lb in parts[s].labels for v in (lb.pair.video_a, lb.pair.video_b)} for s in Split
    ]
    assert not (videos[0] & videos[1]) and not (videos[0] & videos[2]) and not (videos[1] & videos[2])
    assert {lb.query_set for lb in parts[Split.TEST].labels if lb.is_positive} == {"q3"}


def test_split_filter_errors():
    store = three_set_store()
    with pytest.raises(DataError, match="no query set"):
        split_filter(AnnotationStore(), "test")

    labels = tuple(lb if lb.query_set != "q1" else replace(lb, split=None) for lb in store.labels)
    videos = {v: replace(m, split=None) if m.query_set == "q1" else m for v, m in store.videos.items()}
    with pytest.raises(DataError, match="without a split assignment: q1"):
        split_filter(AnnotationStore(store.pairs, labels, videos), "test")

    # a test pair that reuses a training video
    leak = PairLabel(VideoPairId("q1v0", "q3s"), Polarity.POSITIVE, "q3", Split.TEST)
    leaky = AnnotationStore({**store.pairs, leak.pair: (box(0, 0, 5, 5),)}, store.labels + (leak,), store.videos)
    with pytest.raises(DataError, match="video q1v0 belongs to the train split"):
        split_filter(leaky, "test")
