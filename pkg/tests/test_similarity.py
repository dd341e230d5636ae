import numpy as np
import pytest

from copyseg.errors import DataError
from copyseg.similarity import (
    FrameFeatureSequence,
    SimilarityMatrix,
    chamfer_similarity_map,
    cosine_similarity_map,
    load_features,
    load_similarity,
    normalize_features,
    save_features,
    save_similarity,
    similarity_map,
)

E = np.eye(4)


def seq(data, vid="v", **kw):
    return FrameFeatureSequence(vid, np.asarray(data, dtype=float), **kw)


def test_cosine_self_and_orthogonal():
    assert cosine_similarity_map(seq([E[0]]), seq([E[0]])).values.tolist() == [[1.0]]
    assert cosine_similarity_map(seq([E[0]]), seq([E[1]])).values.tolist() == [[0.0]]


def test_cosine_hand_value():
    # 0.6*1 + 0.8*0 over norms 1 and 1
    m = cosine_similarity_map(seq([[0.6, 0.8]]), seq([[1.0, 0.0]]))
    assert m.values[0, 0] == pytest.approx(0.6, abs=1e-12)


def test_cosine_errors():
    with pytest.raises(DataError, match="dimension"):
        cosine_similarity_map(seq([[1, 0]]), seq([[1, 0, 0]]))
    with pytest.raises(DataError, match="frame 1"):
        cosine_similarity_map(seq([[1, 0], [0, 0]], vid="zz"), seq([[1, 0]]))
    with pytest.raises(DataError, match="r=1"):
        cosine_similarity_map(seq(np.ones((1, 2, 3))), seq(np.ones((1, 1, 3))))


def test_cosine_transpose_symmetry():
    rng = np.random.default_rng(0)
    a, b = seq(rng.normal(size=(5, 8)), "a"), seq(rng.normal(size=(7, 8)), "b")
    np.testing.assert_allclose(cosine_similarity_map(a, b).values.T, cosine_similarity_map(b, a).values, atol=1e-12)


def test_chamfer_examples():
    a = seq([[E[0], E[1]]], normalized=True)
    assert chamfer_similarity_map(a, a).values.tolist() == [[1.0]]
    b = seq([[E[0], E[2]]], normalized=True)
    # best matches: e1 -> 1, e2 -> 0, mean 0.5
    assert chamfer_similarity_map(a, b).values[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_chamfer_requires_normalized():
    with pytest.raises(DataError, match="normalized"):
        chamfer_similarity_map(seq([[E[0], E[1]]]), seq([[E[0], E[1]]], normalized=True))


def test_chamfer_single_region_equals_cosine():
    rng = np.random.default_rng(1)
    a = normalize_features(seq(rng.normal(size=(6, 16)), "a"))
    b = normalize_features(seq(rng.normal(size=(4, 16)), "b"))
    np.testing.assert_allclose(chamfer_similarity_map(a, b).values, cosine_similarity_map(a, b).values, atol=1e-6)


def test_chamfer_in_range_and_not_forced_symmetric():
    rng = np.random.default_rng(2)
    a = normalize_features(seq(rng.normal(size=(3, 4, 8)), "a"))
    b = normalize_features(seq(rng.normal(size=(5, 4, 8)), "b"))
    ab = chamfer_similarity_map(a, b).values
    ba = chamfer_similarity_map(b, a).values
    assert ab.shape == (3, 5) and ba.shape == (5, 3)
    assert ab.min() >= -1 and ab.max() <= 1


def test_normalize():
    n = normalize_features(seq([[3.0, 4.0]]))
    np.testing.assert_allclose(n.data[0, 0], [0.6, 0.8])
    assert n.normalized
    assert normalize_features(n) is n
    np.testing.assert_array_equal(normalize_features(seq([[1.0, 0.0]])).data, [[[1.0, 0.0]]])
    with pytest.raises(DataError, match="zero-norm"):
        normalize_features(seq([[0.0, 0.0]]))


def test_matrix_rejects_out_of_range():
    with pytest.raises(DataError):
        SimilarityMatrix(None, np.array([[1.5]]))


def test_feature_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    f = normalize_features(seq(rng.normal(size=(4, 2, 5)).astype(np.float32), "vid1", fps=2.0))
    path = save_features(f, tmp_path / "vid1.feat")
    g = load_features(path)
    assert (g.video_id, g.fps, g.normalized, g.data.shape) == ("vid1", 2.0, True, (4, 2, 5))
    np.testing.assert_allclose(g.data, f.data, atol=1e-7)


def test_feature_csv_fallback(tmp_path):
    p = tmp_path / "clip.csv"
    p.write_text("1,0,0,1\n0,1,1,0\n")
    f = load_features(p, regions=2)
    assert f.video_id == "clip" and f.data.shape == (2, 2, 2)


def test_feature_blob_size_mismatch(tmp_path):
    f = seq(np.ones((2, 3)), "x")
    path = save_features(f, tmp_path / "x.feat")
    path.with_suffix(".f32").write_bytes(b"\0" * 8)
    with pytest.raises(DataError, match="expected 6 floats"):
        load_features(path)


def test_similarity_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    a, b = seq(rng.normal(size=(3, 6)), "a"), seq(rng.normal(size=(2, 6)), "b")
    m = similarity_map(a, b, "cosine")
    path = save_similarity(m, tmp_path / "a-b.sim")
    back = load_similarity(path)
    assert back.pair == m.pair and back.shape == (3, 2)
    np.testing.assert_allclose(back.values, m.values, atol=1e-6)
