"""Frame features and frame-to-frame similarity maps.

Features are computed elsewhere and arrive as files.  On disk both features
and similarity maps are a small ``key=value`` text manifest pointing to a raw
little-endian float32 blob stored in row-major order.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DataError
from .geometry import VideoPairId

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

VALUE_TOLERANCE = 1e-6
_NORM_TOLERANCE = 1e-5


@dataclass(frozen=True, eq=False)
class FrameFeatureSequence:
    """Per-frame descriptors of one video, shaped ``(frames, regions, dim)``.

    Global features use a single region.
    """

    video_id: str
    data: np.ndarray
    fps: float = 1.0
    normalized: bool = False

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, None, :]
        if data.ndim != 3:
            raise DataError(f"{self.video_id}: features must be (m, r, d), got shape {data.shape}")
        m, r, d = data.shape
        if m < 1 or r < 1 or d < 1:
            raise DataError(f"{self.video_id}: empty feature dimension in shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError(f"{self.video_id}: non-finite feature values")
        if not self.fps > 0:
            raise DataError(f"{self.video_id}: fps must be positive, got {self.fps}")
        if self.normalized and np.abs(np.linalg.norm(data, axis=2) - 1.0).max() > _NORM_TOLERANCE:
            raise DataError(f"{self.video_id}: flagged normalized but region vectors are not unit length")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def frame_count(self) -> int:
        return self.data.shape[0]

    @property
    def region_count(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Similarity of every frame of video A (rows) with every frame of video B (columns)."""

    pair: VideoPairId
    values: np.ndarray
    fps_a: float = 1.0
    fps_b: float = 1.0
    kind: str = "cosine"
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"{self.pair}: similarity values must be a non-empty 2-D array, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError(f"{self.pair}: non-finite similarity values")
        if values.min() < -1 - VALUE_TOLERANCE or values.max() > 1 + VALUE_TOLERANCE:
            raise DataError(f"{self.pair}: similarity values outside [-1, 1]")
        if not (self.fps_a > 0 and self.fps_b > 0):
            raise DataError(f"{self.pair}: fps must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def transpose(self) -> SimilarityMatrix:
        return SimilarityMatrix(
            VideoPairId(self.pair.video_b, self.pair.video_a),
            self.values.T,
            fps_a=self.fps_b,
            fps_b=self.fps_a,
            kind=self.kind,
        )


def _zero_norm_error(f: FrameFeatureSequence, flat_index: int) -> DataError:
    frame, region = divmod(int(flat_index), f.region_count)
    where = f"frame {frame}" if f.region_count == 1 else f"frame {frame} region {region}"
    return DataError(f"{f.video_id}: zero-norm feature vector at {where}")


def normalize_features(f: FrameFeatureSequence) -> FrameFeatureSequence:
    """Scale every region vector to unit L2 norm.

    Sequences already flagged as normalized are returned unchanged.
    """
    if f.normalized:
        return f
    norms = np.linalg.norm(f.data, axis=2)
    zero = np.flatnonzero(norms.ravel() == 0)
    if zero.size:
        raise _zero_norm_error(f, zero[0])
    return replace(f, data=f.data / norms[:, :, None], normalized=True)


def _check_pair(a: FrameFeatureSequence, b: FrameFeatureSequence) -> None:
    if a.dim != b.dim:
        raise DataError(f"feature dimension mismatch: {a.video_id} has d={a.dim}, {b.video_id} has d={b.dim}")


def cosine_similarity_map(a: FrameFeatureSequence, b: FrameFeatureSequence) -> SimilarityMatrix:
    """Cosine similarity between every frame of ``a`` and every frame of ``b``."""
    _check_pair(a, b)
    for f in (a, b):
        if f.region_count != 1:
            raise DataError(f"{f.video_id}: cosine similarity needs global features (r=1), got r={f.region_count}")
    a = normalize_features(a)
    b = normalize_features(b)
    values = a.data[:, 0, :] @ b.data[:, 0, :].T
    return SimilarityMatrix(
        VideoPairId(a.video_id, b.video_id), np.clip(values, -1.0, 1.0), a.fps, b.fps, kind="cosine"
    )


def chamfer_similarity_map(a: FrameFeatureSequence, b: FrameFeatureSequence) -> SimilarityMatrix:
    """Chamfer similarity between region-structured frames.

    Entry ``(i, j)`` is the mean over the regions of frame ``i`` of ``a`` of
    the best inner product against any region of frame ``j`` of ``b``.  The
    operation is not symmetric in ``a`` and ``b``.
    """
    _check_pair(a, b)
    for f in (a, b):
        if not f.normalized:
            raise DataError(f"{f.video_id}: Chamfer similarity needs normalized features")
    ma, ra, d = a.data.shape
    mb, rb, _ = b.data.shape
    if ra == 1 and rb == 1:
        values = a.data[:, 0, :] @ b.data[:, 0, :].T
    else:
        # (ma*ra, mb*rb) region-to-region products
        dots = a.data.reshape(ma * ra, d) @ b.data.reshape(mb * rb, d).T
        values = dots.reshape(ma, ra, mb, rb).max(axis=3).mean(axis=1)
    return SimilarityMatrix(
        VideoPairId(a.video_id, b.video_id), np.clip(values, -1.0, 1.0), a.fps, b.fps, kind="chamfer"
    )


SIMILARITY_KINDS = {"cosine": cosine_similarity_map, "chamfer": chamfer_similarity_map}


def similarity_map(a: FrameFeatureSequence, b: FrameFeatureSequence, kind: str = "cosine") -> SimilarityMatrix:
    try:
        fn = SIMILARITY_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown similarity kind {kind!r}") from None
    if kind == "chamfer":
        a, b = normalize_features(a), normalize_features(b)
    return fn(a, b)


# -- file formats -----------------------------------------------------------


def read_manifest(path: PathLike) -> dict[str, str]:
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
            entries[key.strip()] = value.strip()
    return entries


def write_manifest(path: PathLike, entries: dict[str, object], header: str) -> None:
    lines = [f"# {header}"] + [f"{k}={v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _manifest_int(entries: dict[str, str], key: str, path: PathLike) -> int:
    try:
        return int(entries[key])
    except (KeyError, ValueError):
        raise DataError(f"{path}: missing or invalid {key!r}") from None


def _manifest_float(entries: dict[str, str], key: str, path: PathLike, default: Optional[float] = None) -> float:
    if key not in entries and default is not None:
        return default
    try:
        return float(entries[key])
    except (KeyError, ValueError):
        raise DataError(f"{path}: missing or invalid {key!r}") from None


def _read_blob(manifest_path: Path, entries: dict[str, str], count: int) -> np.ndarray:
    if entries.get("dtype", "float32") != "float32":
        raise DataError(f"{manifest_path}: only float32 blobs are supported")
    order = entries.get("byte_order", "little")
    if order not in ("little", "big"):
        raise DataError(f"{manifest_path}: unknown byte_order {order!r}")
    if "data" not in entries:
        raise DataError(f"{manifest_path}: missing 'data' entry")
    blob = manifest_path.parent / entries["data"]
    if not blob.is_file():
        raise DataError(f"{manifest_path}: data file {blob} not found")
    raw = np.fromfile(blob, dtype="<f4" if order == "little" else ">f4")
    if raw.size != count:
        raise DataError(f"{manifest_path}: expected {count} floats in {blob.name}, found {raw.size}")
    return raw.astype(np.float64)


def _parse_bool(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes")


def save_features(f: FrameFeatureSequence, path: PathLike) -> Path:
    """Write ``f`` as ``<path>`` manifest plus a sibling ``.f32`` blob."""
    path = Path(path)
    blob = path.with_suffix(".f32")
    np.asarray(f.data, dtype="<f4").tofile(blob)
    write_manifest(
        path,
        {
            "video_id": f.video_id,
            "fps": repr(f.fps),
            "m": f.frame_count,
            "r": f.region_count,
            "d": f.dim,
            "dtype": "float32",
            "byte_order": "little",
            "normalized": str(f.normalized).lower(),
            "data": blob.name,
        },
        "copyseg frame features",
    )
    return path


def load_features(path: PathLike, *, regions: int = 1, fps: float = 1.0) -> FrameFeatureSequence:
    """Load features from a manifest, or from a CSV file (one frame per line).

    For CSV input ``regions`` and ``fps`` describe the layout and the video id
    is the file stem.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature file not found: {path}")
    if path.suffix.lower() == ".csv":
        return _load_features_csv(path, regions=regions, fps=fps)
    entries = read_manifest(path)
    m, r, d = (_manifest_int(entries, k, path) for k in ("m", "r", "d"))
    data = _read_blob(path, entries, m * r * d).reshape(m, r, d)
    return FrameFeatureSequence(
        entries.get("video_id", path.stem),
        data,
        fps=_manifest_float(entries, "fps", path, default=1.0),
        normalized=_parse_bool(entries.get("normalized", "false")),
    )


def _load_features_csv(path: Path, *, regions: int, fps: float) -> FrameFeatureSequence:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if not rows:
        raise DataError(f"{path}: no frames")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: frames have differing lengths {sorted(widths)}")
    width = widths.pop()
    if width % regions:
        raise DataError(f"{path}: row length {width} is not divisible by region count {regions}")
    data = np.array(rows).reshape(len(rows), regions, width // regions)
    return FrameFeatureSequence(path.stem, data, fps=fps)


def save_similarity(s: SimilarityMatrix, path: PathLike) -> Path:
    path = Path(path)
    blob = path.with_suffix(".f32")
    np.asarray(s.values, dtype="<f4").tofile(blob)
    entries = {
        "video_a": s.pair.video_a,
        "video_b": s.pair.video_b,
        "m_a": s.shape[0],
        "m_b": s.shape[1],
        "fps_a": repr(float(s.fps_a)),
        "fps_b": repr(float(s.fps_b)),
        "kind": s.kind,
        "dtype": "float32",
        "byte_order": "little",
        "data": blob.name,
    }
    entries.update(s.extra)
    write_manifest(path, entries, "copyseg similarity matrix")
    return path


def load_similarity(path: PathLike) -> SimilarityMatrix:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"similarity file not found: {path}")
    entries = read_manifest(path)
    for key in ("video_a", "video_b"):
        if key not in entries:
            raise DataError(f"{path}: missing {key!r}")
    m_a, m_b = _manifest_int(entries, "m_a", path), _manifest_int(entries, "m_b", path)
    values = _read_blob(path, entries, m_a * m_b).reshape(m_a, m_b)
    return SimilarityMatrix(
        VideoPairId(entries["video_a"], entries["video_b"]),
        values,
        fps_a=_manifest_float(entries, "fps_a", path, default=1.0),
        fps_b=_manifest_float(entries, "fps_b", path, default=1.0),
        kind=entries.get("kind", "cosine"),
    )
