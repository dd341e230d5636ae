"""Prediction files.

One JSON object per line, mapping a pair key ``"idA-idB"`` to a list of
``[start_a, start_b, end_a, end_b]`` records in seconds, optionally followed
by a fifth score element.  A single JSON object spanning the whole file is
accepted as well.  Pairs are canonicalized on import, transposing boxes of
reversed pairs.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from ..errors import DataError
from ..geometry import SegmentBox, TimeInterval, VideoPairId
from .common import Prediction

log = logging.getLogger(__name__)


def _records(text: str, path: Path) -> list[tuple[Optional[int], str, object]]:
    lines = [(n, line) for n, line in enumerate(text.splitlines(), 1) if line.strip()]
    try:
        parsed = [(n, json.loads(line)) for n, line in lines]
    except json.JSONDecodeError:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{exc.lineno}: malformed prediction file: {exc.msg}") from None
        parsed = [(None, doc)]
    out = []
    for lineno, obj in parsed:
        if not isinstance(obj, dict):
            raise DataError(f"{path}:{lineno or '?'}: expected an object mapping pair ids to boxes")
        out.extend((lineno, key, value) for key, value in obj.items())
    return out


def _clip_interval(lo: float, hi: float, limit: Optional[float]) -> tuple[float, float]:
    lo = max(lo, 0.0)
    if limit is not None:
        hi = min(hi, limit)
        lo = min(lo, limit)
    return lo, max(lo, hi)


def import_predictions(
    source: Union[str, Path],
    *,
    durations: Optional[Mapping[str, float]] = None,
    strict: bool = False,
) -> list[Prediction]:
    """Read a prediction file into canonical predictions sorted by pair key.

    With ``durations`` given, boxes reaching outside a video raise in
    ``strict`` mode and are clamped with a warning otherwise.  Repeated pair
    entries are merged.
    """
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read prediction file {path}: {exc}") from None
    durations = durations or {}
    merged: dict[VideoPairId, tuple[list[SegmentBox], list[float]]] = {}
    for lineno, key, value in _records(text, path):
        where = f"{path}:{lineno or '?'} pair {key}"
        try:
            pair = VideoPairId.parse(key)
        except ValueError as exc:
            raise DataError(f"{where}: {exc}") from None
        if not isinstance(value, list):
            raise DataError(f"{where}: boxes must be a list")
        boxes, scores = merged.setdefault(pair.canonical(), ([], []))
        for k, rec in enumerate(value):
            if (
                not isinstance(rec, list)
                or len(rec) not in (4, 5)
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rec)
                or not all(math.isfinite(v) for v in rec)
            ):
                raise DataError(f"{where}: malformed box record #{k}: {rec!r}")
            sa, sb, ea, eb = (float(v) for v in rec[:4])
            if sa > ea or sb > eb:
                raise DataError(f"{where}: box #{k} has start after end: {rec!r}")
            limit_a, limit_b = durations.get(pair.video_a), durations.get(pair.video_b)
            outside = min(sa, sb) < 0 or (limit_a is not None and ea > limit_a) or (limit_b is not None and eb > limit_b)
            if outside:
                if strict:
                    raise DataError(f"{where}: box #{k} outside the videos' time range: {rec!r}")
                log.warning("%s: box #%d outside the videos' time range, clamping", where, k)
                sa, ea = _clip_interval(sa, ea, limit_a)
                sb, eb = _clip_interval(sb, eb, limit_b)
            b = SegmentBox(TimeInterval(sa, ea), TimeInterval(sb, eb))
            boxes.append(pair.canonical_box(b))
            scores.append(float(rec[4]) if len(rec) == 5 else 1.0)
    return [Prediction(pair, tuple(b), tuple(s)) for pair, (b, s) in sorted(merged.items())]


def write_predictions(predictions: Iterable[Prediction], path: Union[str, Path]) -> Path:
    """Write one line per pair, sorted by pair key; empty pairs are kept."""
    path = Path(path)
    lines = []
    for pred in sorted(predictions, key=lambda p: p.pair):
        records = [b.to_record() + [s] for b, s in zip(pred.boxes, pred.scores)]
        lines.append(json.dumps({pred.pair.key: records}))
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path
