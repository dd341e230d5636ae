"""Command-line entry point: similarity -> align -> evaluate, plus dataset tools.

Settings resolve as command-line flags, then the ``--config`` JSON file, then
built-in defaults.  ``COPYSEG_WORKERS`` sets the default worker count.
Exit status is 0 on success, 2 for configuration errors and 3 for data
errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, TypeVar

from . import __version__
from .align import ALGORITHMS, AlignParams, Prediction, align, import_predictions, write_predictions
from .dataset import (
    AnnotationStore,
    load_annotations,
    load_labels,
    propagate_transitivity,
    sample_negative_pairs,
    save_labels,
    split_filter,
)
from .errors import ConfigError, CopysegError, DataError
from .geometry import PairLabel, Polarity, Split, VideoPairId
from .metrics import BenchmarkReport, build_report, format_table
from .similarity import (
    SIMILARITY_KINDS,
    FrameFeatureSequence,
    load_features,
    load_similarity,
    read_manifest,
    save_similarity,
    similarity_map,
)

log = logging.getLogger("copyseg")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
WORKERS_ENV = "COPYSEG_WORKERS"
COMMANDS = ("similarity", "align", "evaluate", "propagate", "sample-negatives", "bench", "synth")

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class RunConfig:
    command: str
    paths: dict = field(default_factory=dict)
    method: str = "hv"
    methods: tuple[str, ...] = tuple(ALGORITHMS)
    params: AlignParams = AlignParams()
    split: Optional[Split] = None
    kind: str = "cosine"
    workers: int = 1
    seed: int = 0
    strict: bool = False
    baselines: bool = False
    count: int = 0
    video: Optional[str] = None
    pairs: tuple[str, ...] = ()


DEFAULTS = {
    "method": "hv",
    "methods": ",".join(ALGORITHMS),
    "kind": "cosine",
    "seed": 0,
    "strict": False,
    "baselines": False,
    "split": None,
    "count": 0,
}
PATH_KEYS = (
    "features",
    "matrices",
    "labels",
    "annotations",
    "metadata",
    "predictions",
    "dataset",
    "out",
)
PARAM_FLAGS = {
    "sim_threshold": float,
    "min_length": int,
    "max_gap": int,
    "bin_width": int,
    "min_votes": int,
    "max_link": int,
    "max_paths": int,
}


def _parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    """Map preserving input order, on a bounded thread pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- stages -----------------------------------------------------------------------


def _feature_path(features_dir: Path, video: str) -> Path:
    for suffix in (".feat", ".csv"):
        candidate = features_dir / f"{video}{suffix}"
        if candidate.is_file():
            return candidate
    raise DataError(f"no feature file for video {video} in {features_dir}")


def _pairs_from_config(cfg: RunConfig, store: Optional[AnnotationStore] = None) -> list[VideoPairId]:
    if cfg.pairs:
        try:
            return sorted({VideoPairId.parse(p).canonical() for p in cfg.pairs})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if store is not None:
        return sorted({lb.pair.canonical() for lb in store.labels})
    raise ConfigError("no pairs given: pass --pair or --labels")


def _matrix_path(matrices_dir: Path, pair: VideoPairId) -> Path:
    return matrices_dir / f"{pair.key}.sim"


def run_similarity(cfg: RunConfig, pairs: Sequence[VideoPairId]) -> list[Path]:
    """Compute and store one similarity matrix per pair, reusing finished files."""
    features_dir = Path(cfg.paths["features"])
    out_dir = Path(cfg.paths["matrices"])
    out_dir.mkdir(parents=True, exist_ok=True)
    videos = sorted({v for p in pairs for v in (p.video_a, p.video_b)})
    feature_files = {v: _feature_path(features_dir, v) for v in videos}
    cache: dict[str, FrameFeatureSequence] = {}

    def features(video: str) -> FrameFeatureSequence:
        if video not in cache:
            cache[video] = load_features(feature_files[video])
        return cache[video]

    todo = []
    for pair in pairs:
        target = _matrix_path(out_dir, pair)
        if target.is_file() and target.with_suffix(".f32").is_file():
            if read_manifest(target).get("kind") == cfg.kind:
                log.info("similarity pair=%s cached", pair)
                continue
        todo.append(pair)
    for v in sorted({v for p in todo for v in (p.video_a, p.video_b)}):
        features(v)

    def compute(pair: VideoPairId) -> Path:
        m = similarity_map(cache[pair.video_a], cache[pair.video_b], cfg.kind)
        log.info("similarity pair=%s shape=%dx%d kind=%s", pair, m.shape[0], m.shape[1], cfg.kind)
        return save_similarity(m, _matrix_path(out_dir, pair))

    _parallel_map(compute, todo, cfg.workers)
    return [_matrix_path(out_dir, p) for p in pairs]


def run_align(cfg: RunConfig, matrix_files: Sequence[Path], method: str) -> list[Prediction]:
    def one(path: Path) -> Prediction:
        m = load_similarity(path)
        log.info("align[%s] pair=%s", method, m.pair)
        return align(m, method, cfg.params).canonical()

    return sorted(_parallel_map(one, list(matrix_files), cfg.workers), key=lambda p: p.pair)


def run_evaluate(
    cfg: RunConfig, store: AnnotationStore, predictions: Iterable[Prediction]
) -> BenchmarkReport:
    labels = list(store.labels)
    known = {lb.pair.canonical() for lb in labels}
    preds = {}
    for pred in predictions:
        pred = pred.canonical()
        if pred.pair not in known:
            if cfg.strict:
                raise DataError(f"prediction for unknown pair {pred.pair}")
            log.warning("prediction for unlabeled pair %s; treating it as a pair without copies", pred.pair)
            labels.append(PairLabel(pred.pair, Polarity.NEGATIVE))
            known.add(pred.pair)
        preds[pred.pair] = pred
    return build_report(labels, store.pairs, preds, baselines=cfg.baselines, query_sets=store.query_sets())


def write_report(report: BenchmarkReport, out_dir: Path, name: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{name}.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / f"{name}.txt").write_text(_report_text(name, report), encoding="utf-8")


def _report_text(name: str, report: BenchmarkReport) -> str:
    lines = [format_table([(name, report)])]
    if report.per_query_set:
        lines.append("query set | Recall | Precision | F-score | pairs")
        for qs, s in report.per_query_set.items():
            lines.append(f"{qs} | {100 * s.recall:.2f} | {100 * s.precision:.2f} | {100 * s.fscore:.2f} | {s.pairs}")
        lines.append("")
    return "\n".join(lines)


def _load_store(cfg: RunConfig) -> AnnotationStore:
    store = load_annotations(cfg.paths["annotations"], cfg.paths.get("metadata"), cfg.paths.get("labels"))
    if cfg.split is not None:
        store = split_filter(store, cfg.split)
    return store


# -- commands ---------------------------------------------------------------------


def cmd_similarity(cfg: RunConfig) -> int:
    _require(cfg, "features", "matrices")
    store = None
    if cfg.paths.get("labels") and not cfg.pairs:
        store = AnnotationStore(labels=tuple(load_labels(cfg.paths["labels"])))
    run_similarity(cfg, _pairs_from_config(cfg, store))
    return EXIT_OK


def cmd_align(cfg: RunConfig) -> int:
    _require(cfg, "matrices", "out")
    matrices = Path(cfg.paths["matrices"])
    if not matrices.is_dir():
        raise ConfigError(f"matrix directory not found: {matrices}")
    files = sorted(matrices.glob("*.sim"))
    write_predictions(run_align(cfg, files, cfg.method), cfg.paths["out"])
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    _require(cfg, "predictions", "annotations", "out")
    store = _load_store(cfg)
    preds = import_predictions(cfg.paths["predictions"], durations=store.durations(), strict=cfg.strict)
    report = run_evaluate(cfg, store, preds)
    write_report(report, Path(cfg.paths["out"]), "report")
    return EXIT_OK


def cmd_propagate(cfg: RunConfig) -> int:
    _require(cfg, "annotations", "out")
    if not cfg.video:
        raise ConfigError("propagate needs --seed-video")
    store = load_annotations(cfg.paths["annotations"], cfg.paths.get("metadata"))
    doc: dict[str, list] = {}
    for seg in propagate_transitivity(store, cfg.video):
        doc.setdefault(seg.pair.key, []).append(seg.box.to_record())
    Path(cfg.paths["out"]).write_text(json.dumps({"provisional": True, "pairs": doc}, indent=1) + "\n")
    return EXIT_OK


def cmd_sample_negatives(cfg: RunConfig) -> int:
    _require(cfg, "annotations", "metadata", "out")
    store = load_annotations(cfg.paths["annotations"], cfg.paths["metadata"], cfg.paths.get("labels"))
    save_labels(sample_negative_pairs(store, cfg.count, cfg.seed, cfg.split), cfg.paths["out"])
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    """Run every stage for each selected method and write a comparison table."""
    _require(cfg, "dataset", "out")
    root = Path(cfg.paths["dataset"])
    out = Path(cfg.paths["out"])
    cfg.paths.setdefault("features", str(root / "features"))
    cfg.paths.setdefault("annotations", str(root / "annotations.json"))
    for key, name in (("metadata", "metadata.csv"), ("labels", "labels.csv")):
        if (root / name).is_file():
            cfg.paths.setdefault(key, str(root / name))
    cfg.paths.setdefault("matrices", str(out / "matrices"))

    store = _stage("load", lambda: _load_store(cfg))
    pairs = _pairs_from_config(cfg, store)
    files = _stage("similarity", lambda: run_similarity(cfg, pairs))
    rows = []
    for method in cfg.methods:
        preds = _stage(f"align[{method}]", lambda: run_align(cfg, files, method))
        write_predictions(preds, out / f"predictions_{method}.jsonl")
        report = _stage(f"evaluate[{method}]", lambda: run_evaluate(cfg, store, preds))
        write_report(report, out, f"report_{method}")
        rows.append((method, report))
    (out / "bench.txt").write_text(format_table(rows), encoding="utf-8")
    summary = {name: {k: v for k, v in r.to_dict().items() if k != "per_pair"} for name, r in rows}
    (out / "bench.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    from .synthetic import make_dataset

    _require(cfg, "out")
    make_dataset(cfg.paths["out"], seed=cfg.seed)
    return EXIT_OK


def _stage(name: str, fn: Callable[[], T]) -> T:
    try:
        return fn()
    except CopysegError as exc:
        raise type(exc)(f"stage {name}: {exc}") from exc


def _require(cfg: RunConfig, *keys: str) -> None:
    missing = [k for k in keys if not cfg.paths.get(k)]
    if missing:
        raise ConfigError(f"{cfg.command} needs --{', --'.join(missing)}")


HANDLERS = {
    "similarity": cmd_similarity,
    "align": cmd_align,
    "evaluate": cmd_evaluate,
    "propagate": cmd_propagate,
    "sample-negatives": cmd_sample_negatives,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


# -- argument handling ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="copyseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"copyseg {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with default settings")
        for key in PATH_KEYS:
            p.add_argument(f"--{key}")
        p.add_argument("--pair", action="append", dest="pairs", help="pair id 'idA-idB' (repeatable)")
        p.add_argument("--method", choices=sorted(ALGORITHMS))
        p.add_argument("--methods", help="comma-separated methods for bench")
        p.add_argument("--kind", choices=sorted(SIMILARITY_KINDS))
        p.add_argument("--split", choices=[s.value for s in Split])
        p.add_argument("--workers", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--count", type=int)
        p.add_argument("--seed-video", dest="video")
        p.add_argument("--strict", action="store_true", default=None)
        p.add_argument("--baselines", action="store_true", default=None)
        for flag, typ in PARAM_FLAGS.items():
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=typ)
    return parser


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return value


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over the config file over defaults."""
    file_cfg: dict = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config {args.config} must be a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}

    def pick(key: str, default=None):
        value = getattr(args, key, None)
        if value is not None:
            return value
        if key in file_cfg:
            return file_cfg[key]
        return DEFAULTS.get(key, default)

    paths = {k: pick(k) for k in PATH_KEYS if pick(k) is not None}
    overrides = {}
    for key in PARAM_FLAGS:
        value = pick(key)
        if value is not None:
            overrides[key] = value
    params = AlignParams(**overrides)

    method = pick("method")
    methods = pick("methods")
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    for m in [method, *methods]:
        if m not in ALGORITHMS:
            raise ConfigError(f"unknown alignment method {m!r}; choose from {', '.join(ALGORITHMS)}")
    kind = pick("kind")
    if kind not in SIMILARITY_KINDS:
        raise ConfigError(f"unknown similarity kind {kind!r}")
    split = pick("split")
    try:
        split = Split(split) if split else None
    except ValueError:
        raise ConfigError(f"unknown split {split!r}") from None
    workers = pick("workers")
    if workers is None:
        workers = _default_workers()
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    for key, path in paths.items():
        if key in ("features", "annotations", "metadata", "labels", "predictions", "dataset") and not Path(path).exists():
            raise ConfigError(f"--{key} path does not exist: {path}")
    pairs = pick("pairs") or ()
    return RunConfig(
        command=args.command,
        paths=paths,
        method=method,
        methods=tuple(methods),
        params=params,
        split=split,
        kind=kind,
        workers=workers,
        seed=int(pick("seed")),
        strict=bool(pick("strict")),
        baselines=bool(pick("baselines")),
        count=int(pick("count")),
        video=pick("video"),
        pairs=tuple(pairs),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
