"""Command-line surface: train, predict, bench, axioms, rank.

Exit codes are a stable contract: 0 success, 1 data/domain error,
2 usage or configuration error.  Progress and warnings go to standard
error; machine-readable results go to files; short human summaries go to
standard output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import __version__, distances, evaluation, forest
from . import dataio
from .errors import ConfigError, EmptyFile, OpfdistError


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _parse_codes(spec) -> list[str]:
    """A distance list from config/flags: 'all', a code, or a code list."""
    if spec is None:
        raise ConfigError("no distances given")
    if isinstance(spec, str):
        if spec.strip().lower() == "all":
            return [e.code for e in distances.registry()]
        spec = [s for s in spec.replace(",", " ").split() if s]
    codes = []
    for item in spec:
        try:
            codes.append(distances.resolve(str(item)).code)
        except KeyError:
            raise ConfigError(f"unknown distance code {item!r}") from None
    if not codes:
        raise ConfigError("distance list is empty")
    if len(set(codes)) != len(codes):
        raise ConfigError("duplicate distance codes")
    return codes


def _coerce_label_column(value):
    if value is None:
        return None
    if isinstance(value, int):
        return value
    text = str(value)
    stripped = text.lstrip("+-")
    if stripped.isdigit():
        return int(text)
    return text


def _load_dataset(path: Path, fmt: str, label_column, has_header: bool,
                  name: str | None = None) -> dataio.Dataset:
    if fmt == "csv":
        return dataio.load_csv(path, label_column, has_header, name=name)
    if fmt == "svmlight":
        return dataio.load_svmlight(path, name=name)
    raise ConfigError(f"unknown dataset format {fmt!r}")


# --- train ---------------------------------------------------------------


def cmd_train(args) -> int:
    code = _parse_codes([args.distance])[0]
    ds = _load_dataset(Path(args.data), args.format,
                       _coerce_label_column(args.label_column),
                       args.has_header)
    spec = dataio.fit_normalization(ds.samples, args.normalization)
    samples = dataio.apply_to_samples(spec, ds.samples)
    t0 = time.perf_counter()
    graph = forest.TrainingGraph(tuple(samples), distances.resolve(code))
    model = forest.train(graph)
    elapsed = time.perf_counter() - t0
    dataio.save_forest(model, spec, args.out, class_names=ds.class_names)
    print(f"samples = {len(model.samples)}")
    print(f"prototypes = {len(model.prototypes)}")
    print(f"distance = {code}")
    print(f"normalization = {spec.mode}")
    print(f"train_seconds = {elapsed:.6f}")
    print(f"model = {args.out}")
    return 0


# --- predict ---------------------------------------------------------------


def cmd_predict(args) -> int:
    arc = dataio.load_archive(args.model)
    label_column = _coerce_label_column(args.label_column)
    try:
        ds = _load_dataset(Path(args.data), args.format, label_column,
                           args.has_header)
    except EmptyFile:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write("row,predicted_label,cost,conqueror\n")
        print("predictions = 0")
        return 0

    feats = [dataio.apply_normalization(arc.normalization, s.features)
             for s in ds.samples]
    preds = forest.classify_batch(arc.forest, feats)

    def label_text(idx: int) -> str:
        if arc.class_names is not None and 0 <= idx < len(arc.class_names):
            return arc.class_names[idx]
        return str(idx)

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        fh.write("row,predicted_label,cost,conqueror\n")
        for i, p in enumerate(preds, start=1):
            fh.write(f"{i},{label_text(p.label)},{p.cost!r},{p.conqueror}\n")
    print(f"predictions = {len(preds)}")

    if label_column is not None:
        if arc.class_names is not None and ds.class_names is not None:
            predicted = [label_text(p.label) for p in preds]
            truth = [ds.class_names[s.label] for s in ds.samples]
        else:
            predicted = [p.label for p in preds]
            truth = [s.label for s in ds.samples]
        acc = evaluation.accuracy(predicted, truth)
        print(f"accuracy = {acc:.4f}")
    return 0


# --- bench ---------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: Path
    format: str
    label_column: object
    has_header: bool


@dataclass(frozen=True)
class BenchConfig:
    seed: int
    runs: int
    normalization: str
    alpha: float
    distance_codes: tuple[str, ...]
    datasets: tuple[DatasetSpec, ...]
    output_dir: Path | None
    parallelism: int
    external_baselines: Path | None


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def load_bench_config(path: Path, *, out_override=None,
                      parallelism_override=None) -> BenchConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    _require(isinstance(raw, dict), f"{path}: top level must be a mapping")

    known = {"seed", "runs", "normalization", "alpha", "distances", "datasets",
             "output_dir", "parallelism", "external_baselines"}
    unknown = set(raw) - known
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and seed >= 0, "seed must be an integer >= 0")
    runs = raw.get("runs", 25)
    _require(isinstance(runs, int) and runs >= 1, "runs must be an integer >= 1")
    normalization = raw.get("normalization", "none")
    _require(normalization in dataio.NORMALIZATION_MODES,
             f"normalization must be one of {dataio.NORMALIZATION_MODES}")
    alpha = raw.get("alpha", 0.05)
    _require(isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0,
             "alpha must be in (0, 1)")
    codes = _parse_codes(raw.get("distances"))

    ds_raw = raw.get("datasets")
    _require(isinstance(ds_raw, list) and ds_raw, "datasets must be a non-empty list")
    base = path.parent
    specs = []
    for i, item in enumerate(ds_raw):
        _require(isinstance(item, dict), f"datasets[{i}] must be a mapping")
        _require("path" in item, f"datasets[{i}] needs a path")
        p = Path(item["path"])
        if not p.is_absolute():
            p = (base / p).resolve()
        fmt = item.get("format", "csv")
        _require(fmt in ("csv", "svmlight"),
                 f"datasets[{i}]: format must be csv or svmlight")
        name = item.get("name") or p.stem
        specs.append(DatasetSpec(
            name=str(name),
            path=p,
            format=fmt,
            label_column=_coerce_label_column(item.get("label_column")),
            has_header=bool(item.get("has_header", False)),
        ))
        if fmt == "csv":
            _require(specs[-1].label_column is not None,
                     f"datasets[{i}]: csv datasets need a label_column")
    names = [s.name for s in specs]
    _require(len(set(names)) == len(names), "dataset names must be unique")
    paths = [str(s.path) for s in specs]
    _require(len(set(paths)) == len(paths), "dataset paths must be distinct")

    out_dir = out_override or raw.get("output_dir")
    out_path = None
    if out_dir is not None:
        out_path = Path(out_dir)
        if not Path(out_dir).is_absolute() and out_override is None:
            out_path = (base / out_dir).resolve()

    par = parallelism_override if parallelism_override is not None else raw.get(
        "parallelism", 1)
    if isinstance(par, str):
        _require(par == "auto", "parallelism must be an integer or 'auto'")
        par = os.cpu_count() or 1
    _require(isinstance(par, int) and par >= 1, "parallelism must be >= 1")

    ext = raw.get("external_baselines")
    ext_path = None
    if ext is not None:
        ext_path = Path(ext)
        if not ext_path.is_absolute():
            ext_path = (base / ext_path).resolve()

    return BenchConfig(seed, runs, normalization, float(alpha), tuple(codes),
                       tuple(specs), out_path, par, ext_path)


def _config_hash(cfg: BenchConfig) -> str:
    """Content hash of everything that determines the grid's numbers.

    Dataset files are hashed by content, not path, so moving a file does
    not invalidate a resume but editing it does.  Output directory and
    parallelism are excluded: they cannot change any reported number.
    """
    payload = {
        "seed": cfg.seed,
        "runs": cfg.runs,
        "normalization": cfg.normalization,
        "alpha": cfg.alpha,
        "distances": list(cfg.distance_codes),
        "datasets": [
            {
                "name": s.name,
                "format": s.format,
                "label_column": s.label_column,
                "has_header": s.has_header,
                "sha256": hashlib.sha256(s.path.read_bytes()).hexdigest(),
            }
            for s in cfg.datasets
        ],
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _bench_task(args):
    name, dataset, code, seed, runs, normalization, wanted = args
    try:
        cells = evaluation.benchmark_column(dataset, code, seed, runs,
                                            normalization, wanted=wanted)
        return name, code, cells, None
    except Exception as exc:
        return name, code, None, f"{type(exc).__name__}: {exc}"


def _complete_classifiers(matrix: evaluation.BenchmarkMatrix) -> list[str]:
    out = []
    for c in matrix.classifiers:
        if any((ds, c) in matrix.errors for ds in matrix.datasets):
            continue
        if all(matrix.is_complete(ds, c) for ds in matrix.datasets):
            out.append(c)
    return out


def _submatrix(matrix: evaluation.BenchmarkMatrix,
               classifiers: list[str]) -> evaluation.BenchmarkMatrix:
    keep = set(classifiers)
    return evaluation.BenchmarkMatrix(
        matrix.datasets,
        tuple(c for c in matrix.classifiers if c in keep),
        matrix.runs,
        {k: v for k, v in matrix.cells.items() if k[1] in keep},
        {},
        {},
    )


def cmd_bench(args) -> int:
    cfg = load_bench_config(Path(args.config), out_override=args.out,
                            parallelism_override=args.parallelism)
    if cfg.output_dir is None:
        raise ConfigError("no output directory (config output_dir or --out)")
    out_dir = cfg.output_dir
    cfg_hash = _config_hash(cfg)

    datasets = [
        _load_dataset(s.path, s.format, s.label_column, s.has_header, name=s.name)
        for s in cfg.datasets
    ]

    matrix = evaluation.BenchmarkMatrix(
        tuple(s.name for s in cfg.datasets), cfg.distance_codes, cfg.runs)

    # resume: adopt cells already on disk if they belong to this exact config
    reused = 0
    manifest_path = out_dir / "manifest.txt"
    cells_path = out_dir / "cells.csv"
    if args.resume and cells_path.exists():
        if manifest_path.exists():
            recorded = None
            for line in manifest_path.read_text(encoding="utf-8").splitlines():
                if line.startswith("config_hash = "):
                    recorded = line.split(" = ", 1)[1]
            if recorded != cfg_hash:
                raise ConfigError(
                    f"{out_dir} holds results for a different configuration "
                    f"(manifest config_hash {recorded} != {cfg_hash})")
        valid = set(matrix.classifiers)
        valid_ds = set(matrix.datasets)
        for ds, c, r, f, acc in dataio.read_cells_csv(cells_path):
            if ds in valid_ds and c in valid and 0 <= r < cfg.runs and f in (0, 1):
                matrix.cells[(ds, c, r, f)] = acc
                reused += 1

    all_keys = {(r, f) for r in range(cfg.runs) for f in (0, 1)}
    tasks = []
    by_name = {d.name: d for d in datasets}
    for spec in cfg.datasets:
        for code in cfg.distance_codes:
            have = {(r, f) for (ds, c, r, f) in matrix.cells
                    if ds == spec.name and c == code}
            missing = all_keys - have
            if missing:
                tasks.append((spec.name, by_name[spec.name], code, cfg.seed,
                              cfg.runs, cfg.normalization, frozenset(missing)))

    total = len(cfg.datasets) * len(cfg.distance_codes)
    done_count = total - len(tasks)
    print(f"grid: {total} columns, {len(tasks)} to compute, "
          f"{reused} cells reused", file=sys.stderr)

    def record(name, code, cells, error):
        nonlocal done_count
        done_count += 1
        if error is not None:
            matrix.errors[(name, code)] = error
            print(f"[{done_count}/{total}] {name} {code}: FAILED {error}",
                  file=sys.stderr)
        else:
            for (r, f), (acc, t_train, t_test) in cells.items():
                matrix.cells[(name, code, r, f)] = acc
                matrix.timings[(name, code, r, f)] = (t_train, t_test)
            print(f"[{done_count}/{total}] {name} {code}: ok", file=sys.stderr)

    if cfg.parallelism == 1 or len(tasks) <= 1:
        for t in tasks:
            record(*_bench_task(t))
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            pending = {pool.submit(_bench_task, t) for t in tasks}
            while pending:
                finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in finished:
                    record(*fut.result())

    if cfg.external_baselines is not None:
        ext_rows = dataio.read_cells_csv(cfg.external_baselines)
        computed = set(matrix.classifiers)
        known_datasets = set(matrix.datasets)
        for ds, c, r, f, acc in ext_rows:
            if c in computed:
                raise ConfigError(
                    f"external baseline {c!r} collides with a computed column")
            if ds not in known_datasets or not (0 <= r < cfg.runs):
                continue
            if c not in matrix.classifiers:
                matrix.classifiers = matrix.classifiers + (c,)
            matrix.cells[(ds, c, r, f)] = acc

    summary = evaluation.summarize(matrix)
    ranked = _complete_classifiers(matrix)
    stats = None
    if len(ranked) >= 3:
        stats = evaluation.friedman_nemenyi(_submatrix(matrix, ranked), cfg.alpha)
    else:
        print(f"rank statistics skipped: {len(ranked)} complete classifiers "
              f"(need 3)", file=sys.stderr)

    manifest = {
        "config_hash": cfg_hash,
        "package": f"opfdist {__version__}",
        "archive_format": str(dataio.ARCHIVE_VERSION),
        "seed": str(cfg.seed),
        "runs": str(cfg.runs),
        "normalization": cfg.normalization,
        "alpha": repr(cfg.alpha),
        "distances": " ".join(cfg.distance_codes),
        "datasets": " ".join(s.name for s in cfg.datasets),
        "cells_total": str(len(matrix.cells)),
        "columns_failed": str(len(matrix.errors)),
        "stats_classifiers": " ".join(ranked) if stats is not None else "",
    }
    for d in datasets:
        manifest[f"dataset_{d.name}"] = (
            f"rows={len(d.samples)} features={d.n_features} "
            f"classes={d.n_classes}")

    dataio.write_reports(summary, stats, out_dir,
                         datasets=matrix.datasets,
                         classifiers=matrix.classifiers,
                         matrix=matrix, manifest=manifest)
    if matrix.errors:
        print(f"warning: {len(matrix.errors)} column(s) failed; see "
              f"failures.csv", file=sys.stderr)
    print(f"reports written to {out_dir}")
    return 0


# --- axioms ---------------------------------------------------------------


def cmd_axioms(args) -> int:
    codes = _parse_codes([args.distance] if args.distance != "all" else "all")
    if args.samples < 2:
        raise ConfigError("--samples must be >= 2")
    if args.dim < 1:
        raise ConfigError("--dim must be >= 1")
    rng = random.Random(args.seed)
    vectors = [tuple(rng.uniform(0.0, 1.0) for _ in range(args.dim))
               for _ in range(args.samples)]
    # duplicate the first vector so the identity axiom is exercised on a
    # genuinely repeated sample as well
    vectors.append(vectors[0])

    def mark(check):
        return "pass" if check.passed else "FAIL"

    print(f"{'code':<5} {'name':<30} {'non-neg':<8} {'identity':<9} "
          f"{'symmetry':<9} {'triangle':<9}")
    for code in codes:
        rep = distances.check_axioms(code, vectors, args.tolerance)
        entry = distances.resolve(code)
        print(f"{entry.code:<5} {entry.name:<30} {mark(rep.non_negativity):<8} "
              f"{mark(rep.identity):<9} {mark(rep.symmetry):<9} "
              f"{mark(rep.triangle_inequality):<9}")
        for axiom, check in (("non-negativity", rep.non_negativity),
                             ("identity", rep.identity),
                             ("symmetry", rep.symmetry),
                             ("triangle", rep.triangle_inequality)):
            if not check.passed:
                print(f"      {axiom}: {check.counterexample}")
    return 0


# --- rank ---------------------------------------------------------------


def cmd_rank(args) -> int:
    rows = []
    for path in args.cells:
        rows.extend(dataio.read_cells_csv(path))
    if not rows:
        raise ConfigError("no cells found in the given files")
    matrix = evaluation.BenchmarkMatrix.from_rows(rows)
    ranked = _complete_classifiers(matrix)
    dropped = [c for c in matrix.classifiers if c not in ranked]
    if dropped:
        print(f"warning: dropped incomplete classifiers: {' '.join(dropped)}",
              file=sys.stderr)
    if len(ranked) < 3:
        raise ConfigError(
            f"rank statistics need >= 3 complete classifiers, got {len(ranked)}")
    stats = evaluation.friedman_nemenyi(_submatrix(matrix, ranked), args.alpha)

    if args.out is not None:
        dataio.write_stat_files(stats, Path(args.out), matrix.datasets)
        print(f"reports written to {args.out}")
    fr = stats.friedman
    print(f"friedman_statistic = {fr.statistic!r}")
    print(f"friedman_p_value = {fr.p_value!r}")
    print(f"blocks = {fr.n_blocks}")
    print(f"critical_difference = {stats.nemenyi.critical_difference!r}")
    for i, (c, r) in enumerate(
            sorted(fr.mean_ranks.items(), key=lambda kv: -kv[1]), start=1):
        print(f"{i}. {c} mean_rank={r!r}")
    return 0


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opfdist",
        description="Optimum-path forest classification over a 47-measure "
                    "distance catalogue")
    parser.add_argument(
        "--version", action="version",
        version=f"opfdist {__version__} (archive format "
                f"{dataio.ARCHIVE_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "svmlight"), default="csv")
    p.add_argument("--label-column", default=None,
                   help="label column name or 0-based index (csv)")
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--distance", required=True, help="distance code, e.g. D3")
    p.add_argument("--normalization", choices=dataio.NORMALIZATION_MODES,
                   default="none")
    p.add_argument("--seed", type=int, default=0,
                   help="reserved; training is deterministic")
    p.add_argument("--out", required=True, help="model archive path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify a dataset file with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "svmlight"), default="csv")
    p.add_argument("--label-column", default=None,
                   help="optional; when given, accuracy is printed")
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="run the benchmark grid from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override config output_dir")
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--resume", action="store_true",
                   help="reuse completed cells found in the output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("axioms", help="empirical metric-axiom table")
    p.add_argument("--distance", default="all", help="code or 'all'")
    p.add_argument("--samples", type=int, default=30)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=cmd_axioms)

    p = sub.add_parser("rank", help="rank statistics from existing cells.csv")
    p.add_argument("--cells", action="append", required=True,
                   help="cells.csv path (repeatable)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default=None, help="directory for rank/wilcoxon CSVs")
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return 2
    except (OpfdistError, OSError, ValueError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
