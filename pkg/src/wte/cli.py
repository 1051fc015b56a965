"""Command-line interface.

Subcommands: ingest, embed, dist, otdd, correlate, bench. Flags can also be
supplied through a flat key-value config file (same keys as the long flags);
explicit flags win. Exit codes: 0 success, 2 ingestion failure, 3 reference
hash mismatch, 1 anything else.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import report as rpt
from .dataset import class_stats, ingest, write_csv, write_raw_f32
from .embedding import (
    embed_task,
    load_embedding,
    pairwise_distances,
    save_embedding,
    save_reference,
)
from .errors import IncompatibleEmbeddingError, PipelineError, WteError
from .labels import augment, build_atlas, load_atlas, save_atlas
from .ot import count_solves
from .otdd import otdd_matrix
from .pipeline import RunConfig, build_reference, load_config_file, load_tasks, run_embed
from .synth import shifted_task_family


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2 if exc.stage == "ingest" else 1
    except IncompatibleEmbeddingError as exc:
        print(f"error [stage=dist] {exc}", file=sys.stderr)
        return 3
    except WteError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wte", description=__doc__)
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("ingest", help="validate task files, optionally convert formats")
    p.add_argument("files", nargs="+")
    p.add_argument("--format", choices=("auto", "csv", "raw-f32"), default="auto")
    p.add_argument("--out", help="write the (single) input back out to this path")
    p.add_argument("--to", choices=("csv", "raw-f32"), default="raw-f32")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="build the atlas and embed every task")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("dist", help="pairwise embedded distances from saved embeddings")
    p.add_argument("files", nargs="+", help=".wtev embedding files")
    p.add_argument("--squared", action="store_true")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("otdd", help="pairwise direct dataset distances")
    _add_pipeline_flags(p)
    p.add_argument("--atlas", help="reuse a saved atlas for atlas-mode label costs")
    p.set_defaults(func=cmd_otdd)

    p = sub.add_parser("correlate", help="squared embedded distance vs direct distance")
    _add_pipeline_flags(p)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("bench", help="wall-clock and solve-count comparison on synthetic tasks")
    p.add_argument("--counts", default="4,6,8,10,12", help="comma-separated task counts")
    p.add_argument("--task-size", type=int, default=300)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mds-dim", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("tasks", nargs="*", help="task files (CSV or raw-f32)")
    p.add_argument("--config", help="flat key-value config file; flags override it")
    p.add_argument("--mds-dim", type=int, default=None)
    p.add_argument("--reg", type=float, default=None)
    p.add_argument("--ref-size", type=int, default=None)
    p.add_argument("--ref-seed", type=int, default=None)
    p.add_argument("--ref-mode", choices=("smooth-image", "uniform-box", "file"), default=None)
    p.add_argument("--ref-file", default=None)
    p.add_argument("--image-side", type=int, default=None)
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--squared", action="store_const", const=True, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--otdd-mode", choices=("direct", "atlas"), default=None)
    p.add_argument("--out", default=None)


def _config_from_args(args) -> RunConfig:
    file_vals = load_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(name, key, default, conv):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if file_vals.get(key):
            return conv(file_vals[key])
        return default

    tasks = list(args.tasks) if args.tasks else []
    if not tasks and file_vals.get("tasks"):
        tasks = [t.strip() for t in file_vals["tasks"].split(",") if t.strip()]
    config = RunConfig(
        tasks=tasks,
        out_dir=pick("out", "out", None, str),
        mds_dim=pick("mds_dim", "mds-dim", 10, int),
        reg=pick("reg", "reg", None, float),
        ref_size=pick("ref_size", "ref-size", None, int),
        ref_seed=pick("ref_seed", "ref-seed", 0, int),
        ref_mode=pick("ref_mode", "ref-mode", "uniform-box", str),
        ref_file=pick("ref_file", "ref-file", None, str),
        image_side=pick("image_side", "image-side", None, int),
        subsample_per_class=pick("subsample", "subsample", None, int),
        seed=pick("seed", "seed", 0, int),
        squared=bool(pick("squared", "squared", False, lambda v: bool(int(v)))),
        workers=pick("workers", "workers", 1, int),
        otdd_mode=pick("otdd_mode", "otdd-mode", "direct", str),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise PipelineError("config", str(exc)) from exc
    return config


def _require_out_dir(config_out) -> Path:
    if not config_out:
        raise PipelineError("config", "this command needs --out OUTPUT_DIR")
    out = Path(config_out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    if args.out and len(args.files) != 1:
        raise PipelineError("ingest", "--out converts exactly one input file")
    for path in args.files:
        try:
            ds = ingest(path, fmt=args.format)
        except (WteError, OSError) as exc:
            raise PipelineError("ingest", str(exc), source=path) from exc
        counts = np.bincount(ds.labels, minlength=ds.n_labels)
        print(
            f"{ds.name}: N={ds.n_samples} d={ds.dim} J={ds.n_labels} "
            f"class_sizes={','.join(str(int(c)) for c in counts)}"
        )
        if args.out:
            writer = write_csv if args.to == "csv" else write_raw_f32
            writer(ds, args.out)
            print(f"wrote {args.to} to {args.out}")
    return 0


def cmd_embed(args) -> int:
    config = _config_from_args(args)
    out = _require_out_dir(config.out_dir)
    run = run_embed(config)
    save_atlas(run.atlas, out / "atlas.wtea")
    save_reference(run.reference, out / "reference.wter")
    for emb in run.embeddings:
        save_embedding(emb, out / f"{emb.dataset_id}.wtev")
    (out / "config.txt").write_text(config.snapshot_text(), encoding="utf-8")
    print(f"atlas: {run.atlas.n_entries} labels, l={run.atlas.l}, stress={run.atlas.mds_stress:.6f}")
    print(f"reference: M={run.reference.size}, hash={run.reference.content_hash[:12]}")
    for emb in run.embeddings:
        print(f"embedded {emb.dataset_id}: ot_cost={emb.ot_cost:.6f}")
    return 0


def cmd_dist(args) -> int:
    embeddings = [load_embedding(p) for p in args.files]
    with count_solves() as tally:
        matrix = pairwise_distances(embeddings, squared=args.squared)
    assert tally.count == 0
    ids = [e.dataset_id for e in embeddings]
    if args.out:
        rpt.write_matrix_csv(args.out, ids, matrix)
    else:
        _print_matrix(ids, matrix)
    return 0


def _print_matrix(ids, matrix) -> None:
    print("task," + ",".join(ids))
    for name, row in zip(ids, matrix):
        print(name + "," + ",".join(f"{v:.17g}" for v in row))


def cmd_otdd(args) -> int:
    config = _config_from_args(args)
    out = _require_out_dir(config.out_dir)
    tasks = load_tasks(config)
    atlas = None
    if config.otdd_mode == "atlas":
        if getattr(args, "atlas", None):
            atlas = load_atlas(args.atlas)
        else:
            stats = [s for t in tasks for s in class_stats(t, config.reg)]
            atlas = build_atlas(stats, config.mds_dim)
    with count_solves() as tally:
        matrix, results = otdd_matrix(
            tasks, mode=config.otdd_mode, reg=config.reg, atlas=atlas, workers=config.workers
        )
    ids = [t.name for t in tasks]
    rpt.write_matrix_csv(out / "otdd_matrix.csv", ids, matrix)
    rpt.write_timings_csv(out / "otdd_timings.csv", results)
    print(f"otdd: {len(results)} pairs, {tally.count} OT solves")
    _print_matrix(ids, matrix)
    return 0


def cmd_correlate(args) -> int:
    config = _config_from_args(args)
    out = _require_out_dir(config.out_dir)
    if len(config.tasks) < 3:
        raise PipelineError("config", "correlate needs at least 3 tasks")
    with count_solves() as wte_tally:
        run = run_embed(config)
        wte_sq = pairwise_distances(run.embeddings, squared=True)
    wte_solves = wte_tally.count
    with count_solves() as otdd_tally:
        atlas = run.atlas if config.otdd_mode == "atlas" else None
        otdd_m, results = otdd_matrix(
            run.tasks, mode=config.otdd_mode, reg=config.reg, atlas=atlas, workers=config.workers
        )
    ids = [t.name for t in run.tasks]
    scale = float(np.mean([e.norm**2 for e in run.embeddings]))
    report = rpt.build_correlation_report(ids, wte_sq, otdd_m, wte_solves, otdd_tally.count, scale)
    rpt.write_matrix_csv(out / "wte2_matrix.csv", ids, wte_sq)
    rpt.write_matrix_csv(out / "otdd_matrix.csv", ids, otdd_m)
    rpt.write_pairs_csv(out / "pairs.csv", report)
    rpt.write_timings_csv(out / "otdd_timings.csv", results)
    summary = rpt.summary_text(report)
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    if not args.no_figures:
        rpt.render_correlation_figure(out / "correlate.png", ids, wte_sq, otdd_m, report)
    print(summary, end="")
    return 0


def cmd_bench(args) -> int:
    out = _require_out_dir(args.out)
    try:
        counts = [int(c) for c in args.counts.split(",") if c.strip()]
    except ValueError as exc:
        raise PipelineError("config", f"bad --counts: {exc}") from exc
    if not counts or min(counts) < 2:
        raise PipelineError("config", "--counts needs integers >= 2")
    n_per_class = max(1, args.task_size // args.classes)
    rows = []
    for n_tasks in counts:
        tasks = shifted_task_family(
            n_tasks, n_classes=args.classes, dim=args.dim, n_per_class=n_per_class, seed=args.seed
        )
        mds_dim = args.mds_dim if args.mds_dim else min(10, args.classes * n_tasks)
        config = RunConfig(tasks=[], mds_dim=mds_dim, seed=args.seed, ref_seed=args.seed)
        t0 = time.perf_counter()
        with count_solves() as wte_tally:
            stats = [s for t in tasks for s in class_stats(t)]
            atlas = build_atlas(stats, mds_dim)
            augmented = [augment(t, atlas) for t in tasks]
            reference = build_reference(config, tasks, atlas.l)
            embeddings = [embed_task(a, reference) for a in augmented]
            pairwise_distances(embeddings, squared=True)
        wte_seconds = time.perf_counter() - t0
        t0 = time.perf_counter()
        with count_solves() as otdd_tally:
            otdd_matrix(tasks, mode="direct")
        otdd_seconds = time.perf_counter() - t0
        rows.append(
            {
                "n_tasks": n_tasks,
                "task_size": n_per_class * args.classes,
                "wte_seconds": wte_seconds,
                "otdd_seconds": otdd_seconds,
                "wte_solves": wte_tally.count,
                "otdd_solves": otdd_tally.count,
                "ratio": otdd_seconds / wte_seconds if wte_seconds > 0 else float("inf"),
            }
        )
        print(
            f"M={n_tasks}: embedding {wte_seconds:.3f}s ({wte_tally.count} solves), "
            f"pairwise direct {otdd_seconds:.3f}s ({otdd_tally.count} solves)"
        )
    rpt.write_bench_csv(out / "bench.csv", rows)
    if not args.no_figures:
        rpt.render_bench_figure(out / "bench.png", rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
