"""Command-line entry point: ``rdfload <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 run aborted
(store crash or speed below threshold; the measurement itself succeeded).
The default output directory is taken from ``RDFLOAD_OUTPUT_DIR``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from rdfload import __version__, analysis, dataset, driver
from rdfload.store import STORE_KINDS, open_store

log = logging.getLogger("rdfload")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_ABORTED = 0, 1, 2, 3
OUTPUT_DIR_ENV = "RDFLOAD_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _label(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, value


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _trim(text: str):
    return text if text == "min-common" else _positive_int(text)


def _json_arg(text: str) -> dict:
    """Inline JSON object, or ``@path`` to a JSON file."""
    try:
        if text.startswith("@"):
            text = Path(text[1:]).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"bad JSON config: {exc}") from None
    if not isinstance(data, dict):
        raise argparse.ArgumentTypeError("config must be a JSON object")
    return data


def _csv_list(values: Optional[Sequence[str]]) -> list[str]:
    return [v.strip() for item in values or () for v in item.split(",") if v.strip()]


# --- subcommands -----------------------------------------------------------

def cmd_prepare(args) -> int:
    out = Path(args.out_dir) if args.out_dir else _output_dir() / Path(args.input).stem
    res = dataset.split_batches(args.input, out, args.batch_size, overwrite=args.overwrite)
    print(f"{len(res.paths)} batches, {res.discarded} discarded -> {out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = dataset.compute_stats(args.input, spill_threshold=args.spill_threshold)
    text = stats.to_json(indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if args.out is None or args.verbose:
        print(text)
    else:
        print(f"{stats.triples} triples, {stats.subjects} subjects, {stats.predicates} predicates, "
              f"{stats.objects} objects, mean bpt {stats.mean_bpt:.2f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    data = dict(args.config or {})
    for key in ("n_triples", "regularity", "n_subjects", "n_predicates",
                "object_cardinality", "literal_fraction", "seed"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if "n_triples" not in data:
        raise UsageError("synth needs --triples (or n_triples in --config)")
    profile = dataset.SynthProfile.from_mapping(data)
    profile.check()
    out = Path(args.out)
    stats = dataset.generate_synthetic(profile, out)
    meta = out.with_name(out.name + ".json")
    meta.write_text(json.dumps({"profile": profile.to_dict(), "stats": stats.to_dict(),
                                "tool_version": __version__}, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {stats.triples} triples to {out} (seed {profile.seed}; profile in {meta})")
    return EXIT_OK


def cmd_bench(args) -> int:
    labels = dict(args.label or ())
    files = dataset.list_batch_files(args.batches_dir)
    if not files:
        raise driver.ConfigurationError(f"no batch files in {args.batches_dir}")
    labels.setdefault("dataset", Path(args.batches_dir).resolve().name)
    labels.setdefault("store", args.store)
    platform = driver.PlatformDescriptor.detect(labels.get("platform"), args.memory_limit)
    labels.setdefault("platform", platform.device)
    out = Path(args.out) if args.out else driver.default_output_path(labels, _output_dir())
    try:
        store = open_store(args.store, args.store_config)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad store config: {exc}") from None
    try:
        run = driver.run_benchmark(store, files, labels=labels, threshold_tps=args.threshold_tps,
                                   sample_hz=args.sample_hz, memory_limit_bytes=args.memory_limit,
                                   platform=platform, out=out, split_parse_time=args.split_parse_time)
    finally:
        store.close()
    print(f"{run.termination.value}: {len(run.batch_records)}/{run.batches_total} batches, "
          f"{run.loaded_triples} triples -> {out}")
    return EXIT_OK if run.termination == driver.Termination.COMPLETED else EXIT_ABORTED


def _collect_runs(args) -> list:
    files = []
    for p in args.runs or ():
        p = Path(p)
        files.extend(sorted(p.glob("*.jsonl")) if p.is_dir() else [p])
    runs = [driver.read_run(f, allow_incomplete=args.allow_incomplete) for f in files]
    for path in args.ingest_csv or ():
        runs.extend(analysis.ingest_long_csv(path, args.batch_size))
    if not runs:
        raise UsageError("no run files given")
    return runs


def cmd_analyze(args) -> int:
    result = analysis.analyze(_collect_runs(args), exclude=_csv_list(args.exclude),
                              trim_to=args.trim_to, window_triples=args.window,
                              store_window_triples=args.store_window, ci=args.ci,
                              on_duplicate=args.on_duplicate)
    out = Path(args.out_dir) if args.out_dir else _output_dir() / "analysis"
    analysis.write_analysis(result, out)
    rep = result.report()
    print(f"{len(rep['datasets'])} datasets, {rep['n_batches']} batches, "
          f"|D_def| in [{rep['d_def_min']}, {rep['d_def_max']}] -> {out}")
    _print_medians(result.summary)
    return EXIT_OK


def _print_medians(summary: analysis.MedianSummary) -> None:
    for d, v in sorted(summary.medians.items(), key=lambda kv: -kv[1]):
        print(f"  {d:<32} median RLS {v:.3f}")
    if summary.ratio is not None:
        print(f"max/min median RLS: {summary.ratio:.2f} ({summary.fastest} / {summary.slowest})")


def cmd_report(args) -> int:
    runs = _collect_runs(args)
    rows = analysis.completion_report(runs)
    if args.out_dir:
        analysis.write_csv(rows, Path(args.out_dir) / "completion.csv")
    print(f"{'dataset':<28} {'store':<14} {'platform':<20} {'loaded':>12} {'total':>12}  status")
    for r in rows:
        print(f"{r.dataset:<28} {r.store:<14} {r.platform:<20} {r.loaded_triples:>12} "
              f"{r.dataset_triples:>12}  {'full' if r.fully_loaded else r.termination}")
    try:
        m = analysis.trim_and_filter(analysis.build_ls_matrix(runs, args.on_duplicate),
                                     _csv_list(args.exclude), args.trim_to)
    except analysis.AnalysisError as exc:
        print(f"no RLS summary: {exc}")
        return EXIT_OK
    summary = analysis.median_rls_summary(analysis.RlsTable.from_matrix(m))
    print()
    _print_medians(summary)
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rdfload", description="RDF bulk-load benchmark harness.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("prepare", aliases=["split"], help="split an N-Triples file into batches")
    sp.add_argument("input", help="N-Triples file")
    sp.add_argument("--out-dir", help=f"batch directory (default ${OUTPUT_DIR_ENV}/<input stem>)")
    sp.add_argument("--batch-size", type=_positive_int, default=dataset.DEFAULT_BATCH_SIZE,
                    help="triples per batch (default %(default)s)")
    sp.add_argument("--overwrite", action="store_true", help="replace existing batch files")
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("stats", help="dataset statistics of an N-Triples file")
    sp.add_argument("input", help="N-Triples file")
    sp.add_argument("--out", help="write the JSON statistics here")
    sp.add_argument("--spill-threshold", type=_positive_int, default=None,
                    help="distinct terms kept in memory before spilling counts to disk")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("--out", required=True, help="output N-Triples file")
    sp.add_argument("--config", type=_json_arg, help="profile as JSON or @file; flags override it")
    sp.add_argument("--triples", dest="n_triples", type=_positive_int, help="number of triples")
    sp.add_argument("--regularity", choices=("regular", "irregular"))
    sp.add_argument("--subjects", dest="n_subjects", type=_positive_int, help="subject budget (regular)")
    sp.add_argument("--predicates", dest="n_predicates", type=_positive_int, help="distinct predicates")
    sp.add_argument("--object-cardinality", help="distinct objects, or 'unbounded'")
    sp.add_argument("--literal-fraction", type=float, help="share of literal objects")
    sp.add_argument("--seed", type=int, help="random seed (default 42)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bench", help="benchmark one store on one batch directory")
    sp.add_argument("--batches-dir", required=True, help="directory of batch-NNNNNN.nt files")
    sp.add_argument("--store", choices=STORE_KINDS, default="reference", help="store kind")
    sp.add_argument("--store-config", type=_json_arg, default={},
                    help="store config as JSON or @file, e.g. '{\"persistence\": \"disk\", "
                         "\"data_dir\": \"db\"}'")
    sp.add_argument("--threshold-tps", type=_positive_float, default=driver.DEFAULT_THRESHOLD_TPS,
                    help="stop at the first batch loaded slower than this (default %(default)s)")
    sp.add_argument("--sample-hz", type=float, default=driver.DEFAULT_SAMPLE_HZ,
                    help="resource sampling rate; 0 samples only at batch edges (default %(default)s)")
    sp.add_argument("--label", type=_label, action="append", metavar="KEY=VALUE",
                    help="run label; dataset, store and platform identify the run")
    sp.add_argument("--memory-limit", type=_positive_int, help="memory budget in bytes (recorded only)")
    sp.add_argument("--split-parse-time", action="store_true",
                    help="also record the parsing part of each batch's load time")
    sp.add_argument("--out", help=f"results file (default ${OUTPUT_DIR_ENV}/<labels>.jsonl)")
    sp.set_defaults(func=cmd_bench)

    for name, func, helptext in (("analyze", cmd_analyze, "relative loading speed analysis"),
                                 ("report", cmd_report, "completion and median-RLS summaries")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("runs", nargs="*", help="results files or directories of *.jsonl")
        sp.add_argument("--ingest-csv", action="append", metavar="CSV",
                        help="long-format per-batch CSV of external results")
        sp.add_argument("--batch-size", type=_positive_int, default=dataset.DEFAULT_BATCH_SIZE,
                        help="batch size of --ingest-csv data (default %(default)s)")
        sp.add_argument("--exclude", action="append", metavar="DATASETS",
                        help="comma-separated datasets to leave out")
        sp.add_argument("--trim-to", type=_trim, metavar="TRIPLES|min-common",
                        help="keep only the first TRIPLES triples of every dataset")
        sp.add_argument("--on-duplicate", choices=("error", "last"), default="error",
                        help="what to do with repeated dataset/store/platform runs")
        sp.add_argument("--allow-incomplete", action="store_true",
                        help="read results files lacking a termination line as crashed runs")
        sp.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_DIR_ENV}/analysis)"
                        if name == "analyze" else "also write completion.csv here")
        if name == "analyze":
            sp.add_argument("--window", type=_positive_int, default=500_000,
                            help="RLS aggregation window in triples (default %(default)s)")
            sp.add_argument("--store-window", type=_positive_int, default=1_000_000,
                            help="store/platform aggregation window in triples (default %(default)s)")
            sp.add_argument("--ci", type=float, default=0.95, help="confidence level (default %(default)s)")
        sp.set_defaults(func=func)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rdfload {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - reported, not re-raised
        if args.verbose:
            log.exception("failed")
        print(f"rdfload {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
