"""Command-line front end.

Subcommands
-----------
generate   write synthetic benchmark bundles (dag.json, spec.json, data.csv,
           meta.json) for a list of seeds
discover   run the ordering algorithm on a CSV dataset, optionally prune
           edges and score against a ground-truth DAG, emit a JSON report
benchmark  run a seed x method campaign, writing results.csv, summary.json,
           a manifest, and box-plot figures next to the tables
metrics    score a given order (JSON list) and/or predicted DAG against a
           ground-truth DAG

Exit codes: 0 ok, 1 configuration error, 2 data error, 3 estimator failure.
A config file (JSON object mirroring the flags) can seed any subcommand via
``--config``; explicit flags win.  The default output directory comes from
``LOSAM_OUTPUT_DIR`` when set.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backends import LosamConfig
from .graphs import Dag, GraphError, is_valid_order
from .metrics import a_top, prune_edges, rand_sort, shd_f1, var_sort
from .ordering import SortFinderError, losam
from .stats import EstimatorError
from .synth import (
    Dataset,
    GenerationError,
    generate_filtered,
    standardize,
    write_bundle,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_ESTIMATOR = 3

METHODS = ("losam", "varsort", "randsort")
NOISES = ("uniform", "laplace", "gaussian")
RESULT_COLUMNS = [
    "method",
    "seed",
    "d",
    "n",
    "noise",
    "linear_prop",
    "a_top",
    "shd",
    "f1",
    "runtime_ms",
    "status",
]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _default_output_dir() -> str:
    return os.environ.get("LOSAM_OUTPUT_DIR", "losam-output")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}", EXIT_CONFIG)
    if not isinstance(obj, dict):
        raise CliError(f"config file {path} must hold a JSON object", EXIT_CONFIG)
    return obj


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill in values from --config for flags left at their defaults."""
    file_values = _load_config_file(getattr(args, "config", None))
    subparser = getattr(args, "subparser", None)
    for key, value in file_values.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("func", "subparser", "config"):
            raise CliError(f"unknown config key {key!r}", EXIT_CONFIG)
        if subparser is not None and subparser.get_default(attr) == getattr(args, attr):
            setattr(args, attr, value)
    return args


def _manifest(args: argparse.Namespace, extra: dict | None = None) -> dict:
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func", "config", "subparser")
    }
    blob = json.dumps(config, sort_keys=True, default=str)
    return {
        "artifact_version": __version__,
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        **(extra or {}),
    }


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise CliError(f"cannot parse seed list {text!r}", EXIT_CONFIG)
    if not seeds:
        raise CliError("seed list must be nonempty", EXIT_CONFIG)
    return seeds


def _density_edges(density: str, d: int) -> float:
    avg = {"ER1": float(d), "ER2": float(2 * d)}[density]
    return min(avg, d * (d - 1) / 2)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    if not (0.0 <= args.linear_prop <= 1.0):
        raise CliError(f"linear-prop must be in [0,1], got {args.linear_prop}", EXIT_CONFIG)
    if args.d < 1 or args.n < 1:
        raise CliError("d and n must be positive", EXIT_CONFIG)
    if args.linear_prop == 1.0 and args.noise == "gaussian" and args.d > 1:
        print(
            "warning: fully linear mechanisms with Gaussian noise are not "
            "identifiable; the recovered ordering is not unique",
            file=sys.stderr,
        )
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for seed in _parse_seeds(args.seeds):
        dag, spec, data, meta = generate_filtered(
            d=args.d,
            avg_edges=_density_edges(args.graph_density, args.d),
            linear_prob=args.linear_prop,
            n=args.n,
            rng_seed=seed,
            noise_family=args.noise,
            threshold=args.sortability_threshold,
        )
        bundle = out / f"seed-{seed:05d}"
        write_bundle(bundle, dag, spec, data, meta)
        print(f"wrote {bundle}")
    (out / "manifest.json").write_text(json.dumps(_manifest(args), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# discover
# ---------------------------------------------------------------------------


def cmd_discover(args: argparse.Namespace) -> int:
    try:
        data = Dataset.from_csv(args.data_csv)
    except (OSError, GenerationError) as exc:
        raise CliError(str(exc), EXIT_DATA)
    if data.n < 50:
        print(f"warning: only n={data.n} samples; results may be unreliable", file=sys.stderr)
    truth = None
    if args.truth:
        try:
            truth = Dag.from_json(Path(args.truth).read_text())
        except (OSError, json.JSONDecodeError, GraphError) as exc:
            raise CliError(f"cannot load truth DAG: {exc}", EXIT_DATA)
        if truth.num_vertices != data.d:
            raise CliError("truth DAG vertex count does not match the data", EXIT_DATA)
    try:
        std = standardize(data)
    except GenerationError as exc:
        raise CliError(str(exc), EXIT_DATA)

    config = LosamConfig(level=args.level, seed=args.seed)
    start = time.perf_counter()
    try:
        result = losam(std, config)
    except (SortFinderError, EstimatorError) as exc:
        raise CliError(f"estimator failure: {exc}", EXIT_ESTIMATOR)
    report: dict = {
        "order": result.order,
        "order_labels": [data.column_labels[i] for i in result.order],
        "runtime_s": time.perf_counter() - start,
        "trace": result.to_json_dict() if args.trace else None,
        "manifest": _manifest(args),
    }
    if args.prune:
        pred = prune_edges(std.values, result.order, level=args.level, rng_seed=args.seed)
        report["pruned_dag"] = json.loads(pred.to_json())
    if truth is not None:
        score = a_top(result.order, truth)
        report["metrics"] = {
            "a_top": None if score is None else score.to_json_dict(),
            "order_valid": is_valid_order(truth, result.order),
        }
        if args.prune:
            report["metrics"]["graph"] = shd_f1(pred, truth).to_json_dict()
    text = json.dumps(report, indent=2)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text)
        print(f"wrote {args.output}")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


def _run_one(method: str, seed: int, args: argparse.Namespace) -> dict:
    row = {
        "method": method,
        "seed": seed,
        "d": args.d,
        "n": args.n,
        "noise": args.noise,
        "linear_prop": args.linear_prop,
        "a_top": "",
        "shd": "",
        "f1": "",
        "runtime_ms": "",
        "status": "ok",
    }
    try:
        dag, spec, data, meta = generate_filtered(
            d=args.d,
            avg_edges=_density_edges(args.graph_density, args.d),
            linear_prob=args.linear_prop,
            n=args.n,
            rng_seed=seed,
            noise_family=args.noise,
        )
        start = time.perf_counter()
        if method == "losam":
            result = losam(data, LosamConfig(level=args.level, seed=seed))
            order = result.order
        elif method == "varsort":
            order = var_sort(data.values)
        elif method == "randsort":
            order = rand_sort(args.d, seed)
        else:
            raise CliError(f"unknown method {method!r}", EXIT_CONFIG)
        runtime_ms = (time.perf_counter() - start) * 1000.0
        score = a_top(order, dag)
        row["a_top"] = "" if score is None else f"{score.a_top:.6f}"
        row["runtime_ms"] = f"{runtime_ms:.3f}"
        if args.prune:
            pred = prune_edges(data.values, order, level=args.level, rng_seed=seed)
            gscore = shd_f1(pred, dag)
            row["shd"] = str(gscore.shd)
            row["f1"] = f"{gscore.f1:.6f}"
    except (SortFinderError, EstimatorError) as exc:
        row["status"] = f"estimator_failure: {exc}"
    except GenerationError as exc:
        row["status"] = f"generation_failure: {exc}"
    return row


def _summarize(rows: list[dict]) -> dict:
    summary: dict = {}
    for method in sorted({r["method"] for r in rows}):
        vals = [
            float(r["a_top"])
            for r in rows
            if r["method"] == method and r["status"] == "ok" and r["a_top"] != ""
        ]
        ok = sum(1 for r in rows if r["method"] == method and r["status"] == "ok")
        entry = {"runs": ok, "failures": sum(1 for r in rows if r["method"] == method) - ok}
        if vals:
            q1, med, q3 = np.percentile(vals, [25, 50, 75])
            entry["a_top"] = {
                "median": float(med),
                "iqr": [float(q1), float(q3)],
                "mean": float(np.mean(vals)),
            }
        summary[method] = entry
    return summary


def cmd_benchmark(args: argparse.Namespace) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise CliError("methods list must be nonempty", EXIT_CONFIG)
    for m in methods:
        if m not in METHODS:
            raise CliError(f"unknown method {m!r}; choose from {METHODS}", EXIT_CONFIG)
    seeds = _parse_seeds(args.seeds)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = [
        _run_one(method, seed, args)
        for seed in seeds
        for method in methods
    ]
    rows.sort(key=lambda r: (r["seed"], r["method"]))

    results_path = out / "results.csv"
    with open(results_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    summary = _summarize(rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    (out / "manifest.json").write_text(
        json.dumps(_manifest(args, {"rows": len(rows)}), indent=2)
    )
    print(f"wrote {results_path} ({len(rows)} rows)")
    if args.figures:
        from .plots import render_benchmark_figures

        for path in render_benchmark_figures(rows, out):
            print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def cmd_metrics(args: argparse.Namespace) -> int:
    try:
        truth = Dag.from_json(Path(args.truth).read_text())
    except (OSError, json.JSONDecodeError, GraphError) as exc:
        raise CliError(f"cannot load truth DAG: {exc}", EXIT_DATA)
    report: dict = {}
    if args.order:
        try:
            order = json.loads(Path(args.order).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot load order: {exc}", EXIT_DATA)
        try:
            score = a_top(order, truth)
        except GraphError as exc:
            raise CliError(str(exc), EXIT_DATA)
        report["a_top"] = None if score is None else score.to_json_dict()
        report["order_valid"] = is_valid_order(truth, order)
    if args.pred:
        try:
            pred = Dag.from_json(Path(args.pred).read_text())
            report["graph"] = shd_f1(pred, truth).to_json_dict()
        except (OSError, json.JSONDecodeError, GraphError) as exc:
            raise CliError(str(exc), EXIT_DATA)
    if not report:
        raise CliError("metrics needs --order and/or --pred", EXIT_CONFIG)
    report["manifest"] = _manifest(args)
    print(json.dumps(report, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="losam",
        description="Topological ordering for additive noise models: "
        "synthetic benchmarks, discovery, and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file mirroring the flags")
        p.add_argument("--level", type=float, default=0.01,
                       help="independence-test level (default 0.01)")

    gen = sub.add_parser("generate", help="write synthetic benchmark bundles")
    add_common(gen)
    gen.add_argument("--d", type=int, default=10, help="vertex count")
    gen.add_argument("--n", type=int, default=1000, help="sample count")
    gen.add_argument("--graph-density", choices=("ER1", "ER2"), default="ER1")
    gen.add_argument("--noise", choices=NOISES, default="uniform")
    gen.add_argument("--linear-prop", type=float, default=0.5,
                     help="probability of a linear mechanism")
    gen.add_argument("--seeds", default="0", help="comma/space separated seed list")
    gen.add_argument("--sortability-threshold", type=float, default=0.75)
    gen.add_argument("--output-dir", default=_default_output_dir())
    gen.set_defaults(func=cmd_generate, subparser=gen)

    disc = sub.add_parser("discover", help="run discovery on a CSV dataset")
    add_common(disc)
    disc.add_argument("data_csv", help="CSV with a header row of column names")
    disc.add_argument("--truth", help="ground-truth DAG JSON for scoring")
    disc.add_argument("--seed", type=int, default=0)
    disc.add_argument("--prune", action=argparse.BooleanOptionalAction, default=True,
                      help="prune edges from the recovered ordering")
    disc.add_argument("--trace", action=argparse.BooleanOptionalAction, default=False,
                      help="include the full audit trace in the report")
    disc.add_argument("--output", help="write the JSON report here instead of stdout")
    disc.set_defaults(func=cmd_discover, subparser=disc)

    bench = sub.add_parser("benchmark", help="run a seed x method campaign")
    add_common(bench)
    bench.add_argument("--d", type=int, default=10)
    bench.add_argument("--n", type=int, default=1000)
    bench.add_argument("--graph-density", choices=("ER1", "ER2"), default="ER1")
    bench.add_argument("--noise", choices=NOISES, default="uniform")
    bench.add_argument("--linear-prop", type=float, default=0.5)
    bench.add_argument("--seeds", default="0,1,2", help="comma/space separated seed list")
    bench.add_argument("--methods", default="losam,varsort,randsort")
    bench.add_argument("--prune", action=argparse.BooleanOptionalAction, default=False,
                       help="also prune edges and report SHD/F1 (slower)")
    bench.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                       help="render box-plot figures beside results.csv")
    bench.add_argument("--output-dir", default=_default_output_dir())
    bench.set_defaults(func=cmd_benchmark, subparser=bench)

    met = sub.add_parser("metrics", help="score an order/graph pair against a truth DAG")
    add_common(met)
    met.add_argument("--truth", required=True, help="ground-truth DAG JSON")
    met.add_argument("--order", help="JSON file holding the order as a list")
    met.add_argument("--pred", help="predicted DAG JSON")
    met.set_defaults(func=cmd_metrics, subparser=met)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
