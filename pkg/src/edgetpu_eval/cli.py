"""``edgetpu-eval`` command line: generate, estimate, train, predict, evaluate, analyze, swap.

Exit codes: 0 success, 2 usage error, 3 missing input file, 4 schema or
record error in an input file, 1 any other failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .accel_config import PRESET_NAMES, AcceleratorConfig, load_config, preset
from .analysis import (
    best_config_buckets,
    latency_buckets,
    long_format_csv,
    swap_impact,
    swap_matrix_csv,
    text_summary,
    trend_report,
    trends_csv,
)
from .cost_model import COLD, STEADY, estimate_rows
from .dataset_io import (
    RecordError,
    SchemaError,
    read_cells,
    read_results,
    write_cells,
    write_metadata,
    write_results,
)
from .nas_graph import BACKEND, MAX_EDGES, MAX_VERTICES, enumerate_cells

log = logging.getLogger("edgetpu_eval")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_SCHEMA = 4

MODE_FLAGS = {"steady": STEADY, "cold": COLD}


class MissingInput(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise MissingInput(f"input file not found: {path}")
    return p


def _accels(args) -> list[AcceleratorConfig]:
    configs = [preset(name) for name in args.accel or []]
    configs += [load_config(_existing(p)) for p in args.accel_file or []]
    if not configs:
        configs = [preset(name) for name in PRESET_NAMES]
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate accelerator names: {names}")
    return configs


def _meta(args, **extra) -> dict:
    d = {"command": args.command, "seed": args.seed, "version": __version__}
    d.update(extra)
    return d


def _target(row, metric: str) -> float:
    return row.latency_ms if metric == "latency" else row.energy_mj


def _select_accel(rows, accel: str | None, where: str):
    names = sorted({r.accel for r in rows})
    if accel is None:
        if len(names) != 1:
            raise ValueError(f"{where} holds results for {names}; pick one with --accel")
        accel = names[0]
    elif accel not in names:
        raise ValueError(f"{where} has no results for accelerator {accel!r} (found {names})")
    return accel, {r.cell_hash: r for r in rows if r.accel == accel}


def _joined(args):
    rows = list(read_results(_existing(args.results)))
    accel, by_hash = _select_accel(rows, args.accel, args.results)
    cells, targets = [], []
    for rec in read_cells(_existing(args.cells)):
        row = by_hash.get(rec.hash)
        if row is not None:
            cells.append(rec.cell)
            targets.append(_target(row, args.metric))
    if not cells:
        raise ValueError(f"no cell in {args.cells} has a result for {accel}")
    return accel, cells, np.asarray(targets)


# -- subcommands -------------------------------------------------------------------


def cmd_generate(args) -> int:
    cells = enumerate_cells(args.max_vertices, args.max_edges, sample=args.sample, seed=args.seed)
    n = write_cells(args.out, cells)
    write_metadata(args.out, _meta(args, sample=args.sample, max_vertices=args.max_vertices,
                                   max_edges=args.max_edges, count=n, backend=BACKEND))
    print(f"wrote {n} cells to {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    accels = _accels(args)
    cells = (rec.cell for rec in read_cells(_existing(args.cells)))
    n = write_results(args.out, estimate_rows(cells, accels, mode=MODE_FLAGS[args.mode], threads=args.threads))
    write_metadata(args.out, _meta(args, mode=MODE_FLAGS[args.mode], rows=n,
                                   accelerators=[c.to_dict() for c in accels]))
    print(f"wrote {n} rows to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .learned_model import TrainConfig, save_model, train

    accel, cells, y = _joined(args)
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    model, report = train(cells, y, cfg)
    model.train_config = dict(model.train_config, accel=accel, metric=args.metric)
    save_model(model, args.out)
    metrics = dict(report.to_dict(), accel=accel, metric=args.metric, accuracy_definition="1 - MAPE")
    Path(str(args.out) + ".metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    write_metadata(args.out, _meta(args, accel=accel, metric=args.metric, epochs=args.epochs, cells=len(cells)))
    print(json.dumps({k: metrics[k] for k in ("accel", "metric", "accuracy", "spearman", "pearson", "count")}))
    return EXIT_OK


def cmd_predict(args) -> int:
    from .learned_model import load_model, predict

    model = load_model(_existing(args.model))
    records = list(read_cells(_existing(args.cells)))
    cells = [r.cell for r in records]
    chunk = 2048
    parts = [cells[i:i + chunk] for i in range(0, len(cells), chunk)]
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        preds = np.concatenate([p for p in pool.map(lambda c: predict(model, c), parts)]) if parts else []
    cfg = model.train_config or {}
    column = f"predicted_{cfg.get('metric', 'latency')}"
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_hash", column])
        for rec, p in zip(records, preds):
            w.writerow([rec.hash, repr(float(p))])
    write_metadata(args.out, _meta(args, model=str(args.model), rows=len(records)))
    print(f"wrote {len(records)} predictions to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .learned_model import evaluate, load_model

    model = load_model(_existing(args.model))
    cfg = model.train_config or {}
    if args.accel is None:
        args.accel = cfg.get("accel")
    accel, cells, y = _joined(args)
    m = evaluate(model, cells, y)
    out = dict(m.to_dict(), accel=accel, metric=args.metric, accuracy_definition="1 - MAPE")
    for k in ("split_sizes", "best_epoch", "history"):
        out.pop(k)
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_analyze(args) -> int:
    rows = list(read_results(_existing(args.results)))
    if not rows:
        raise ValueError(f"{args.results} holds no result rows")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trends.csv").write_text(trends_csv(trend_report(rows, args.params_quantiles)))
    (out / "long.csv").write_text(long_format_csv(rows))
    (out / "summary.txt").write_text(text_summary(rows, args.params_quantiles))
    if len({r.accel for r in rows}) > 1:
        report = best_config_buckets(rows)
        with open(out / "buckets.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bucket", "count", "accel", "mean_latency_ms", "mean_energy_mj"])
            for name, b in report.buckets.items():
                for a in report.accels:
                    w.writerow([name, b.count, a, repr(b.mean_latency_ms[a]), repr(b.mean_energy_mj[a])])
            w.writerow(["ties", report.ties, "", "", ""])
    if args.latency_edges:
        with open(out / "latency_buckets.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["accel", "lo_ms", "hi_ms", "count", "mean_n_conv3x3", "mean_validation_accuracy"])
            for accel, buckets in latency_buckets(rows, args.latency_edges).items():
                for b in buckets:
                    w.writerow([accel, repr(b.lo_ms), repr(b.hi_ms), b.count, repr(b.mean_conv3x3),
                                "" if b.mean_accuracy is None else repr(b.mean_accuracy)])
    write_metadata(out / "summary.txt", _meta(args, rows=len(rows)))
    print((out / "summary.txt").read_text(), end="")
    return EXIT_OK


def cmd_swap(args) -> int:
    rows = list(read_results(_existing(args.results)))
    cells = [rec.cell for rec in read_cells(_existing(args.cells))]
    names = args.accel or sorted({r.accel for r in rows})
    matrices = []
    for name in names:
        _, by_hash = _select_accel(rows, name, args.results)
        lat = {h: _target(r, args.metric) for h, r in by_hash.items()}
        m = swap_impact(cells, lat, name)
        matrices.append(m)
        print(f"{name}: matched {m.matched}/{m.attempts} swaps ({m.match_rate:.1%})")
    Path(args.out).write_text(swap_matrix_csv(matrices))
    write_metadata(args.out, _meta(args, metric=args.metric,
                                   match_rates={m.accel: m.match_rate for m in matrices}))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgetpu-eval", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=0, help="random seed, echoed into output metadata (default 0)")
        return sp

    def accel_flags(sp, many=True):
        if many:
            sp.add_argument("--accel", nargs="+", choices=PRESET_NAMES, metavar="NAME",
                            help=f"preset accelerators ({', '.join(PRESET_NAMES)})")
        else:
            sp.add_argument("--accel", metavar="NAME", help="accelerator whose results to use")

    def metric_flag(sp):
        sp.add_argument("--metric", choices=("latency", "energy"), default="latency",
                        help="target column (default latency)")

    g = add("generate", cmd_generate, "enumerate or sample cells into a cell file")
    g.add_argument("--sample", type=int, metavar="N", help="sample N unique cells instead of the full space")
    g.add_argument("--max-vertices", type=int, default=MAX_VERTICES, help="default %(default)s")
    g.add_argument("--max-edges", type=int, default=MAX_EDGES, help="default %(default)s")
    g.add_argument("--out", required=True, help="output cell file (.ndjson, optionally .gz)")

    e = add("estimate", cmd_estimate, "run the cost model over cells for each accelerator")
    e.add_argument("--cells", required=True, help="input cell file")
    accel_flags(e)
    e.add_argument("--accel-file", nargs="+", metavar="PATH", help="accelerator config JSON file(s)")
    e.add_argument("--mode", choices=tuple(MODE_FLAGS), default="steady",
                   help="steady: parameters cached after warm-up; cold: all parameters streamed")
    e.add_argument("--threads", type=int, default=1, help="worker threads; output order is fixed")
    e.add_argument("--out", required=True, help="output results CSV")

    t = add("train", cmd_train, "train a surrogate on cost-model results")
    t.add_argument("--cells", required=True, help="cell file")
    t.add_argument("--results", required=True, help="results CSV from estimate")
    accel_flags(t, many=False)
    metric_flag(t)
    t.add_argument("--epochs", type=int, default=30, help="default %(default)s")
    t.add_argument("--out", required=True, help="output model checkpoint (JSON)")

    pr = add("predict", cmd_predict, "predict with a trained surrogate")
    pr.add_argument("--model", required=True, help="model checkpoint")
    pr.add_argument("--cells", required=True, help="cell file")
    pr.add_argument("--threads", type=int, default=1, help="worker threads; output order is fixed")
    pr.add_argument("--out", required=True, help="output predictions CSV")

    ev = add("evaluate", cmd_evaluate, "score a surrogate against held-out results")
    ev.add_argument("--model", required=True, help="model checkpoint")
    ev.add_argument("--cells", required=True, help="cell file")
    ev.add_argument("--results", required=True, help="results CSV")
    accel_flags(ev, many=False)
    metric_flag(ev)
    ev.add_argument("--out", help="also write the metrics JSON here")

    a = add("analyze", cmd_analyze, "trend, bucket and plotting reports from results")
    a.add_argument("--results", required=True, help="results CSV")
    a.add_argument("--params-quantiles", type=int, default=10, help="default %(default)s")
    a.add_argument("--latency-edges", type=float, nargs="+", metavar="MS",
                   help="bucket edges in ms for the latency histogram report")
    a.add_argument("--out", required=True, help="output directory")

    s = add("swap", cmd_swap, "mean latency change per single-op replacement")
    s.add_argument("--cells", required=True, help="cell file")
    s.add_argument("--results", required=True, help="results CSV")
    s.add_argument("--accel", nargs="+", metavar="NAME", help="accelerators to report (default all)")
    metric_flag(s)
    s.add_argument("--out", required=True, help="output CSV")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FileNotFoundError as exc:
        print(f"error: input file not found: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING
    except (SchemaError, RecordError) as exc:
        kind = "schema mismatch" if isinstance(exc, SchemaError) else "bad record"
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
