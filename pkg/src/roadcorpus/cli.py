"""roadcorpus command line: ingest, stats, gen-corpus, gen-eval, score, context-pack, qsf.

Exit codes: 0 ok, 2 bad input, 3 empty network, 4 schema error.
Diagnostics go to stderr; machine-readable output goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import resolve
from .corpus import FORMATS, generate, render_and_emit
from .errors import BadInput, RoadCorpusError
from .evaluation import (
    KINDS,
    NameMatcher,
    build_context_pack,
    build_qsf_db,
    gen_eval_suite,
    read_predictions,
    read_tasks,
    score,
    write_tasks,
)
from .ingest import parse_extract
from .network import build_network, load_snapshot, network_summary, save_snapshot

log = logging.getLogger("roadcorpus")


def _write_json(path, doc):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
    except OSError as exc:
        raise BadInput(f"cannot write {path}: {exc}") from None


def _tsv(rows) -> str:
    out = []
    for k, v in rows:
        if isinstance(v, float):
            v = f"{v:.6f}"
        elif v is None:
            v = ""
        elif isinstance(v, (list, tuple)):
            v = ",".join(str(x) for x in v)
        out.append(f"{k}\t{v}")
    return "\n".join(out) + "\n"


def _write_text(path, text):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise BadInput(f"cannot write {path}: {exc}") from None


def _config(args, **extra):
    counts = {}
    for key, attr in (("P2S", "p2s_per_segment"), ("PP_DIST", "n_pairs"), ("PP_DIR", "n_pairs"), ("P2DR", "n_p2dr")):
        v = getattr(args, attr, None)
        if v is not None:
            counts[key] = v
    return resolve(
        args.config,
        seed=args.seed,
        r_m=args.r_m,
        cell_km=args.cell_km,
        index_cell_m=args.index_cell_m,
        K=args.K,
        n_per_kind=getattr(args, "n_per_kind", None),
        city=getattr(args, "city", None),
        corpus_counts=counts or None,
        **extra,
    )


def _snapshot(cfg):
    if not cfg.snapshot_path:
        raise BadInput("no snapshot given (argument or config 'snapshot_path')")
    return load_snapshot(cfg.snapshot_path, cfg.index_cell_m)


# -- commands ---------------------------------------------------------------


def cmd_ingest(args):
    cfg = _config(args, extract_path=args.extract, snapshot_path=args.out, include_non_drivable=args.include_non_drivable or None)
    log.info("parsing %s", cfg.extract_path)
    nodes, ways, stats = parse_extract(cfg.extract_path, cfg.include_non_drivable)
    net = build_network(nodes, ways, stats.bounds, cfg.index_cell_m, cfg.city, stats.sha256)
    save_snapshot(net, cfg.snapshot_path, config=cfg.to_dict(), stats=stats.as_dict())
    summary = network_summary(net)
    doc = {"ingest": stats.as_dict(), "summary": summary, "snapshot": cfg.snapshot_path}
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    if args.plot:
        from .plotting import plot_network

        plot_network(net, args.plot)
    return 0


def cmd_stats(args):
    cfg = _config(args, snapshot_path=args.snapshot)
    net = _snapshot(cfg)
    summary = network_summary(net)
    text = _tsv(summary.items())
    sys.stdout.write(text)
    if args.out_dir:
        from .plotting import plot_length_histogram, plot_network

        out = Path(args.out_dir)
        _write_text(out / "summary.tsv", text)
        _write_json(out / "summary.json", {"summary": summary, "config": cfg.to_dict(), "engine_version": __version__})
        plot_network(net, out / "network.png")
        plot_length_histogram(net, out / "segment_lengths.png")
    return 0


def cmd_gen_corpus(args):
    cfg = _config(args, snapshot_path=args.snapshot)
    net = _snapshot(cfg)
    formats = args.formats or list(FORMATS)
    c = cfg.corpus_counts
    log.info("generating %s", ",".join(formats))
    items = generate(
        net,
        formats,
        seed=cfg.seed,
        p2s_per_segment=c["P2S"],
        n_pairs=c["PP_DIST"],
        n_p2dr=c["P2DR"],
        r=cfg.r_m,
        cell_km=cfg.cell_km,
        n_pairs_dir=c["PP_DIR"],
    )
    flavors = ("pretrain", "instruct") if args.flavor == "both" else (args.flavor,)
    params = {**cfg.to_dict(), "formats": formats}
    out = Path(args.out_dir)
    result = {}
    for flavor in flavors:
        path = out / f"corpus_{flavor}.jsonl"
        manifest = render_and_emit(items, flavor, path, cfg.seed, net.city, params, net.source_sha256)
        result[flavor] = {"path": str(path), "total": manifest["total"], "counts": manifest["counts"]}
    sys.stdout.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_gen_eval(args):
    cfg = _config(args, snapshot_path=args.snapshot)
    net = _snapshot(cfg)
    tasks = gen_eval_suite(net, cfg.n_per_kind, cfg.seed, cfg.r_m, cfg.K, cfg.cell_km, args.kinds or KINDS)
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_tasks(tasks, args.out, config=cfg.to_dict())
    except OSError as exc:
        raise BadInput(f"cannot write {args.out}: {exc}") from None
    counts = {}
    for t in tasks:
        counts[t.kind] = counts.get(t.kind, 0) + 1
    sys.stdout.write(json.dumps({"path": args.out, "tasks": len(tasks), "counts": counts}, sort_keys=True) + "\n")
    return 0


def cmd_score(args):
    cfg = _config(args, snapshot_path=args.snapshot)
    tasks = read_tasks(args.tasks)
    preds = read_predictions(args.predictions)
    names = None
    if cfg.snapshot_path:
        names = NameMatcher(_snapshot(cfg).roads)
    report = score(tasks, preds, names)
    report["config"] = cfg.to_dict()
    report["engine_version"] = __version__
    if report["missing"]:
        log.warning("%d of %d tasks have no prediction; scored as wrong", report["missing"], report["n_tasks"])
    table = _tsv(report["table"].items())
    if args.out:
        out = Path(args.out)
        _write_json(out, report)
        _write_text(out.with_suffix(".tsv"), table)
        if not args.no_plot:
            from .plotting import plot_metrics

            plot_metrics(report["table"], out.with_suffix(".png"))
    sys.stdout.write(table)
    return 0


def cmd_context_pack(args):
    cfg = _config(args, snapshot_path=args.snapshot)
    net = _snapshot(cfg)
    tasks = read_tasks(args.tasks)
    records = build_context_pack(net, tasks, cfg.r_m)
    _write_json(args.out, {"schema": "roadcorpus.context/1", "config": cfg.to_dict(), "records": records})
    sys.stdout.write(json.dumps({"path": args.out, "records": len(records)}) + "\n")
    return 0


def cmd_qsf(args):
    cfg = _config(args, snapshot_path=args.snapshot)
    net = _snapshot(cfg)
    db = build_qsf_db(net, cfg.seed, args.size, cfg.r_m, cfg.cell_km)
    db["config"] = cfg.to_dict()
    _write_json(args.out, db)
    sys.stdout.write(json.dumps({"path": args.out, "points": len(db["points"])}) + "\n")
    return 0


# -- argument parsing ----------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--r-m", dest="r_m", type=float, help="directional search radius in meters (default 4000)")
    p.add_argument("--cell-km", dest="cell_km", type=float, help="sampling grid cell size (default 1.0)")
    p.add_argument("--index-cell-m", dest="index_cell_m", type=float, help="spatial index cell size (default 500)")
    p.add_argument("--K", dest="K", type=int, help="retrieval list length (default 10)")


def build_parser():
    parser = argparse.ArgumentParser(prog="roadcorpus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an OSM XML extract and write a network snapshot")
    p.add_argument("extract")
    p.add_argument("-o", "--out", required=True, help="snapshot path (.json or .json.gz)")
    p.add_argument("--city")
    p.add_argument("--include-non-drivable", action="store_true")
    p.add_argument("--plot", help="also write a network map PNG here")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="summary table for a snapshot, optionally with figures")
    p.add_argument("snapshot")
    p.add_argument("--out-dir", help="write summary.tsv, summary.json and PNG figures here")
    _common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-corpus", help="generate pretraining / instruction corpora")
    p.add_argument("snapshot")
    p.add_argument("--flavor", choices=("pretrain", "instruct", "both"), default="both")
    p.add_argument("--formats", nargs="+", choices=FORMATS)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--p2s-per-segment", type=int)
    p.add_argument("--n-pairs", type=int, help="point pairs for PP_DIST and PP_DIR")
    p.add_argument("--n-p2dr", type=int)
    _common(p)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("gen-eval", help="generate an evaluation task suite with ground truth")
    p.add_argument("snapshot")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--n-per-kind", type=int)
    p.add_argument("--kinds", nargs="+", choices=KINDS)
    _common(p)
    p.set_defaults(func=cmd_gen_eval)

    p = sub.add_parser("score", help="score a predictions file against a task suite")
    p.add_argument("tasks")
    p.add_argument("predictions")
    p.add_argument("-o", "--out", help="report JSON; a .tsv table and .png chart are written next to it")
    p.add_argument("--snapshot", help="match predicted names against every road in this snapshot")
    p.add_argument("--no-plot", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("context-pack", help="nearby-road grounding records for each task")
    p.add_argument("snapshot")
    p.add_argument("tasks")
    p.add_argument("-o", "--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_context_pack)

    p = sub.add_parser("qsf", help="build the few-shot example database")
    p.add_argument("snapshot")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--size", type=int, default=1000)
    _common(p)
    p.set_defaults(func=cmd_qsf)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except RoadCorpusError as exc:
        print(f"roadcorpus {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"roadcorpus {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
