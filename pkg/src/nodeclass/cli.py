"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error (missing or malformed
input, infeasible model parameters).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from nodeclass import __version__
from nodeclass.bootstrap import GrowthConfig, grow_network, train_growth_classifier
from nodeclass.experiments import (
    ExperimentConfig,
    build_node_dataset,
    derive_seed,
    feature_based_baseline,
    kfold_network_cv,
    kfold_node_cv,
    real_vs_model_experiment,
    sample_ego_networks,
    whole_network_classify,
)
from nodeclass.features import extract_features
from nodeclass.forest import feature_importances, train_forest
from nodeclass.graph import GraphFormatError, ego_network, export_graph, graph_stats, load_edge_list, load_tu_dataset
from nodeclass.models import MODEL_KINDS, GenerationError, ModelSpec, generate, matched_spec

logger = logging.getLogger("nodeclass")

DATA_ENV = "NODECLASS_DATA"
ATTACHMENT_FLAGS = {"vertex-copy": "VertexCopy", "triadic-closure": "TriadicClosure"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; that code is reserved for data errors here
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed (random if omitted, always recorded)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("--config", help="JSON file with experiment settings")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="TU dataset name, e.g. IMDB-BINARY")
    p.add_argument("--data-dir", default=None, help=f"directory holding <name>/ (default ${DATA_ENV} or ./data)")


def _cv_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--lightweight", action="store_true", default=None)
    p.add_argument("--trees", type=int, dest="num_trees")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nodeclass", description="Node-level network classification toolkit.")
    parser.add_argument("--version", action="version", version=f"nodeclass {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("features", help="per-node feature table for one graph")
    p.add_argument("--input", required=True)
    p.add_argument("--one-indexed", action="store_true")
    p.add_argument("--lightweight", action="store_true")
    _common(p)

    p = sub.add_parser("stats", help="whole-graph summary statistics")
    p.add_argument("--input", required=True)
    _common(p)

    p = sub.add_parser("generate", help="sample a random network model")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--like", help="edge list whose size (or degrees) the model should match")
    p.add_argument("--rewire-p", type=float, default=0.1)
    p.add_argument("--triangle-p", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("train", help="train a node classifier on a labeled dataset")
    _dataset_args(p)
    p.add_argument("--lightweight", action="store_true", default=None)
    p.add_argument("--trees", type=int, dest="num_trees")
    _common(p)

    p = sub.add_parser("node-cv", help="classify nodes by source graph (one class per input)")
    p.add_argument("--input", action="append", required=True, help="edge list; repeat for each class")
    _cv_args(p)
    _common(p)

    p = sub.add_parser("network-cv", help="node classification with network-level folds")
    _dataset_args(p)
    _cv_args(p)
    _common(p)

    p = sub.add_parser("real-vs-model", help="real graphs against matched model graphs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", action="append", help="edge list of a real graph; repeatable")
    src.add_argument("--dataset")
    src.add_argument("--egos-from", help="edge list to sample ego networks from")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--egos", type=int, default=1000, help="ego networks to sample with --egos-from")
    p.add_argument("--min-ego-size", type=int, default=100)
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    _cv_args(p)
    _common(p)

    p = sub.add_parser("classify-networks", help="whole-network labels from sampled node scores")
    _dataset_args(p)
    _cv_args(p)
    p.add_argument("--p", type=float, action="append", dest="p_values", help="sample fraction; repeatable")
    _common(p)

    p = sub.add_parser("baseline", help="random forest on global network statistics")
    _dataset_args(p)
    _cv_args(p)
    _common(p)

    p = sub.add_parser("bootstrap", help="grow a network from a seed with attach-and-prune")
    p.add_argument("--original", required=True)
    p.add_argument("--attachment", choices=sorted(ATTACHMENT_FLAGS), default="vertex-copy")
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--seed-graph", help="edge list to start from (default: ego network of --ego)")
    p.add_argument("--ego", type=int, help="ego node of the original (default: highest degree)")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--lightweight", action="store_true")
    _common(p)
    return parser


def _data_dir(args) -> Path:
    return Path(args.data_dir or os.environ.get(DATA_ENV, "data"))


def _load_config(args, mode: str) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    doc["mode"] = mode
    doc["seed"] = args.seed
    for key in ("folds", "repeats", "lightweight", "num_trees"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    return ExperimentConfig.from_dict(doc)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, args, config: dict, seeds: dict, outputs: Sequence[Path]) -> None:
    # --jobs and --out are left out on purpose: results never depend on them
    _write_json(
        out / "manifest.json",
        {
            "toolkit": "nodeclass",
            "version": __version__,
            "command": args.command,
            "seed": args.seed,
            "seeds": seeds,
            "config": config,
            "outputs": sorted(p.name for p in outputs),
        },
    )


def _cmd_features(args, out: Path):
    g = load_edge_list(args.input, args.one_indexed)
    fseed = derive_seed(args.seed, "features")
    fm = extract_features(g, args.lightweight, fseed, args.jobs)
    path = out / "features.csv"
    fm.to_csv(path, g.node_ids)
    return {"input": Path(args.input).name, "lightweight": args.lightweight}, {"features": fseed}, [path]


def _cmd_stats(args, out: Path):
    g = load_edge_list(args.input)
    path = out / "stats.json"
    _write_json(path, graph_stats(g).to_dict())
    return {"input": Path(args.input).name}, {}, [path]


def _cmd_generate(args, out: Path):
    gseed = derive_seed(args.seed, "generate")
    if args.like:
        spec = matched_spec(args.model, load_edge_list(args.like), gseed, args.rewire_p, args.triangle_p)
    else:
        if args.n is None:
            raise UsageError("generate needs --n or --like")
        if args.model == "Configuration":
            raise UsageError("the Configuration model needs --like to supply a degree sequence")
        spec = ModelSpec(args.model, args.n, args.m, None, args.rewire_p, args.triangle_p, gseed)
    g = generate(spec)
    path, _ = export_graph(g, out / "graph.edges")
    return {"spec": spec.to_dict(), "realized_m": g.m}, {"generate": gseed}, [path]


def _cmd_train(args, out: Path):
    cfg = _load_config(args, "network_cv")
    col = load_tu_dataset(_data_dir(args), args.dataset)
    items = [(g, int(y), i) for i, (g, y) in enumerate(zip(col.graphs, col.labels))]
    data = build_node_dataset(items, cfg.lightweight, cfg.seed, args.jobs)
    tseed = derive_seed(cfg.seed, "train")
    model = train_forest(data, cfg.train_config(tseed), args.jobs)
    mpath, ipath = out / "model.json", out / "importances.csv"
    model.save(mpath)
    with open(ipath, "w") as fh:
        fh.write("feature,importance_pct\n")
        for name, v in feature_importances(model).items():
            fh.write(f"{name},{v:.10g}\n")
    return {"dataset": args.dataset, **cfg.to_dict()}, {"train": tseed}, [mpath, ipath]


def _report_outputs(report, out: Path, cfg: ExperimentConfig, extra_cfg: dict | None = None):
    paths = report.write(out)
    seeds = {f"train/{f.repeat}/{f.fold}": f.train_seed for f in report.per_fold}
    return {**cfg.to_dict(), **(extra_cfg or {})}, seeds, paths


def _cmd_node_cv(args, out: Path):
    if len(args.input) < 2:
        raise UsageError("node-cv needs at least two --input graphs")
    cfg = _load_config(args, "node_cv")
    graphs = [load_edge_list(p) for p in args.input]
    report = kfold_node_cv(graphs, cfg, args.jobs)
    return _report_outputs(report, out, cfg, {"inputs": [Path(p).name for p in args.input]})


def _cmd_network_cv(args, out: Path):
    cfg = _load_config(args, "network_cv")
    report = kfold_network_cv(load_tu_dataset(_data_dir(args), args.dataset), cfg, args.jobs, keep_scores=True)
    return _report_outputs(report, out, cfg, {"dataset": args.dataset})


def _cmd_real_vs_model(args, out: Path):
    cfg = _load_config(args, "real_vs_model")
    if args.dataset:
        reals = load_tu_dataset(_data_dir(args), args.dataset).graphs
        source = {"dataset": args.dataset}
    elif args.egos_from:
        big = load_edge_list(args.egos_from)
        reals = sample_ego_networks(big, args.egos, args.min_ego_size, derive_seed(cfg.seed, "egos"))
        source = {"egos_from": Path(args.egos_from).name, "egos": len(reals), "min_ego_size": args.min_ego_size}
    else:
        reals = [load_edge_list(p) for p in args.input]
        source = {"inputs": [Path(p).name for p in args.input]}
    report = real_vs_model_experiment(reals, args.model, cfg, args.jobs)
    return _report_outputs(report, out, cfg, {**source, "model": args.model})


def _cmd_classify(args, out: Path):
    cfg = _load_config(args, "whole_network")
    col = load_tu_dataset(_data_dir(args), args.dataset)
    report = whole_network_classify(col, cfg, args.jobs, args.p_values)
    return _report_outputs(report, out, cfg, {"dataset": args.dataset, "p_values": args.p_values})


def _cmd_baseline(args, out: Path):
    cfg = _load_config(args, "baseline")
    report = feature_based_baseline(load_tu_dataset(_data_dir(args), args.dataset), cfg, args.jobs)
    return _report_outputs(report, out, cfg, {"dataset": args.dataset})


def _cmd_bootstrap(args, out: Path):
    doc: dict = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    original = load_edge_list(args.original)
    if original.n < 2:
        raise ValueError("original graph needs at least two nodes")
    if args.seed_graph:
        seed_graph = load_edge_list(args.seed_graph)
    else:
        ego = args.ego if args.ego is not None else int(np.argmax(original.degrees))
        if not 0 <= ego < original.n:
            raise UsageError(f"--ego {ego} is not a node of the original")
        seed_graph = ego_network(original, ego)
    doc.update(
        beta=args.beta,
        attachment=ATTACHMENT_FLAGS[args.attachment],
        seed=derive_seed(args.seed, "growth"),
        rescore_lightweight=args.lightweight,
        snapshot_every=args.snapshot_every,
        snapshot_dir=str(out / "snapshots") if args.snapshot_every else None,
    )
    if args.max_iterations is not None:
        doc["max_iterations"] = args.max_iterations
    if args.threshold is not None:
        doc["score_threshold"] = args.threshold
    cfg = GrowthConfig(**doc)
    cseed = derive_seed(args.seed, "classifier")
    clf = train_growth_classifier(original, args.lightweight, cseed, jobs=args.jobs)
    grown, trace = grow_network(seed_graph, original, clf, cfg, jobs=args.jobs)
    tpath = out / "trace.csv"
    trace.to_csv(tpath)
    gpath, _ = export_graph(grown, out / "grown.edges")
    spath = out / "growth.json"
    _write_json(spath, {"status": trace.status, "iterations": len(trace.records), "final_n": grown.n,
                        "final_m": grown.m, "target_n": cfg.target_n or original.n, "seed_n": seed_graph.n})
    config = {**cfg.to_dict(), "original": Path(args.original).name}
    config["snapshot_dir"] = "snapshots" if args.snapshot_every else None
    return config, {"growth": cfg.seed, "classifier": cseed}, [tpath, gpath, spath]


COMMANDS = {
    "features": _cmd_features,
    "stats": _cmd_stats,
    "generate": _cmd_generate,
    "train": _cmd_train,
    "node-cv": _cmd_node_cv,
    "network-cv": _cmd_network_cv,
    "real-vs-model": _cmd_real_vs_model,
    "classify-networks": _cmd_classify,
    "baseline": _cmd_baseline,
    "bootstrap": _cmd_bootstrap,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.seed is None:
        args.seed = secrets.randbits(63)
        logger.info("no --seed given; using %d", args.seed)
    if args.jobs < 1:
        print("nodeclass: error: --jobs must be >= 1", file=sys.stderr)
        return 1
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        config, seeds, outputs = COMMANDS[args.command](args, out)
        _manifest(out, args, config, seeds, outputs)
    except UsageError as exc:
        print(f"nodeclass: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, GraphFormatError, GenerationError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"nodeclass: data error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
