"""Command-line entry point.

Subcommands: gen-dataset, ground-truth, train, predict, eval, wl-study.
Exit status is 0 on success, 2 for invalid input or configuration and
3 for failures while running.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import autograd as ag
from .canonical import DEFAULT_DEPTH, DepthError, check_depth, partition_all
from .expressiveness import builtin_study, write_study_csv
from .gossip import (
    GossipConfig,
    GossipModel,
    GossipTrainConfig,
    build_samples,
    homophily_ratio,
    index_count_correlation,
    train_gossip,
)
from .graph import GraphBoundError, GraphFormatError, QuerySet, assign_indices, enumerate_queries, load_graph
from .metrics import MetricError, position_distribution_error, total_count_error
from .oracle import CountOverflowError, CountTable, ground_truth_counts
from .pipeline import neighborhood_dataset, split_graphs
from .shmp import ShmpConfig, ShmpModel, TrainConfig, train_neighborhood
from .synthgen import DatasetSpec, GeneratorError, generate_dataset, read_dataset, write_dataset

log = logging.getLogger("canoncount")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
THREADS_ENV = "CANONCOUNT_THREADS"


class ValidationError(ValueError):
    pass


VALIDATION_ERRORS = (ValidationError, DepthError, GraphFormatError, GraphBoundError, MetricError, FileNotFoundError)
RUNTIME_ERRORS = (GeneratorError, CountOverflowError, ag.NonFiniteError)


# ---------------------------------------------------------------------------
# helpers


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n < 1:
        raise ValidationError(f"{THREADS_ENV} must be >= 1")
    return n


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def parse_query_arg(text: str) -> QuerySet:
    """``"3-5"``, ``"4"`` or a directory written by ``QuerySet.save``."""
    p = Path(text)
    if p.is_dir():
        return QuerySet.load(p)
    lo, _, hi = text.partition("-")
    try:
        lo, hi = int(lo), int(hi or lo)
    except ValueError:
        raise ValidationError(f"--queries expects a size range like 3-5 or a query directory, got {text!r}")
    return enumerate_queries(lo, hi)


def _load_truth(directory):
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise ValidationError(f"{directory} is not a ground-truth directory (no meta.json)")
    meta = json.loads(meta_path.read_text())
    return meta, QuerySet.load(directory / "queries"), CountTable.from_csv(directory / "counts.csv")


def _gt_worker(args):
    g, queries, depth = args
    return ground_truth_counts(queries, g, depth)


_CONFIG_SECTIONS = {
    "shmp": ShmpConfig,
    "train": TrainConfig,
    "gossip": GossipConfig,
    "gossip_train": GossipTrainConfig,
}
_SPLIT_DEFAULTS = {"holdout_fraction": 0.2, "seed": 0}


def load_run_config(path=None) -> dict:
    """JSON config with optional sections shmp, train, gossip, gossip_train, split."""
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}")
    unknown = set(raw) - set(_CONFIG_SECTIONS) - {"split"}
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    cfg = {}
    for name, cls in _CONFIG_SECTIONS.items():
        section = dict(raw.get(name, {}))
        allowed = {f.name for f in fields(cls)} - ({"query_dim"} if cls is GossipConfig else set())
        bad = set(section) - allowed
        if bad:
            raise ValidationError(f"unknown keys in [{name}]: {sorted(bad)}")
        if "betas" in section:
            section["betas"] = tuple(section["betas"])
        cfg[name] = cls(**section)
    split = {**_SPLIT_DEFAULTS, **raw.get("split", {})}
    if set(split) != set(_SPLIT_DEFAULTS):
        raise ValidationError(f"unknown keys in [split]: {sorted(set(split) - set(_SPLIT_DEFAULTS))}")
    if not 0 <= split["holdout_fraction"] < 1:
        raise ValidationError("split.holdout_fraction must be in [0, 1)")
    cfg["split"] = split
    return cfg


def _apply_overrides(cfg: dict, args) -> dict:
    section = cfg["train"] if args.stage == "neighborhood" else cfg["gossip_train"]
    for flag in ("epochs", "batch_size", "lr", "seed"):
        val = getattr(args, flag)
        if val is not None:
            setattr(section, flag, val)
    if args.holdout is not None:
        cfg["split"]["holdout_fraction"] = args.holdout
    for name, val in (("epochs", section.epochs), ("batch_size", section.batch_size)):
        if val < 1:
            raise ValidationError(f"{name} must be >= 1")
    if section.lr <= 0:
        raise ValidationError("lr must be positive")
    return cfg


def _write_losses(path, losses) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for e, v in enumerate(losses):
            w.writerow([e, repr(float(v))])


def _loss_path(ckpt: Path) -> Path:
    return ckpt.with_name(ckpt.stem + ".losses.csv")


# ---------------------------------------------------------------------------
# commands


def cmd_gen_dataset(args) -> None:
    path = Path(args.spec)
    if path.is_file():
        try:
            spec = DatasetSpec.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ValidationError(f"{path}: bad dataset spec: {exc}")
    elif args.spec in ("default", "desk"):
        spec = DatasetSpec.named(args.spec)
    else:
        raise ValidationError(f"unknown dataset spec {args.spec!r} (use default, desk or a JSON file)")
    ds = generate_dataset(spec, args.seed)
    write_dataset(ds, args.out)
    log.info("wrote %d graphs to %s", len(ds), args.out)


def cmd_ground_truth(args) -> None:
    queries = parse_query_arg(args.queries)
    check_depth(args.depth, queries.max_diameter)
    ds = read_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(g, queries, args.depth) for g in ds.graphs]
    workers = _threads()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_gt_worker, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_gt_worker(j) for j in jobs]
    table = CountTable(len(queries))
    for gid, arr in enumerate(results):
        table.add(gid, arr)
    table.to_csv(out / "counts.csv")
    table.totals_to_csv(out / "totals.csv")
    queries.save(out / "queries")
    _write_json(out / "meta.json", {
        "dataset": str(Path(args.dataset)),
        "dataset_manifest_sha256": _sha256(Path(args.dataset) / "manifest.json"),
        "depth": args.depth,
        "queries": args.queries,
        "num_queries": len(queries),
        "num_graphs": len(ds),
    })
    log.info("ground truth for %d graphs x %d queries written to %s", len(ds), len(queries), out)


def _training_inputs(args, cfg):
    ds = read_dataset(args.dataset)
    meta, queries, truth = _load_truth(args.truth)
    if meta["num_graphs"] != len(ds):
        raise ValidationError(f"ground truth covers {meta['num_graphs']} graphs, dataset has {len(ds)}")
    depth = meta["depth"]
    train_ids, hold_ids = split_graphs(len(ds), cfg["split"]["holdout_fraction"], cfg["split"]["seed"])
    neighborhoods = {i: partition_all(ds.graphs[i], depth) for i in train_ids}
    truths = {i: truth.counts[i] for i in train_ids}
    return ds, queries, depth, train_ids, hold_ids, neighborhoods, truths


def cmd_train(args) -> None:
    cfg = _apply_overrides(load_run_config(args.config), args)
    ckpt = Path(args.ckpt_out)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    if args.stage == "gossip":
        if not args.nb_ckpt:
            raise ValidationError("--stage gossip needs --nb-ckpt (a trained neighborhood checkpoint)")
        if not Path(args.nb_ckpt).is_file():
            raise ValidationError(f"neighborhood checkpoint {args.nb_ckpt} not found")
        nb_model = ShmpModel.load(args.nb_ckpt)

    ds, queries, depth, train_ids, hold_ids, nbs, truths = _training_inputs(args, cfg)
    extra = {
        "dataset_manifest_sha256": _sha256(Path(args.dataset) / "manifest.json"),
        "depth": depth,
        "queries": [{"num_nodes": q.num_nodes, "edges": [list(e) for e in q.edges]} for q in queries],
        "split": cfg["split"],
        "train_ids": train_ids,
        "holdout_ids": hold_ids,
    }
    if args.stage == "neighborhood":
        model = ShmpModel(cfg["shmp"])
        model, losses = train_neighborhood(model, neighborhood_dataset(nbs, truths, train_ids, queries), cfg["train"])
        extra["train"] = asdict(cfg["train"])
    else:
        gcfg = GossipConfig(**{**asdict(cfg["gossip"]), "query_dim": nb_model.embedding_dim})
        samples = build_samples(nb_model, [ds.graphs[i] for i in train_ids], list(queries), depth,
                                truths=[truths[i] for i in train_ids], neighborhoods=[nbs[i] for i in train_ids])
        model, losses = train_gossip(GossipModel(gcfg), samples, cfg["gossip_train"])
        extra["train"] = asdict(cfg["gossip_train"])
        extra["nb_ckpt_sha256"] = _sha256(args.nb_ckpt)
    model.save(ckpt, extra)
    _write_losses(_loss_path(ckpt), losses)
    log.info("saved %s checkpoint to %s (final loss %.6f)", args.stage, ckpt, losses[-1])


def _predict_targets(args):
    """(graph ids, graphs) selected by --target or --dataset/--split."""
    if args.target:
        graphs = []
        for k, path in enumerate(args.target):
            g = load_graph(path)
            graphs.append(assign_indices(g, args.index_seed + k) if args.index_seed is not None else g)
        return list(range(len(graphs))), graphs
    ds = read_dataset(args.dataset)
    if args.split == "all":
        ids = list(range(len(ds)))
    else:
        doc = ag.load_checkpoint(args.ckpt)
        key = "holdout_ids" if args.split == "holdout" else "train_ids"
        ids = doc.get("extra", {}).get(key)
        if ids is None:
            raise ValidationError(f"checkpoint records no {key}; use --split all")
    return ids, [ds.graphs[i] for i in ids]


def cmd_predict(args) -> None:
    if bool(args.target) == bool(args.dataset):
        raise ValidationError("give exactly one of --target or --dataset")
    queries = parse_query_arg(args.queries)
    check_depth(args.depth, queries.max_diameter)
    nb_model = ShmpModel.load(args.ckpt)
    gossip = GossipModel.load(args.gossip_ckpt) if args.gossip_ckpt else None
    ids, graphs = _predict_targets(args)
    table = CountTable(len(queries))
    for gid, g in zip(ids, graphs):
        nbs = partition_all(g, args.depth)
        if gossip is None:
            table.add(gid, nb_model.predict_matrix(nbs, list(queries)))
        else:
            samples = build_samples(nb_model, [g], list(queries), args.depth, neighborhoods=[nbs])
            table.add(gid, np.stack(gossip.refine(samples), axis=1))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "counts.csv")
    table.totals_to_csv(out / "totals.csv")
    _write_json(out / "meta.json", {
        "ckpt_sha256": _sha256(args.ckpt),
        "gossip_ckpt_sha256": _sha256(args.gossip_ckpt) if args.gossip_ckpt else None,
        "depth": args.depth,
        "queries": args.queries,
        "graph_ids": ids,
    })


def _dataset_diagnostics(truth_meta, truth: CountTable, ids):
    """Mean homophily ratio and index/count correlation of the ground truth, when the dataset is readable."""
    path = Path(truth_meta.get("dataset", ""))
    if not (path / "manifest.json").exists():
        return None, None
    ds = read_dataset(path)
    homs, cors = [], []
    for gid in ids:
        g, arr = ds.graphs[gid], truth.counts[gid]
        for q in range(arr.shape[1]):
            if g.num_edges:
                homs.append(homophily_ratio(g, arr[:, q]))
            try:
                cors.append(index_count_correlation(g.node_index, arr[:, q]))
            except ValueError:
                pass
    return (float(np.mean(homs)) if homs else None), (float(np.mean(cors)) if cors else None)


def cmd_eval(args) -> None:
    pred = CountTable.from_csv(Path(args.pred) / "counts.csv")
    meta, queries, truth = _load_truth(args.truth)
    missing = set(pred.counts) - set(truth.counts)
    if missing:
        raise ValidationError(f"predictions for graphs absent from the ground truth: {sorted(missing)[:10]}")
    if pred.num_queries != truth.num_queries:
        raise ValidationError(f"{pred.num_queries} predicted queries vs {truth.num_queries} in the ground truth")
    ids = sorted(pred.counts)
    # score only the graphs that were predicted (e.g. the holdout split)
    sub = CountTable(truth.num_queries, {g: truth.counts[g] for g in ids})
    pred.counts = {g: pred.counts[g].astype(np.float64) for g in ids}
    totals = total_count_error(pred, sub, queries.sizes)
    position = position_distribution_error(pred, sub, queries.sizes)
    hom, cor = _dataset_diagnostics(meta, truth, ids)
    position.homophily_ratio, position.index_count_correlation = hom, cor
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    totals.to_json(out / "totals.json")
    totals.to_csv(out / "totals.csv")
    position.to_json(out / "position.json")
    position.to_csv(out / "position.csv")
    for size, row in sorted(totals.per_size.items()):
        log.info("size %s: totals normalized MSE %s, position %s", size,
                 row["pooled_normalized_mse"], position.per_size[size]["pooled_normalized_mse"])


def cmd_wl_study(args) -> None:
    try:
        rows = builtin_study(args.max_size, args.min_size)
    except ValueError as exc:
        raise ValidationError(str(exc))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_study_csv(rows, out)
    for r in rows:
        log.info("size %d: %d graphs, WL %d, SHMP %d", r["size"], r["num_graphs"],
                 r["wl_indistinguishable"], r["shmp_indistinguishable"])


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="canoncount", description="Canonical-count subgraph counting toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-dataset", help="generate a synthetic target-graph dataset")
    g.add_argument("--spec", default="default", help="default, desk, or a JSON spec file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_dataset)

    g = sub.add_parser("ground-truth", help="exact canonical counts for every dataset node")
    g.add_argument("--dataset", required=True)
    g.add_argument("--queries", default="3-5")
    g.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_ground_truth)

    g = sub.add_parser("train", help="train the neighborhood or gossip stage")
    g.add_argument("--stage", choices=("neighborhood", "gossip"), required=True)
    g.add_argument("--dataset", required=True)
    g.add_argument("--truth", required=True, help="directory written by ground-truth")
    g.add_argument("--config", help="JSON run config")
    g.add_argument("--nb-ckpt", help="neighborhood checkpoint (gossip stage)")
    g.add_argument("--ckpt-out", required=True)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--holdout", type=float, help="holdout fraction")
    g.set_defaults(func=cmd_train)

    g = sub.add_parser("predict", help="per-node and total count estimates")
    g.add_argument("--ckpt", required=True)
    g.add_argument("--gossip-ckpt")
    g.add_argument("--target", nargs="+", help="edge-list file(s)")
    g.add_argument("--index-seed", type=int, help="assign seeded node indices to --target graphs")
    g.add_argument("--dataset")
    g.add_argument("--split", choices=("holdout", "train", "all"), default="holdout")
    g.add_argument("--queries", default="3-5")
    g.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_predict)

    g = sub.add_parser("eval", help="score predictions against ground truth")
    g.add_argument("--pred", required=True)
    g.add_argument("--truth", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_eval)

    g = sub.add_parser("wl-study", help="WL vs triangle-typed passing on regular graphs")
    g.add_argument("--max-size", type=int, default=8)
    g.add_argument("--min-size", type=int, default=6)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_wl_study)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except VALIDATION_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except RUNTIME_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
