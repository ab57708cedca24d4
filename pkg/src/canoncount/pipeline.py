"""End-to-end orchestration: ground truth, both training stages, evaluation."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .canonical import DEFAULT_DEPTH, check_depth, partition_all
from .gossip import GossipConfig, GossipModel, GossipTrainConfig, build_samples, train_gossip
from .graph import QuerySet, enumerate_queries
from .metrics import evaluate_matrix
from .oracle import CountTable, ground_truth_counts
from .shmp import NeighborhoodDataset, ShmpConfig, ShmpModel, TrainConfig, train_neighborhood
from .synthgen import DatasetSpec, derive_seed, generate_dataset

log = logging.getLogger(__name__)


def prepare_targets(graphs, queries: QuerySet, depth: int = DEFAULT_DEPTH):
    """Partition every target and compute its ground-truth canonical counts.

    Returns ``(neighborhoods, truths)``, one entry per graph.
    """
    check_depth(depth, queries.max_diameter)
    neighborhoods, truths = [], []
    for g in graphs:
        nbs = partition_all(g, depth)
        neighborhoods.append(nbs)
        truths.append(ground_truth_counts(queries, g, depth, nbs))
    return neighborhoods, truths


def split_graphs(num_graphs: int, holdout_fraction: float, seed: int):
    """Seeded split into sorted (train ids, holdout ids)."""
    rng = np.random.default_rng(derive_seed("split", seed))
    perm = rng.permutation(num_graphs)
    n_hold = int(round(holdout_fraction * num_graphs))
    hold = sorted(int(i) for i in perm[:n_hold])
    train = sorted(int(i) for i in perm[n_hold:])
    return train, hold


def neighborhood_dataset(neighborhoods, truths, ids, queries) -> NeighborhoodDataset:
    return NeighborhoodDataset(
        [nb for i in ids for nb in neighborhoods[i]],
        list(queries),
        np.concatenate([truths[i] for i in ids]) if ids else np.zeros((0, len(queries))),
    )


def predict_tables(nb_model, neighborhoods, ids, queries, targets=None, gossip=None):
    """Per-node predictions as a CountTable; refined through ``gossip`` when given."""
    table = CountTable(len(queries))
    if gossip is None:
        for i in ids:
            table.add(i, nb_model.predict_matrix(neighborhoods[i], list(queries)))
        return table
    samples = build_samples(nb_model, [targets[i] for i in ids], list(queries), None,
                            neighborhoods=[neighborhoods[i] for i in ids])
    refined = gossip.refine(samples)
    nq = len(queries)
    for k, i in enumerate(ids):
        cols = refined[k * nq : (k + 1) * nq]
        table.add(i, np.stack(cols, axis=1))
    return table


def truth_table(truths, ids, num_queries) -> CountTable:
    table = CountTable(num_queries)
    for i in ids:
        table.add(i, truths[i])
    return table


@dataclass
class DeskConfig:
    dataset_seed: int = 0
    spec: DatasetSpec = field(default_factory=DatasetSpec.desk)
    depth: int = DEFAULT_DEPTH
    query_sizes: tuple = (3, 5)
    holdout_fraction: float = 0.2
    split_seed: int = 0
    shmp: ShmpConfig = field(default_factory=ShmpConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    gossip: GossipConfig = field(default_factory=GossipConfig)
    gossip_train: GossipTrainConfig = field(default_factory=GossipTrainConfig)


@dataclass
class DeskResult:
    config: DeskConfig
    queries: QuerySet
    train_ids: list
    holdout_ids: list
    nb_model: ShmpModel
    gossip_model: GossipModel
    nb_losses: list
    gossip_losses: list
    totals_unrefined: object
    totals_refined: object
    position_unrefined: object
    position_refined: object

    def summary(self) -> dict:
        def per_size(report, key="pooled_normalized_mse"):
            return {s: r[key] for s, r in report.per_size.items()}

        return {
            "totals_unrefined": per_size(self.totals_unrefined),
            "totals_refined": per_size(self.totals_refined),
            "totals_unrefined_per_query_mean": per_size(self.totals_unrefined, "normalized_mse"),
            "totals_refined_per_query_mean": per_size(self.totals_refined, "normalized_mse"),
            "position_unrefined": per_size(self.position_unrefined),
            "position_refined": per_size(self.position_refined),
            "nb_loss_first_last": (self.nb_losses[0], self.nb_losses[-1]),
            "gossip_loss_first_last": (self.gossip_losses[0], self.gossip_losses[-1]),
        }


def _stack_totals(table: CountTable, ids):
    tot = table.totals()
    return np.stack([tot[i] for i in ids])


def _stack_nodes(table: CountTable, ids):
    return np.concatenate([table.counts[i] for i in ids]).astype(np.float64)


def run_desk(config: DeskConfig = None) -> DeskResult:
    """Generate the desk dataset, train both stages on the training split, score the holdout split."""
    config = config or DeskConfig()
    queries = enumerate_queries(*config.query_sizes)
    ds = generate_dataset(config.spec, config.dataset_seed)
    neighborhoods, truths = prepare_targets(ds.graphs, queries, config.depth)
    train_ids, hold_ids = split_graphs(len(ds.graphs), config.holdout_fraction, config.split_seed)

    log.info("training neighborhood model on %d graphs", len(train_ids))
    nb_model = ShmpModel(config.shmp)
    nb_model, nb_losses = train_neighborhood(
        nb_model, neighborhood_dataset(neighborhoods, truths, train_ids, queries), config.train
    )

    log.info("training gossip model")
    gcfg = GossipConfig(**{**asdict(config.gossip), "query_dim": nb_model.embedding_dim})
    samples = build_samples(nb_model, [ds.graphs[i] for i in train_ids], list(queries), config.depth,
                            truths=[truths[i] for i in train_ids],
                            neighborhoods=[neighborhoods[i] for i in train_ids])
    gossip, gossip_losses = train_gossip(GossipModel(gcfg), samples, config.gossip_train)

    unrefined = predict_tables(nb_model, neighborhoods, hold_ids, queries)
    refined = predict_tables(nb_model, neighborhoods, hold_ids, queries, ds.graphs, gossip)
    truth = truth_table(truths, hold_ids, len(queries))
    sizes = queries.sizes
    return DeskResult(
        config=config,
        queries=queries,
        train_ids=train_ids,
        holdout_ids=hold_ids,
        nb_model=nb_model,
        gossip_model=gossip,
        nb_losses=nb_losses,
        gossip_losses=gossip_losses,
        totals_unrefined=evaluate_matrix(_stack_totals(unrefined, hold_ids), _stack_totals(truth, hold_ids), sizes),
        totals_refined=evaluate_matrix(_stack_totals(refined, hold_ids), _stack_totals(truth, hold_ids), sizes),
        position_unrefined=evaluate_matrix(_stack_nodes(unrefined, hold_ids), _stack_nodes(truth, hold_ids), sizes),
        position_refined=evaluate_matrix(_stack_nodes(refined, hold_ids), _stack_nodes(truth, hold_ids), sizes),
    )
