"""Gossip propagation: gated message passing over the target graph.

Per-node neighborhood estimates are refined with a two-layer GNN whose
messages are weighted by a query-dependent gate P: a message travelling
from the smaller-index endpoint to the larger one is scaled by P, the
reverse by 1 - P.  The network predicts a correction that is added to the
incoming estimate.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .canonical import partition_all
from .graph import Graph

log = logging.getLogger(__name__)


@dataclass
class GossipConfig:
    query_dim: int = 32
    hidden: int = 64
    layers: int = 2
    gate_hidden: int = 64
    seed: int = 0


@dataclass
class GossipSample:
    """One (target, query) pair."""

    num_nodes: int
    src: np.ndarray  # directed edges
    dst: np.ndarray
    upward: np.ndarray  # 1.0 where index(src) < index(dst)
    predictions: np.ndarray
    query_embedding: np.ndarray
    truth: np.ndarray = None
    target_id: int = 0
    query_id: int = 0

    @classmethod
    def build(cls, target: Graph, predictions, query_embedding, truth=None, target_id=0, query_id=0):
        predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
        if predictions.size != target.num_nodes:
            raise ValueError(f"{predictions.size} predictions for {target.num_nodes} nodes")
        src, dst = [], []
        for u, v in target.edges:
            src += [u, v]
            dst += [v, u]
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        index = np.asarray(target.node_index)
        upward = (index[src] < index[dst]).astype(np.float64) if src.size else np.zeros(0)
        if truth is not None:
            truth = np.asarray(truth, dtype=np.float64).reshape(-1)
        return cls(target.num_nodes, src, dst, upward, predictions,
                   np.asarray(query_embedding, dtype=np.float64).reshape(-1), truth, target_id, query_id)


@dataclass
class GossipBatch:
    predictions: np.ndarray  # (N, 1)
    query_embeddings: np.ndarray  # (pairs, qdim)
    node_pair: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edge_pair: np.ndarray
    upward: np.ndarray  # (E, 1)
    num_nodes: int
    truth: np.ndarray = None
    sizes: np.ndarray = None

    @classmethod
    def build(cls, samples) -> "GossipBatch":
        samples = list(samples)
        sizes = np.array([s.num_nodes for s in samples], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        src = np.concatenate([s.src + o for s, o in zip(samples, offsets)])
        dst = np.concatenate([s.dst + o for s, o in zip(samples, offsets)])
        edge_pair = np.concatenate([np.full(s.src.size, i, dtype=np.int64) for i, s in enumerate(samples)])
        truth = None
        if all(s.truth is not None for s in samples):
            truth = np.concatenate([s.truth for s in samples]).reshape(-1, 1)
        return cls(
            predictions=np.concatenate([s.predictions for s in samples]).reshape(-1, 1),
            query_embeddings=np.stack([s.query_embedding for s in samples]),
            node_pair=np.repeat(np.arange(len(samples)), sizes),
            src=src,
            dst=dst,
            edge_pair=edge_pair,
            upward=np.concatenate([s.upward for s in samples]).reshape(-1, 1),
            num_nodes=int(sizes.sum()),
            truth=truth,
            sizes=sizes,
        )


class GossipModel:
    kind = "gossip"

    def __init__(self, config: GossipConfig = None):
        self.config = config or GossipConfig()
        c = self.config
        rng = np.random.default_rng(c.seed)
        p = self.params = ag.ParamStore()
        self.in_w = p.add("in.w", ag.glorot(rng, 1, c.hidden))
        self.in_b = p.add("in.b", np.zeros((1, c.hidden)))
        self.layers = []
        dim = c.hidden + c.query_dim
        for k in range(c.layers):
            self.layers.append({
                "self": p.add(f"gnn.{k}.w_self", ag.glorot(rng, dim, c.hidden)),
                "msg": p.add(f"gnn.{k}.w_msg", ag.glorot(rng, dim, c.hidden)),
                "msg_b": p.add(f"gnn.{k}.b_msg", np.zeros((1, c.hidden))),
                "bias": p.add(f"gnn.{k}.bias", np.zeros((1, c.hidden))),
            })
            dim = c.hidden
        self.gate_w1 = p.add("gate.w1", ag.glorot(rng, c.query_dim, c.gate_hidden))
        self.gate_b1 = p.add("gate.b1", np.zeros((1, c.gate_hidden)))
        self.gate_w2 = p.add("gate.w2", ag.glorot(rng, c.gate_hidden, c.layers))
        self.gate_b2 = p.add("gate.b2", np.zeros((1, c.layers)))
        # zero readout: an untrained model returns its input unchanged
        self.out_w = p.add("out.w", np.zeros((c.hidden, 1)))
        self.out_b = p.add("out.b", np.zeros((1, 1)))

    def gates(self, query_embeddings) -> ag.Tensor:
        q = ag.Tensor(np.atleast_2d(query_embeddings))
        if q.shape[1] != self.config.query_dim:
            raise ag.ShapeError(f"query embedding width {q.shape[1]} != {self.config.query_dim}")
        h = ag.leaky_relu(ag.add(q @ self.gate_w1, self.gate_b1))
        return ag.sigmoid(ag.add(h @ self.gate_w2, self.gate_b2))

    def message_weights(self, batch: GossipBatch) -> list:
        """Per-layer (E, 1) weights of the directed edges: P toward the larger index, 1 - P otherwise."""
        gates = self.gates(batch.query_embeddings)
        down = 1.0 - batch.upward
        slope = 2.0 * batch.upward - 1.0
        out = []
        for k in range(self.config.layers):
            select = np.zeros((self.config.layers, 1))
            select[k] = 1.0
            p_edge = ag.gather_rows(gates @ select, batch.edge_pair)
            out.append(ag.add(ag.mul(p_edge, slope), down))
        return out

    def forward(self, batch: GossipBatch) -> ag.Tensor:
        """Raw refined values, shape (N, 1)."""
        pred = ag.Tensor(batch.predictions)
        h = ag.concat([
            ag.add(pred @ self.in_w, self.in_b),
            ag.gather_rows(ag.Tensor(batch.query_embeddings), batch.node_pair),
        ])
        weights = self.message_weights(batch)
        for layer, weight in zip(self.layers, weights):
            msg = ag.leaky_relu(ag.add(ag.gather_rows(h, batch.src) @ layer["msg"], layer["msg_b"]))
            agg = ag.scatter_add(ag.mul(msg, weight), batch.dst, batch.num_nodes)
            h = ag.leaky_relu(ag.add(ag.add(h @ layer["self"], agg), layer["bias"]))
        return ag.add(pred, ag.add(h @ self.out_w, self.out_b))

    def refine(self, samples) -> list:
        """Clamped refined per-node values for each sample."""
        samples = list(samples)
        if not samples:
            return []
        batch = GossipBatch.build(samples)
        out = np.maximum(self.forward(batch).data.reshape(-1), 0.0)
        return np.split(out, np.cumsum(batch.sizes)[:-1])

    def save(self, path, extra=None) -> None:
        ag.save_checkpoint(path, self.kind, asdict(self.config), self.params, extra)

    @classmethod
    def load(cls, path) -> "GossipModel":
        doc = ag.load_checkpoint(path)
        if doc["kind"] != cls.kind:
            raise ValueError(f"{path}: expected a {cls.kind} checkpoint, got {doc['kind']}")
        model = cls(GossipConfig(**doc["hyperparameters"]))
        model.params.load_state(doc["state"])
        return model


def gate_values(model: GossipModel, query_embedding) -> np.ndarray:
    """One gate value per message-passing layer."""
    return model.gates(np.asarray(query_embedding).reshape(1, -1)).data[0].copy()


def gossip_forward(model: GossipModel, target: Graph, predictions, query_embedding) -> np.ndarray:
    sample = GossipSample.build(target, predictions, query_embedding)
    return model.refine([sample])[0]


def build_samples(nb_model, targets, queries, d, truths=None, neighborhoods=None) -> list:
    """Gossip inputs for every (target, query) using a frozen neighborhood model.

    ``truths[i]`` is the (num_nodes, num_queries) canonical-count matrix of
    target ``i``; ``neighborhoods[i]`` optionally reuses precomputed partitions.
    """
    q_emb = nb_model.query_embeddings(queries)
    samples = []
    for t, g in enumerate(targets):
        nbs = neighborhoods[t] if neighborhoods is not None else partition_all(g, d)
        preds = nb_model.predict_matrix(nbs, queries)
        for q in range(len(queries)):
            truth = None if truths is None else np.asarray(truths[t])[:, q]
            samples.append(GossipSample.build(g, preds[:, q], q_emb[q], truth, target_id=t, query_id=q))
    return samples


@dataclass
class GossipTrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0


def train_gossip(model: GossipModel, samples, config: GossipTrainConfig = None):
    """Per-node SmoothL1 against canonical counts; returns ``(model, losses)``."""
    config = config or GossipTrainConfig()
    samples = [s for s in samples if s.num_nodes > 0]
    if not samples:
        raise ValueError("no gossip training samples")
    if any(s.truth is None for s in samples):
        raise ValueError("gossip training needs ground-truth counts on every sample")
    rng = np.random.default_rng(config.seed)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        total, batches = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = GossipBatch.build(samples[i] for i in order[start : start + config.batch_size])
            model.params.zero_grad()
            loss = ag.smooth_l1_loss(model.forward(batch), batch.truth)
            value = float(loss.data[0, 0])
            if not np.isfinite(value):
                raise ag.NonFiniteError(f"non-finite gossip loss at epoch {epoch}")
            loss.backward()
            ag.adam_step(model.params, model.params.grads(), config.lr)
            total += value
            batches += 1
        losses.append(total / batches)
        log.info("gossip epoch %d loss %.6f", epoch, losses[-1])
    return model, losses


# ---------------------------------------------------------------------------
# inductive-bias diagnostics


def homophily_ratio(target: Graph, values) -> float:
    """Fraction of edges whose endpoints carry equal integer values."""
    if target.num_edges == 0:
        raise ValueError("homophily ratio needs at least one edge")
    values = np.asarray(values)
    if not np.issubdtype(values.dtype, np.integer):
        if not np.all(values == np.round(values)):
            raise ValueError("homophily ratio is defined on integer values only")
        values = values.astype(np.int64)
    same = sum(1 for u, v in target.edges if values[u] == values[v])
    return same / target.num_edges


def index_count_correlation(indices, values) -> float:
    """Pearson r between node index and node value."""
    x = np.asarray(indices, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need at least two aligned (index, value) points")
    if np.var(x) == 0 or np.var(y) == 0:
        raise ValueError("correlation undefined for zero variance")
    xc, yc = x - x.mean(), y - y.mean()
    return float((xc @ yc) / np.sqrt((xc @ xc) * (yc @ yc)))
