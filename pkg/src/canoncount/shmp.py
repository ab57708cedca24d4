"""Neighborhood counting: triangle-typed heterogeneous message passing.

Each layer updates every node as

    x_i <- LeakyReLU(x_i W_self + sum_h (sum_{j in N_h(i)} x_j) W_h + b)

with one weight matrix per edge type h (plain / triangle).  Graph
embeddings are sum-pooled final node states.  Two encoders with the same
shape embed canonical neighborhoods and queries; a two-layer head maps the
concatenated pair to a canonical-count estimate.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .canonical import CanonicalNeighborhood
from .graph import NUM_EDGE_TYPES, Graph, triangle_edge_types

log = logging.getLogger(__name__)

FEATURE_DIM = 2


def initial_features(item) -> np.ndarray:
    """``[1, is_canonical]`` per node; query graphs carry no canonical node."""
    if isinstance(item, CanonicalNeighborhood):
        x = np.zeros((item.num_nodes, FEATURE_DIM))
        x[:, 0] = 1.0
        x[item.canonical_node, 1] = 1.0
        return x
    x = np.zeros((item.num_nodes, FEATURE_DIM))
    x[:, 0] = 1.0
    return x


@dataclass
class EncodedGraph:
    """Arrays needed to run message passing on one graph."""

    num_nodes: int
    features: np.ndarray
    src: np.ndarray  # directed edges, both directions
    dst: np.ndarray
    etype: np.ndarray

    @classmethod
    def from_graph(cls, g: Graph, features=None, edge_types=None) -> "EncodedGraph":
        if edge_types is None:
            edge_types = triangle_edge_types(g)
        if features is None:
            features = initial_features(g)
        src, dst, et = [], [], []
        for u, v in g.edges:
            t = int(edge_types[(u, v)])
            src += [u, v]
            dst += [v, u]
            et += [t, t]
        return cls(
            g.num_nodes,
            np.asarray(features, dtype=np.float64),
            np.asarray(src, dtype=np.int64),
            np.asarray(dst, dtype=np.int64),
            np.asarray(et, dtype=np.int64),
        )

    @classmethod
    def from_neighborhood(cls, nb: CanonicalNeighborhood) -> "EncodedGraph":
        return cls.from_graph(nb.graph, initial_features(nb))


@dataclass
class GraphBatch:
    """Disjoint union of several encoded graphs."""

    features: np.ndarray
    adjacency: list  # one sparse (N, N) matrix per edge type, row = receiver
    pool: sp.csr_matrix  # (num_graphs, N)
    graph_of_node: np.ndarray
    num_graphs: int

    @classmethod
    def build(cls, graphs) -> "GraphBatch":
        graphs = list(graphs)
        sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        n = int(sizes.sum())
        feats = np.concatenate([g.features for g in graphs]) if graphs else np.zeros((0, FEATURE_DIM))
        src = np.concatenate([g.src + o for g, o in zip(graphs, offsets)]) if graphs else np.zeros(0, np.int64)
        dst = np.concatenate([g.dst + o for g, o in zip(graphs, offsets)]) if graphs else np.zeros(0, np.int64)
        et = np.concatenate([g.etype for g in graphs]) if graphs else np.zeros(0, np.int64)
        adjacency = []
        for t in range(NUM_EDGE_TYPES):
            sel = et == t
            adjacency.append(
                sp.csr_matrix((np.ones(int(sel.sum())), (dst[sel], src[sel])), shape=(n, n))
            )
        graph_of_node = np.repeat(np.arange(len(graphs)), sizes)
        pool = ag.scatter_matrix(graph_of_node, len(graphs))
        return cls(feats, adjacency, pool, graph_of_node, len(graphs))


class ShmpEncoder:
    def __init__(self, params: ag.ParamStore, prefix: str, in_dim: int, hidden: int, layers: int, rng):
        self.prefix = prefix
        self.layers = []
        dim = in_dim
        for k in range(layers):
            layer = {
                "self": params.add(f"{prefix}.{k}.w_self", ag.glorot(rng, dim, hidden)),
                "edge": [
                    params.add(f"{prefix}.{k}.w_edge{h}", ag.glorot(rng, dim, hidden)) for h in range(NUM_EDGE_TYPES)
                ],
                "bias": params.add(f"{prefix}.{k}.bias", np.zeros((1, hidden))),
            }
            self.layers.append(layer)
            dim = hidden
        self.out_dim = dim

    def tie_edge_types(self) -> None:
        """Make every edge type share the first type's weights (homogeneous message passing)."""
        for layer in self.layers:
            for w in layer["edge"][1:]:
                w.data = layer["edge"][0].data.copy()

    def node_states(self, batch: GraphBatch) -> ag.Tensor:
        x = ag.Tensor(batch.features)
        for layer in self.layers:
            out = ag.add(x @ layer["self"], layer["bias"])
            for adj, w in zip(batch.adjacency, layer["edge"]):
                if adj.nnz:
                    out = ag.add(out, ag.sparse_matmul(adj, x) @ w)
            x = ag.leaky_relu(out)
        return x

    def __call__(self, batch: GraphBatch) -> ag.Tensor:
        return ag.sparse_matmul(batch.pool, self.node_states(batch))


@dataclass
class ShmpConfig:
    layers: int = 4
    hidden: int = 32
    head_hidden: int = 64
    seed: int = 0

    @classmethod
    def paper(cls, seed=0) -> "ShmpConfig":
        return cls(layers=8, hidden=64, head_hidden=256, seed=seed)


class ShmpModel:
    kind = "shmp-neighborhood"

    def __init__(self, config: ShmpConfig = None):
        self.config = config or ShmpConfig()
        c = self.config
        rng = np.random.default_rng(c.seed)
        self.params = ag.ParamStore()
        self.neighborhood_encoder = ShmpEncoder(self.params, "nb", FEATURE_DIM, c.hidden, c.layers, rng)
        self.query_encoder = ShmpEncoder(self.params, "query", FEATURE_DIM, c.hidden, c.layers, rng)
        self.head_w1 = self.params.add("head.w1", ag.glorot(rng, 2 * c.hidden, c.head_hidden))
        self.head_b1 = self.params.add("head.b1", np.zeros((1, c.head_hidden)))
        self.head_w2 = self.params.add("head.w2", ag.glorot(rng, c.head_hidden, 1))
        self.head_b2 = self.params.add("head.b2", np.zeros((1, 1)))

    @property
    def embedding_dim(self) -> int:
        return self.config.hidden

    def embed_neighborhoods(self, batch: GraphBatch) -> ag.Tensor:
        return self.neighborhood_encoder(batch)

    def embed_queries(self, batch: GraphBatch) -> ag.Tensor:
        return self.query_encoder(batch)

    def head(self, nb_emb, q_emb, nb_idx, q_idx) -> ag.Tensor:
        """Raw (unclamped) estimates for pairs ``(nb_idx[i], q_idx[i])``, shape (P, 1)."""
        z = ag.concat([ag.gather_rows(nb_emb, nb_idx), ag.gather_rows(q_emb, q_idx)])
        h = ag.leaky_relu(ag.add(z @ self.head_w1, self.head_b1))
        return ag.add(h @ self.head_w2, self.head_b2)

    def predict_matrix(self, neighborhoods, queries) -> np.ndarray:
        """Clamped estimates for every (neighborhood, query), shape (len(nbs), len(queries))."""
        nbs = [_encode(x) for x in neighborhoods]
        qs = [_encode(q) for q in queries]
        if not nbs or not qs:
            return np.zeros((len(nbs), len(qs)))
        q_emb = self.embed_queries(GraphBatch.build(qs))
        out = []
        for start in range(0, len(nbs), 512):
            chunk = nbs[start : start + 512]
            nb_emb = self.embed_neighborhoods(GraphBatch.build(chunk))
            b, q = len(chunk), len(qs)
            raw = self.head(nb_emb, q_emb, np.repeat(np.arange(b), q), np.tile(np.arange(q), b))
            out.append(raw.data.reshape(b, q))
        return np.maximum(np.concatenate(out), 0.0)

    def query_embeddings(self, queries) -> np.ndarray:
        return self.embed_queries(GraphBatch.build([_encode(q) for q in queries])).data.copy()

    def predict_canonical_count(self, query: Graph, nb: CanonicalNeighborhood) -> float:
        return float(self.predict_matrix([nb], [query])[0, 0])

    def save(self, path, extra=None) -> None:
        ag.save_checkpoint(path, self.kind, asdict(self.config), self.params, extra)

    @classmethod
    def load(cls, path) -> "ShmpModel":
        doc = ag.load_checkpoint(path)
        if doc["kind"] != cls.kind:
            raise ValueError(f"{path}: expected a {cls.kind} checkpoint, got {doc['kind']}")
        model = cls(ShmpConfig(**doc["hyperparameters"]))
        model.params.load_state(doc["state"])
        return model


def _encode(item) -> EncodedGraph:
    if isinstance(item, EncodedGraph):
        return item
    if isinstance(item, CanonicalNeighborhood):
        return EncodedGraph.from_neighborhood(item)
    return EncodedGraph.from_graph(item)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8


@dataclass
class NeighborhoodDataset:
    """Every neighborhood is paired with every query; ``counts`` is (num_neighborhoods, num_queries)."""

    neighborhoods: list
    queries: list
    counts: np.ndarray
    encoded_neighborhoods: list = field(init=False)
    encoded_queries: list = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.shape != (len(self.neighborhoods), len(self.queries)):
            raise ValueError(
                f"counts shape {self.counts.shape} != ({len(self.neighborhoods)}, {len(self.queries)})"
            )
        self.encoded_neighborhoods = [_encode(nb) for nb in self.neighborhoods]
        self.encoded_queries = [_encode(q) for q in self.queries]

    def __len__(self):
        return len(self.neighborhoods)


def batch_loss(model: ShmpModel, data: NeighborhoodDataset, rows, query_batch=None) -> ag.Tensor:
    if query_batch is None:
        query_batch = GraphBatch.build(data.encoded_queries)
    q_emb = model.embed_queries(query_batch)
    nb_emb = model.embed_neighborhoods(GraphBatch.build([data.encoded_neighborhoods[i] for i in rows]))
    b, q = len(rows), len(data.queries)
    raw = model.head(nb_emb, q_emb, np.repeat(np.arange(b), q), np.tile(np.arange(q), b))
    return ag.smooth_l1_loss(raw, data.counts[rows].reshape(-1, 1))


def train_neighborhood(model: ShmpModel, data: NeighborhoodDataset, config: TrainConfig = None):
    """Mini-batch Adam on mean SmoothL1 over all (neighborhood, query) pairs.

    Returns ``(model, losses)`` where ``losses[e]`` is the mean batch loss of
    epoch ``e``.
    """
    config = config or TrainConfig()
    if len(data) == 0:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    query_batch = GraphBatch.build(data.encoded_queries)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total, batches = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            rows = order[start : start + config.batch_size]
            model.params.zero_grad()
            loss = batch_loss(model, data, rows, query_batch)
            value = float(loss.data[0, 0])
            if not np.isfinite(value):
                raise ag.NonFiniteError(f"non-finite loss at epoch {epoch}, batch {batches}")
            loss.backward()
            ag.adam_step(model.params, model.params.grads(), config.lr, config.betas, config.eps)
            total += value
            batches += 1
        losses.append(total / batches)
        log.info("neighborhood epoch %d loss %.6f", epoch, losses[-1])
    return model, losses
