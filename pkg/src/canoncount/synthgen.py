"""Synthetic target-graph generation from (node count, edge count) jobs.

Each job is handed to one of six generators whose parameters are chosen so
the expected edge count matches the job.  ER, WS, BA and G(n, m) use
networkx; the extended BA and power-law-cluster generators are local
implementations whose edge expectations follow the parameter formulas
below.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .graph import Graph, assign_indices, save_graph

GENERATORS = ("ER", "WS", "ExtBA", "PLCluster", "BA", "GnmRandom")
WS_REWIRE = 0.1
EXTBA_Q = 0.1
EXTBA_EPS = 0.01


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GenJob:
    n: int
    m: int
    generator: str
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("job needs at least one node")
        if not 0 <= self.m <= self.n * (self.n - 1) // 2:
            raise ValueError(f"edge count {self.m} impossible for {self.n} nodes")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")


@dataclass
class DatasetSpec:
    count_small: int = 1380
    node_range_small: tuple = (10, 59)
    degree_range_small: tuple = (1.0, 12.0)
    count_large: int = 447
    node_range_large: tuple = (60, 800)
    degree_range_large: tuple = (1.0, 3.0)

    @classmethod
    def desk(cls) -> "DatasetSpec":
        return cls(200, (10, 30), (1.0, 6.0), 0, (60, 800), (1.0, 3.0))

    @classmethod
    def named(cls, name: str) -> "DatasetSpec":
        if name == "default":
            return cls()
        if name == "desk":
            return cls.desk()
        raise ValueError(f"unknown dataset spec {name!r} (expected 'default' or 'desk')")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        d = dict(d)
        for k in ("node_range_small", "degree_range_small", "node_range_large", "degree_range_large"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from the given parts (sha256 of their ':'-joined text)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _edges_for(n: int, degree: float) -> int:
    m = int(round(n * degree / 2))
    return max(0, min(m, n * (n - 1) // 2))


def generate_jobs(spec: DatasetSpec, seed: int) -> list:
    """Jobs sampled uniformly: integer node counts, real-valued average degrees."""
    rng = np.random.default_rng(derive_seed("jobs", seed))
    jobs = []
    for count, (lo, hi), (dlo, dhi) in (
        (spec.count_small, spec.node_range_small, spec.degree_range_small),
        (spec.count_large, spec.node_range_large, spec.degree_range_large),
    ):
        if count and (lo > hi or dlo > dhi):
            raise ValueError("empty sampling range")
        for _ in range(count):
            n = int(rng.integers(lo, hi + 1))
            deg = float(rng.uniform(dlo, dhi))
            gen = GENERATORS[int(rng.integers(len(GENERATORS)))]
            jobs.append(GenJob(n, _edges_for(n, deg), gen, derive_seed(seed, len(jobs))))
    return jobs


# ---------------------------------------------------------------------------
# parameter formulas


def er_params(n: int, m: int) -> float:
    if n < 2:
        raise GeneratorError("ER needs n >= 2")
    return min(1.0, max(0.0, 2.0 * m / (n * (n - 1))))


def ws_params(n: int, m: int) -> tuple:
    """Ring degree k = round(2m/n) (half to even), bumped to even and at least 2."""
    if n < 3:
        raise GeneratorError("WS needs n >= 3")
    k = round(2.0 * m / n)
    if k % 2:
        k += 1
    k = max(k, 2)
    top = n - 1 if (n - 1) % 2 == 0 else n - 2
    return min(k, top), WS_REWIRE


def extba_params(n: int, m: int) -> tuple:
    if n < 2:
        raise GeneratorError("extended BA needs n >= 2")
    attach = m // n
    p = (m - attach * n) / n
    p = min(max(p, 0.0), 1.0 - EXTBA_Q - EXTBA_EPS)
    return attach, p, EXTBA_Q


def pl_params(n: int, m: int) -> tuple:
    disc = n * n - 4 * m
    if disc < 0:
        raise GeneratorError(f"power-law cluster formula undefined for n={n}, m={m}")
    k = int(math.floor((n - math.sqrt(disc)) / 2))
    if k < 2 or k >= n:
        raise GeneratorError(f"power-law cluster needs 2 <= k < n, got k={k}")
    p = (m - (n - k) * k) / ((k - 1) * (n - k))
    return k, min(max(p, 0.0), 1.0)


# ---------------------------------------------------------------------------
# local generators


def _pick(rng, nodes, weights):
    w = np.asarray(weights, dtype=np.float64)
    return nodes[int(rng.choice(len(nodes), p=w / w.sum()))]


def extended_ba(n: int, attach: int, p: float, q: float, rng) -> nx.Graph:
    """Growth with preferential attachment plus random extra links and rewiring.

    Starts from ``attach + 1`` isolated nodes.  Each remaining node joins
    with ``attach`` preferential links; before each arrival, with probability
    ``p`` one extra preferential link is added between existing nodes and
    with probability ``q`` one existing link is rewired.  Expected edges are
    about ``n * (attach + p)``.
    """
    g = nx.empty_graph(min(n, attach + 1))
    for new in range(g.number_of_nodes(), n):
        nodes = list(g.nodes)
        weights = [g.degree(v) + 1 for v in nodes]
        r = rng.random()
        if r < p and len(nodes) >= 2:
            u = _pick(rng, nodes, weights)
            cand = [v for v in nodes if v != u and not g.has_edge(u, v)]
            if cand:
                g.add_edge(u, _pick(rng, cand, [g.degree(v) + 1 for v in cand]))
        elif r < p + q and g.number_of_edges():
            edges = sorted(g.edges)
            u, v = edges[int(rng.integers(len(edges)))]
            cand = [w for w in nodes if w not in (u, v) and not g.has_edge(u, w)]
            if cand:
                g.remove_edge(u, v)
                g.add_edge(u, _pick(rng, cand, [g.degree(w) + 1 for w in cand]))
        g.add_node(new)
        targets = set()
        pool = [v for v in nodes]
        while len(targets) < min(attach, len(pool)):
            cand = [v for v in pool if v not in targets]
            targets.add(_pick(rng, cand, [g.degree(v) + 1 for v in cand]))
        g.add_edges_from((new, t) for t in targets)
    return g


def powerlaw_cluster(n: int, k: int, p: float, rng) -> nx.Graph:
    """Preferential attachment with triad closure.

    Starts from ``k`` isolated nodes; every new node makes ``k`` preferential
    links and, after each link beyond the first, with probability ``p`` also
    links to a random neighbor of that link's endpoint (closing a triangle).
    Expected edges ``(n - k) * k + p * (k - 1) * (n - k)``.
    """
    g = nx.empty_graph(k)
    for new in range(k, n):
        nodes = list(g.nodes)
        chosen = []
        while len(chosen) < k:
            cand = [v for v in nodes if v not in chosen]
            chosen.append(_pick(rng, cand, [g.degree(v) + 1 for v in cand]))
        g.add_node(new)
        for i, t in enumerate(chosen):
            g.add_edge(new, t)
            if i > 0 and rng.random() < p:
                tri = sorted(v for v in g.neighbors(t) if v != new and not g.has_edge(new, v))
                if tri:
                    g.add_edge(new, tri[int(rng.integers(len(tri)))])
    return g


def _from_nx(g: nx.Graph, n: int) -> Graph:
    edges = {(min(u, v), max(u, v)) for u, v in g.edges if u != v}
    return Graph(n, tuple(sorted(edges)))


def generate_graph(job: GenJob) -> tuple:
    """Build the graph for ``job``; returns ``(graph, generator actually used)``."""
    n, m, seed = job.n, job.m, job.seed
    gen = job.generator
    if n < 3 and gen in ("WS", "ER", "ExtBA", "BA", "PLCluster"):
        gen = "GnmRandom"
    if gen == "PLCluster":
        try:
            k, p = pl_params(n, m)
        except GeneratorError:
            gen = "GnmRandom"
    rng = np.random.default_rng(seed)
    if gen == "ER":
        g = nx.gnp_random_graph(n, er_params(n, m), seed=seed)
    elif gen == "WS":
        k, p = ws_params(n, m)
        g = nx.watts_strogatz_graph(n, k, p, seed=seed)
    elif gen == "ExtBA":
        attach, p, q = extba_params(n, m)
        g = extended_ba(n, attach, p, q, rng)
    elif gen == "PLCluster":
        g = powerlaw_cluster(n, k, p, rng)
    elif gen == "BA":
        attach = min(max(1, round(m / n)), n - 1)
        g = nx.barabasi_albert_graph(n, attach, seed=seed)
    else:
        g = nx.gnm_random_graph(n, m, seed=seed)
    return _from_nx(g, n), gen


# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    graphs: list
    jobs: list
    manifest: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.graphs)


def generate_dataset(spec: DatasetSpec, seed: int) -> Dataset:
    jobs = generate_jobs(spec, seed)
    graphs, entries = [], []
    for i, job in enumerate(jobs):
        g, used = generate_graph(job)
        index_seed = derive_seed(seed, i, "index")
        graphs.append(assign_indices(g, index_seed))
        entries.append({
            "id": i,
            "file": f"graphs/{i}.txt",
            "job": asdict(job),
            "generator_used": used,
            "index_seed": index_seed,
            "num_nodes": g.num_nodes,
            "num_edges": g.num_edges,
        })
    manifest = {
        "format": "canoncount-dataset",
        "version": 1,
        "seed": seed,
        "spec": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(spec).items()},
        "graphs": entries,
    }
    return Dataset(graphs, jobs, manifest)


def write_dataset(ds: Dataset, directory) -> None:
    directory = Path(directory)
    (directory / "graphs").mkdir(parents=True, exist_ok=True)
    for g, entry in zip(ds.graphs, ds.manifest["graphs"]):
        save_graph(g, directory / entry["file"])
    (directory / "manifest.json").write_text(json.dumps(ds.manifest, indent=1) + "\n")


def read_dataset(directory) -> Dataset:
    """Load graphs listed in ``manifest.json`` and re-apply their recorded node indices."""
    from .graph import load_graph

    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    graphs, jobs = [], []
    for entry in manifest["graphs"]:
        g = load_graph(directory / entry["file"])
        graphs.append(assign_indices(g, entry["index_seed"]))
        jobs.append(GenJob(**entry["job"]))
    return Dataset(graphs, jobs, manifest)
