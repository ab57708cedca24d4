"""Undirected simple graphs with an explicit node-index permutation.

The node index is what breaks symmetry for canonical counting: every node
keeps its stable integer id, and ``node_index[v]`` gives its position in the
canonical ordering.  Ids are used for joining tables, indices for ordering.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np

MAX_ISO_NODES = 16
MAX_QUERY_SIZE = 7


class GraphFormatError(ValueError):
    """Malformed edge-list input; the message carries the line number."""


class GraphBoundError(ValueError):
    """A tool bound (graph size, query size) was exceeded."""


class DisconnectedGraphError(ValueError):
    pass


def _normalize_edges(num_nodes, edges):
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ValueError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")
        if u == v:
            raise ValueError(f"self-loop on node {u}")
        e = (u, v) if u < v else (v, u)
        if e in seen:
            raise ValueError(f"duplicate edge {e}")
        seen.add(e)
    return tuple(sorted(seen))


@dataclass(frozen=True)
class Graph:
    num_nodes: int
    edges: tuple = ()
    node_index: tuple = field(default=None)

    def __post_init__(self):
        if self.num_nodes < 0:
            raise ValueError("num_nodes must be non-negative")
        object.__setattr__(self, "edges", _normalize_edges(self.num_nodes, self.edges))
        if self.node_index is None:
            object.__setattr__(self, "node_index", tuple(range(self.num_nodes)))
        else:
            idx = tuple(int(i) for i in self.node_index)
            if sorted(idx) != list(range(self.num_nodes)):
                raise ValueError("node_index must be a permutation of 0..num_nodes-1")
            object.__setattr__(self, "node_index", idx)

    @classmethod
    def from_edges(cls, edges, num_nodes=None, node_index=None) -> "Graph":
        edges = list(edges)
        if num_nodes is None:
            num_nodes = 1 + max((max(e) for e in edges), default=-1)
        return cls(num_nodes, tuple(edges), node_index)

    @cached_property
    def adj(self) -> tuple:
        """Neighbor sets indexed by node id."""
        nbrs = [set() for _ in range(self.num_nodes)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return tuple(frozenset(s) for s in nbrs)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> list:
        return [len(a) for a in self.adj]

    def with_index(self, node_index) -> "Graph":
        return Graph(self.num_nodes, self.edges, tuple(node_index))

    def induced(self, nodes) -> tuple:
        """Induced subgraph on ``nodes`` (in the given order).

        Returns ``(subgraph, origin)`` where ``origin[local] = target id``.
        Node indices of the subgraph are the rank order of the original
        indices, so relative ordering is preserved.
        """
        origin = list(nodes)
        local = {v: i for i, v in enumerate(origin)}
        sub_edges = []
        for v in origin:
            lv = local[v]
            for u in self.adj[v]:
                lu = local.get(u)
                if lu is not None and lv < lu:
                    sub_edges.append((lv, lu))
        ranks = np.argsort(np.argsort([self.node_index[v] for v in origin], kind="stable"), kind="stable")
        return Graph(len(origin), tuple(sub_edges), tuple(int(r) for r in ranks)), tuple(origin)

    def relabel(self, perm) -> "Graph":
        """Move node ``v`` to id ``perm[v]``, carrying its node_index along."""
        new_index = [0] * self.num_nodes
        for v in range(self.num_nodes):
            new_index[perm[v]] = self.node_index[v]
        return Graph(
            self.num_nodes,
            tuple((perm[u], perm[v]) for u, v in self.edges),
            tuple(new_index),
        )

    def is_connected(self) -> bool:
        if self.num_nodes == 0:
            return True
        return len(bfs_distances(self, 0)) == self.num_nodes


def bfs_distances(g: Graph, source: int) -> dict:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for u in g.adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


# ---------------------------------------------------------------------------
# Edge-list I/O


def parse_edge_list(text: str, source: str = "<string>") -> Graph:
    header = None
    edges = []
    seen = set()
    n = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise GraphFormatError(f"{source}:{lineno}: header must be 'n m'")
            try:
                n, m = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{source}:{lineno}: header must be two integers") from None
            if n < 0 or m < 0:
                raise GraphFormatError(f"{source}:{lineno}: negative header value")
            header = (n, m)
            continue
        if len(parts) != 2:
            raise GraphFormatError(f"{source}:{lineno}: expected 'u v'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"{source}:{lineno}: endpoints must be integers") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"{source}:{lineno}: endpoint out of range [0, {n})")
        if u == v:
            raise GraphFormatError(f"{source}:{lineno}: self-loop on node {u}")
        e = (min(u, v), max(u, v))
        if e in seen:
            raise GraphFormatError(f"{source}:{lineno}: duplicate edge {e}")
        seen.add(e)
        edges.append(e)
    if header is None:
        raise GraphFormatError(f"{source}: missing header")
    if len(edges) != header[1]:
        raise GraphFormatError(f"{source}: header declares {header[1]} edges, found {len(edges)}")
    return Graph(header[0], tuple(edges))


def load_graph(path, format: str = "edge-list") -> Graph:
    if format != "edge-list":
        raise ValueError(f"unsupported format {format!r}")
    path = Path(path)
    return parse_edge_list(path.read_text(), source=str(path))


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.num_nodes} {g.num_edges}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g))


# ---------------------------------------------------------------------------
# Index assignment


def assign_indices(g: Graph, seed: int) -> Graph:
    """Return ``g`` with a uniformly random node_index permutation drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(g.num_nodes)
    return g.with_index(int(i) for i in perm)


# ---------------------------------------------------------------------------
# Isomorphism


def _invariant(g: Graph):
    return (g.num_nodes, g.num_edges, tuple(sorted(g.degrees())))


def is_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Backtracking isomorphism test with degree pruning; node indices are ignored."""
    if g1.num_nodes > MAX_ISO_NODES or g2.num_nodes > MAX_ISO_NODES:
        raise GraphBoundError(f"is_isomorphic supports at most {MAX_ISO_NODES} nodes")
    if _invariant(g1) != _invariant(g2):
        return False
    n = g1.num_nodes
    if n == 0:
        return True
    adj1, adj2 = g1.adj, g2.adj
    deg1, deg2 = g1.degrees(), g2.degrees()

    # order g1 nodes so each new node is adjacent to already-placed ones when possible
    order = []
    placed = set()
    for start in sorted(range(n), key=lambda v: -deg1[v]):
        if start in placed:
            continue
        queue = deque([start])
        placed.add(start)
        while queue:
            v = queue.popleft()
            order.append(v)
            for u in sorted(adj1[v], key=lambda u: -deg1[u]):
                if u not in placed:
                    placed.add(u)
                    queue.append(u)

    mapping = {}
    used = set()

    def extend(pos):
        if pos == n:
            return True
        v = order[pos]
        for w in range(n):
            if w in used or deg2[w] != deg1[v]:
                continue
            ok = True
            for u, mu in mapping.items():
                if (u in adj1[v]) != (mu in adj2[w]):
                    ok = False
                    break
            if not ok:
                continue
            mapping[v] = w
            used.add(w)
            if extend(pos + 1):
                return True
            del mapping[v]
            used.discard(w)
        return False

    return extend(0)


# ---------------------------------------------------------------------------
# Query enumeration


@dataclass
class QuerySet:
    graphs: list
    diameters: list

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    @property
    def sizes(self) -> list:
        return [g.num_nodes for g in self.graphs]

    @property
    def max_diameter(self) -> int:
        return max(self.diameters, default=0)

    def save(self, directory) -> None:
        """Write one edge-list file per query plus ``index.csv`` (file, size, diameter)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        rows = ["file,size,diameter"]
        for i, (g, d) in enumerate(zip(self.graphs, self.diameters)):
            name = f"query_{i:03d}.txt"
            save_graph(g, directory / name)
            rows.append(f"{name},{g.num_nodes},{d}")
        (directory / "index.csv").write_text("\n".join(rows) + "\n")

    @classmethod
    def load(cls, directory) -> "QuerySet":
        directory = Path(directory)
        lines = (directory / "index.csv").read_text().splitlines()[1:]
        graphs, diams = [], []
        for line in lines:
            if not line.strip():
                continue
            name, size, diam = line.split(",")
            g = load_graph(directory / name)
            if g.num_nodes != int(size):
                raise GraphFormatError(f"{name}: index.csv size {size} != {g.num_nodes}")
            graphs.append(g)
            diams.append(int(diam))
        return cls(graphs, diams)


def enumerate_queries(min_size: int, max_size: int) -> QuerySet:
    """All connected graphs with ``min_size..max_size`` nodes, one per isomorphism class.

    Brute force over edge subsets.  Order: size, edge count, degree sequence,
    then order of first appearance in the subset enumeration.
    """
    if not (1 <= min_size <= max_size <= MAX_QUERY_SIZE):
        raise GraphBoundError(f"query sizes must satisfy 1 <= min <= max <= {MAX_QUERY_SIZE}")
    graphs = []
    for n in range(min_size, max_size + 1):
        pairs = list(itertools.combinations(range(n), 2))
        buckets = {}
        found = []
        for m in range(n - 1, len(pairs) + 1):
            for chosen in itertools.combinations(pairs, m):
                g = Graph(n, chosen)
                if not g.is_connected():
                    continue
                key = _invariant(g) + (_triangle_profile(g),)
                bucket = buckets.setdefault(key, [])
                if any(is_isomorphic(g, h) for h in bucket):
                    continue
                bucket.append(g)
                found.append(g)
        found.sort(key=lambda g: (g.num_edges, tuple(sorted(g.degrees()))))
        graphs.extend(found)
    return QuerySet(graphs, [diameter(g) for g in graphs])


def _triangle_profile(g: Graph):
    return tuple(sorted(len(g.adj[v] & g.adj[u]) for u, v in g.edges))


# ---------------------------------------------------------------------------
# Edge typing


class EdgeType(IntEnum):
    PLAIN = 0
    TRIANGLE = 1


NUM_EDGE_TYPES = len(EdgeType)


class EdgeTypeMap(dict):
    """Maps normalized edges ``(min, max)`` to an :class:`EdgeType`."""

    def __getitem__(self, edge):
        u, v = edge
        return super().__getitem__((u, v) if u < v else (v, u))

    def __contains__(self, edge):
        u, v = edge
        return super().__contains__((u, v) if u < v else (v, u))


def triangle_edge_types(g: Graph) -> EdgeTypeMap:
    """Label each edge TRIANGLE iff its endpoints share a neighbor.

    Scans the smaller endpoint neighborhood per edge, so the total cost is
    sum over edges of min(deg u, deg v) = O(E^1.5).
    """
    adj = g.adj
    out = EdgeTypeMap()
    for u, v in g.edges:
        a, b = (adj[u], adj[v]) if len(adj[u]) <= len(adj[v]) else (adj[v], adj[u])
        closes = any(w in b for w in a)
        out[(u, v)] = EdgeType.TRIANGLE if closes else EdgeType.PLAIN
    return out


# ---------------------------------------------------------------------------


def diameter(g: Graph) -> int:
    if g.num_nodes == 0:
        raise DisconnectedGraphError("empty graph has no diameter")
    best = 0
    for v in range(g.num_nodes):
        dist = bfs_distances(g, v)
        if len(dist) != g.num_nodes:
            raise DisconnectedGraphError("diameter is undefined for a disconnected graph")
        best = max(best, max(dist.values()))
    return best
