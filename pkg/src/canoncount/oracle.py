"""Exact induced-subgraph counting and canonical counting.

Everything here is the trusted reference for the learned stages, so it
favours plain enumeration over cleverness.  Connected node subsets are
produced by ESU-style recursive extension, which emits every connected
k-subset exactly once (never once per automorphism); each subset is then
classified by one isomorphism test, memoised on its edge pattern.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .canonical import canonical_partition, check_depth, DepthError
from .graph import DisconnectedGraphError, Graph, GraphBoundError, QuerySet, diameter, is_isomorphic

ORACLE_MAX_QUERY = 8
INT64_MAX = 2**63 - 1


class CountOverflowError(OverflowError):
    pass


def _check_query(q: Graph) -> None:
    if q.num_nodes > ORACLE_MAX_QUERY:
        raise GraphBoundError(f"oracle supports queries of at most {ORACLE_MAX_QUERY} nodes")
    if q.num_nodes == 0 or not q.is_connected():
        raise DisconnectedGraphError("query must be a non-empty connected graph")


def extend_subsets(adj, root: int, k: int, allowed):
    """Yield every connected ``k``-subset containing ``root`` whose other members are in ``allowed``.

    ``allowed`` is a container tested with ``in``; each subset is yielded
    once as a tuple in discovery order.
    """
    if k == 1:
        yield (root,)
        return
    closed = {root} | adj[root]
    ext = [u for u in adj[root] if u in allowed]

    def grow(sub, ext, closed):
        if len(sub) == k:
            yield tuple(sub)
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            new_ext = ext + [u for u in adj[w] if u not in closed and u in allowed]
            sub.append(w)
            yield from grow(sub, new_ext, closed | adj[w])
            sub.pop()

    yield from grow([root], ext, closed)


def connected_subsets(g: Graph, k: int):
    """Every connected node subset of size ``k``, each exactly once (rooted at its smallest id)."""
    adj = g.adj
    for v in range(g.num_nodes):
        yield from extend_subsets(adj, v, k, range(v + 1, g.num_nodes))


def _rooted_below(g: Graph, v_c: int, k: int):
    # subsets whose maximum node_index member is v_c
    limit = g.node_index[v_c]
    index = g.node_index
    allowed = {u for u in range(g.num_nodes) if index[u] < limit}
    return extend_subsets(g.adj, v_c, k, allowed)


class PatternClassifier:
    """Maps a node subset of a host graph to the query it induces (or -1)."""

    def __init__(self, queries):
        self.queries = list(queries)
        for q in self.queries:
            _check_query(q)
        self.sizes = sorted({q.num_nodes for q in self.queries})
        self._memo = {}
        self.iso_tests = 0

    def classify(self, adj, nodes) -> int:
        nodes = sorted(nodes)
        k = len(nodes)
        mask = 0
        bit = 0
        for i in range(k):
            ai = adj[nodes[i]]
            for j in range(i + 1, k):
                if nodes[j] in ai:
                    mask |= 1 << bit
                bit += 1
        key = (k, mask)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._resolve(k, mask)
            self._memo[key] = hit
        return hit

    def _resolve(self, k, mask) -> int:
        edges = []
        bit = 0
        for i in range(k):
            for j in range(i + 1, k):
                if mask >> bit & 1:
                    edges.append((i, j))
                bit += 1
        g = Graph(k, tuple(edges))
        for qi, q in enumerate(self.queries):
            if q.num_nodes == k and q.num_edges == len(edges):
                self.iso_tests += 1
                if is_isomorphic(g, q):
                    return qi
        return -1


def _to_int64(values) -> np.ndarray:
    for v in values:
        if v > INT64_MAX:
            raise CountOverflowError(f"count {v} exceeds the 64-bit range")
    return np.asarray(values, dtype=np.int64)


def count_subgraphs(query: Graph, target: Graph) -> int:
    """Number of node subsets of ``target`` whose induced subgraph is isomorphic to ``query``."""
    return int(count_all([query], target)[0])


def count_all(queries, target: Graph) -> np.ndarray:
    clf = PatternClassifier(queries)
    totals = [0] * len(clf.queries)
    for k in clf.sizes:
        for sub in connected_subsets(target, k):
            qi = clf.classify(target.adj, sub)
            if qi >= 0:
                totals[qi] += 1
    return _to_int64(totals)


def canonical_count(query: Graph, target: Graph, v_c: int) -> int:
    """Patterns isomorphic to ``query`` whose largest-index node is ``v_c``."""
    if not 0 <= v_c < target.num_nodes:
        raise IndexError(f"node {v_c} out of range")
    return int(_canonical_counts_at(PatternClassifier([query]), target, v_c)[0])


def _canonical_counts_at(clf: PatternClassifier, g: Graph, v_c: int) -> list:
    out = [0] * len(clf.queries)
    for k in clf.sizes:
        for sub in _rooted_below(g, v_c, k):
            qi = clf.classify(g.adj, sub)
            if qi >= 0:
                out[qi] += 1
    return out


def canonical_counts(queries, target: Graph) -> np.ndarray:
    """Canonical counts on the whole target, shape (num_nodes, num_queries)."""
    clf = queries if isinstance(queries, PatternClassifier) else PatternClassifier(queries)
    rows = [_canonical_counts_at(clf, target, v) for v in range(target.num_nodes)]
    return _to_int64([c for r in rows for c in r]).reshape(target.num_nodes, len(clf.queries))


def neighborhood_counts(clf: PatternClassifier, nb) -> list:
    """Canonical counts of every query at the canonical node of a neighborhood."""
    return _canonical_counts_at(clf, nb.graph, nb.canonical_node)


# ---------------------------------------------------------------------------


@dataclass
class CountTable:
    """Per-node canonical counts keyed by graph id; arrays are (num_nodes, num_queries)."""

    num_queries: int
    counts: dict = field(default_factory=dict)

    def add(self, graph_id: int, values) -> None:
        values = np.asarray(values)
        if values.ndim != 2 or values.shape[1] != self.num_queries:
            raise ValueError(f"expected shape (n, {self.num_queries}), got {values.shape}")
        self.counts[int(graph_id)] = values

    @property
    def is_integer(self) -> bool:
        return all(np.issubdtype(v.dtype, np.integer) for v in self.counts.values())

    def totals(self) -> dict:
        return {gid: arr.sum(axis=0) for gid, arr in self.counts.items()}

    def _fmt(self, x) -> str:
        if isinstance(x, (np.integer, int)):
            return str(int(x))
        return repr(float(x))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["graph_id", "node_id", "query_id", "count"])
            for gid in sorted(self.counts):
                arr = self.counts[gid]
                for v in range(arr.shape[0]):
                    for q in range(arr.shape[1]):
                        w.writerow([gid, v, q, self._fmt(arr[v, q])])

    def totals_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["graph_id", "query_id", "total"])
            for gid, tot in sorted(self.totals().items()):
                for q, t in enumerate(tot):
                    w.writerow([gid, q, self._fmt(t)])

    @classmethod
    def from_csv(cls, path) -> "CountTable":
        cells = {}
        integer = True
        num_queries = 0
        with open(path, newline="") as fh:
            r = csv.DictReader(fh)
            if r.fieldnames != ["graph_id", "node_id", "query_id", "count"]:
                raise ValueError(f"{path}: unexpected header {r.fieldnames}")
            for row in r:
                raw = row["count"]
                try:
                    val = int(raw)
                except ValueError:
                    val = float(raw)
                    integer = False
                gid, v, q = int(row["graph_id"]), int(row["node_id"]), int(row["query_id"])
                cells.setdefault(gid, {})[(v, q)] = val
                num_queries = max(num_queries, q + 1)
        table = cls(num_queries)
        for gid, cell in cells.items():
            n = 1 + max(v for v, _ in cell)
            arr = np.zeros((n, num_queries), dtype=np.int64 if integer else np.float64)
            for (v, q), val in cell.items():
                arr[v, q] = val
            table.add(gid, arr)
        return table


def read_totals_csv(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[(int(row["graph_id"]), int(row["query_id"]))] = float(row["total"])
    return out


def ground_truth_counts(queries, target: Graph, d: int, neighborhoods=None) -> np.ndarray:
    """Canonical counts computed inside each canonical neighborhood, shape (num_nodes, num_queries)."""
    qs = list(queries)
    max_diam = queries.max_diameter if isinstance(queries, QuerySet) else max((diameter(q) for q in qs), default=0)
    check_depth(d, max_diam)
    clf = PatternClassifier(qs)
    if neighborhoods is None:
        neighborhoods = [canonical_partition(target, v, d) for v in range(target.num_nodes)]
    rows = [neighborhood_counts(clf, nb) for nb in neighborhoods]
    flat = [c for r in rows for c in r]
    return _to_int64(flat).reshape(target.num_nodes, len(qs))


def ground_truth_table(queries, target: Graph, d: int, graph_id: int = 0) -> CountTable:
    table = CountTable(len(queries))
    table.add(graph_id, ground_truth_counts(queries, target, d))
    return table


def verify_decomposition(query: Graph, target: Graph, d: int) -> bool:
    """Check both decomposition identities for one (query, target) pair."""
    _check_query(query)
    diam = diameter(query)
    if d < diam:
        raise DepthError(f"depth {d} < query diameter {diam}")
    clf = PatternClassifier([query])
    total = int(count_all([query], target)[0])
    whole = sum(_canonical_counts_at(clf, target, v)[0] for v in range(target.num_nodes))
    local = sum(neighborhood_counts(clf, canonical_partition(target, v, d))[0] for v in range(target.num_nodes))
    return total == whole == local
