"""1-WL colour refinement and the WL-vs-triangle-typed-passing study on regular graphs."""
from __future__ import annotations

import csv
import hashlib
import itertools
from collections import Counter

from .graph import EdgeType, Graph, is_isomorphic, triangle_edge_types

MAX_STUDY_SIZE = 8


def _h(obj) -> str:
    return hashlib.sha1(repr(obj).encode()).hexdigest()[:16]


def wl_refinement(g: Graph, rounds: int = None) -> Counter:
    """Colour histogram after ``rounds`` of 1-WL refinement (default: num_nodes).

    Colours are content hashes, so histograms of different graphs are
    comparable when refined for the same number of rounds.
    """
    if rounds is None:
        rounds = g.num_nodes
    # n rounds always reach the stable partition; a fixed count keeps hashes comparable
    colors = ["0"] * g.num_nodes
    for _ in range(rounds):
        colors = [_h((colors[v], tuple(sorted(colors[u] for u in g.adj[v])))) for v in range(g.num_nodes)]
    return Counter(colors)


def wl_equivalent(g1: Graph, g2: Graph) -> bool:
    rounds = max(g1.num_nodes, g2.num_nodes)
    return wl_refinement(g1, rounds) == wl_refinement(g2, rounds)


def triangle_degree_histogram(g: Graph) -> Counter:
    """Histogram of per-node (triangle-edge degree, plain-edge degree): one typed message-passing layer."""
    types = triangle_edge_types(g)
    per_node = [[0, 0] for _ in range(g.num_nodes)]
    for (u, v), t in types.items():
        slot = 0 if t == EdgeType.TRIANGLE else 1
        per_node[u][slot] += 1
        per_node[v][slot] += 1
    return Counter(tuple(x) for x in per_node)


def shmp_equivalent(g1: Graph, g2: Graph) -> bool:
    return wl_equivalent(g1, g2) and triangle_degree_histogram(g1) == triangle_degree_histogram(g2)


def _graph_key(g: Graph):
    tri = triangle_degree_histogram(g)
    return (g.num_nodes, g.num_edges, tuple(sorted(tri.items())))


def regular_graphs(n: int, d: int, connected: bool = True) -> list:
    """All ``d``-regular graphs on ``n`` nodes up to isomorphism.

    Backtracking over neighbor choices, with node 0 fixed adjacent to
    1..d (every regular graph has such a labelling), then isomorphism dedup.
    """
    if n * d % 2 or d >= n or d < 0:
        return []
    deficit = [d] * n
    adj = [set() for _ in range(n)]
    found = {}

    def emit():
        edges = tuple((u, v) for u in range(n) for v in adj[u] if u < v)
        g = Graph(n, edges)
        if connected and not g.is_connected():
            return
        bucket = found.setdefault(_graph_key(g), [])
        if not any(is_isomorphic(g, h) for h in bucket):
            bucket.append(g)

    def place(v):
        while v < n and deficit[v] == 0:
            v += 1
        if v == n:
            emit()
            return
        cands = [u for u in range(v + 1, n) if deficit[u] > 0 and u not in adj[v]]
        need = deficit[v]
        for chosen in itertools.combinations(cands, need):
            for u in chosen:
                adj[v].add(u)
                adj[u].add(v)
                deficit[u] -= 1
            deficit[v] = 0
            place(v + 1)
            deficit[v] = need
            for u in chosen:
                adj[v].discard(u)
                adj[u].discard(v)
                deficit[u] += 1

    for u in range(1, d + 1):
        adj[0].add(u)
        adj[u].add(0)
        deficit[u] -= 1
    deficit[0] = 0
    place(1)
    out = [g for bucket in found.values() for g in bucket]
    out.sort(key=lambda g: (g.num_edges, g.edges))
    return out


def connected_regular_graphs(n: int) -> list:
    return [g for d in range(1, n) for g in regular_graphs(n, d)]


def shmp_distinguishability_study(graphs_by_size: dict) -> list:
    """Rows of (size, graphs, pairs, WL-indistinguishable, SHMP-indistinguishable, error reduction)."""
    rows = []
    for size in sorted(graphs_by_size):
        graphs = graphs_by_size[size]
        pairs = list(itertools.combinations(range(len(graphs)), 2))
        wl = [p for p in pairs if wl_equivalent(graphs[p[0]], graphs[p[1]])]
        shmp = [p for p in wl if shmp_equivalent(graphs[p[0]], graphs[p[1]])]
        reduction = (1 - len(shmp) / len(wl)) if wl else None
        rows.append({
            "size": size,
            "num_graphs": len(graphs),
            "num_pairs": len(pairs),
            "wl_indistinguishable": len(wl),
            "shmp_indistinguishable": len(shmp),
            "error_reduction": reduction,
        })
    return rows


def builtin_study(max_size: int = MAX_STUDY_SIZE, min_size: int = 6) -> list:
    if max_size > MAX_STUDY_SIZE:
        raise ValueError(f"built-in enumeration covers sizes up to {MAX_STUDY_SIZE}; pass graph files for larger sizes")
    return shmp_distinguishability_study({n: connected_regular_graphs(n) for n in range(min_size, max_size + 1)})


def write_study_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph_size", "number_of_graphs", "number_of_graph_pairs",
                    "wl_indistinguishable", "shmp_indistinguishable", "error_reduction"])
        for r in rows:
            red = "" if r["error_reduction"] is None else f"{100 * r['error_reduction']:.1f}%"
            w.writerow([r["size"], r["num_graphs"], r["num_pairs"],
                        r["wl_indistinguishable"], r["shmp_indistinguishable"], red])
