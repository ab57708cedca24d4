"""Canonical partition: index-restricted BFS neighborhoods."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .graph import Graph, save_graph

DEFAULT_DEPTH = 4


class DepthError(ValueError):
    """Depth is too small for the query set (d must cover every query diameter)."""


@dataclass(frozen=True)
class CanonicalNeighborhood:
    graph: Graph
    canonical_node: int
    origin: tuple
    depth: int

    @property
    def target_node(self) -> int:
        return self.origin[self.canonical_node]

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes


def check_depth(d: int, max_query_diameter: int) -> None:
    if d < max_query_diameter:
        raise DepthError(
            f"depth {d} is smaller than the maximum query diameter {max_query_diameter}; "
            "neighborhoods would miss patterns"
        )


def restricted_bfs(g: Graph, v_c: int, d: int) -> list:
    """Node ids reached from ``v_c`` in at most ``d`` steps through nodes of index <= index(v_c).

    Returned in visit order, ``v_c`` first.
    """
    if not 0 <= v_c < g.num_nodes:
        raise IndexError(f"node {v_c} out of range for graph with {g.num_nodes} nodes")
    if d < 0:
        raise ValueError("depth must be non-negative")
    limit = g.node_index[v_c]
    index = g.node_index
    visited = {v_c}
    order = [v_c]
    frontier = [v_c]
    for _ in range(d):
        nxt = []
        for v in frontier:
            for u in sorted(g.adj[v]):
                if u not in visited and index[u] <= limit:
                    visited.add(u)
                    nxt.append(u)
        if not nxt:
            break
        order.extend(nxt)
        frontier = nxt
    return order


def canonical_partition(g: Graph, v_c: int, d: int = DEFAULT_DEPTH) -> CanonicalNeighborhood:
    nodes = restricted_bfs(g, v_c, d)
    sub, origin = g.induced(nodes)
    return CanonicalNeighborhood(sub, 0, origin, d)


def partition_all(g: Graph, d: int = DEFAULT_DEPTH) -> list:
    return [canonical_partition(g, v, d) for v in range(g.num_nodes)]


def _log10_sum(log_terms) -> float:
    top = max(log_terms)
    return top + math.log10(sum(10.0 ** (t - top) for t in log_terms))


COMPLEXITY_MODELS = {
    "exp2": lambda v: v * math.log10(2),
    "poly2": lambda v: 2 * math.log10(v) if v > 0 else float("-inf"),
    "factorial": lambda v: (math.lgamma(v + 1) + math.log(v)) / math.log(10) if v > 0 else float("-inf"),
}


def partition_complexity_report(g: Graph, d: int = DEFAULT_DEPTH) -> dict:
    """Search-space comparison of whole-graph counting vs per-neighborhood counting.

    For each cost model S, reports log10(S(V_t) / sum_i S(V_n_i)); positive
    means the partition shrinks the search space.
    """
    sizes = [len(restricted_bfs(g, v, d)) for v in range(g.num_nodes)]
    report = {"num_nodes": g.num_nodes, "depth": d, "neighborhood_sizes": sizes, "log10_reduction": {}}
    if not sizes:
        return report
    for name, log_s in COMPLEXITY_MODELS.items():
        whole = log_s(g.num_nodes)
        parts = _log10_sum([log_s(s) for s in sizes])
        report["log10_reduction"][name] = whole - parts
    report["mean_neighborhood_size"] = sum(sizes) / len(sizes)
    report["max_neighborhood_size"] = max(sizes)
    return report


def dump_neighborhoods(neighborhoods, directory) -> None:
    """Debug dump: ``<target id>.txt`` edge lists plus ``<target id>.map`` (local_id,target_id)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for nb in neighborhoods:
        save_graph(nb.graph, directory / f"{nb.target_node}.txt")
        rows = ["local_id,target_id"] + [f"{i},{t}" for i, t in enumerate(nb.origin)]
        (directory / f"{nb.target_node}.map").write_text("\n".join(rows) + "\n")
