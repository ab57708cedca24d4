"""Subgraph counting by canonical-count decomposition.

Exact oracle counts, canonical neighborhood partitioning, a triangle-typed
message-passing neighborhood model and gossip refinement over the target.
"""
from .canonical import CanonicalNeighborhood, canonical_partition, partition_all, partition_complexity_report
from .graph import Graph, QuerySet, assign_indices, enumerate_queries, is_isomorphic, load_graph, triangle_edge_types
from .oracle import CountTable, canonical_count, canonical_counts, count_subgraphs, ground_truth_counts

__version__ = "0.1.0"

__all__ = [
    "CanonicalNeighborhood", "canonical_partition", "partition_all", "partition_complexity_report",
    "Graph", "QuerySet", "assign_indices", "enumerate_queries", "is_isomorphic", "load_graph",
    "triangle_edge_types", "CountTable", "canonical_count", "canonical_counts", "count_subgraphs",
    "ground_truth_counts",
]
