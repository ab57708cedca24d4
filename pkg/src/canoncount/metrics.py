"""Count-prediction metrics and report assembly."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .oracle import CountTable


class MetricError(ValueError):
    pass


def normalized_mse(preds, truths) -> float:
    """Mean squared error divided by the population variance of ``truths``."""
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    t = np.asarray(truths, dtype=np.float64).reshape(-1)
    if p.size != t.size:
        raise MetricError("preds and truths differ in length")
    if t.size < 2:
        raise MetricError("normalized MSE needs at least two truths")
    var = np.var(t)
    if var == 0:
        raise MetricError("normalized MSE undefined: ground truth has zero variance")
    return float(np.mean((p - t) ** 2) / var)


def mae(preds, truths) -> float:
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    t = np.asarray(truths, dtype=np.float64).reshape(-1)
    if p.size != t.size:
        raise MetricError("preds and truths differ in length")
    if t.size == 0:
        raise MetricError("MAE of an empty set")
    return float(np.mean(np.abs(p - t)))


def q_error(pred: float, truth: float) -> float:
    if pred <= 0 or truth <= 0:
        raise MetricError("q-error needs positive prediction and truth")
    return max(truth / pred, pred / truth)


def q_error_summary(preds, truths) -> dict:
    """q-error quantiles over rows with positive truth and prediction; other rows are counted as excluded."""
    vals = []
    excluded = 0
    for p, t in zip(np.asarray(preds).reshape(-1), np.asarray(truths).reshape(-1)):
        if p > 0 and t > 0:
            vals.append(q_error(float(p), float(t)))
        else:
            excluded += 1
    out = {"count": len(vals), "excluded": excluded}
    if vals:
        arr = np.asarray(vals)
        out.update({
            "mean": float(arr.mean()),
            "p50": float(np.quantile(arr, 0.5)),
            "p90": float(np.quantile(arr, 0.9)),
            "max": float(arr.max()),
        })
    return out


@dataclass
class MetricReport:
    normalized_mse: float = None
    mae: float = None
    q_error: dict = field(default_factory=dict)
    homophily_ratio: float = None
    index_count_correlation: float = None
    per_query: list = field(default_factory=list)
    per_size: dict = field(default_factory=dict)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n")

    def to_csv(self, path) -> None:
        """Flat ``scope,key,metric,value`` rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scope", "key", "metric", "value"])
            for name in ("normalized_mse", "mae", "homophily_ratio", "index_count_correlation"):
                w.writerow(["overall", "", name, _fmt(getattr(self, name))])
            for name, val in sorted(self.q_error.items()):
                w.writerow(["overall", "", f"q_error_{name}", _fmt(val)])
            for row in self.per_query:
                for name in ("normalized_mse", "mae"):
                    w.writerow(["query", row["query_id"], name, _fmt(row[name])])
            for size, row in sorted(self.per_size.items()):
                for name, val in sorted(row.items()):
                    w.writerow(["size", size, name, _fmt(val)])


def _fmt(v):
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def _safe_nmse(p, t):
    try:
        return normalized_mse(p, t)
    except MetricError:
        return None


def evaluate_matrix(preds, truths, query_sizes=None) -> MetricReport:
    """Metrics for aligned (rows, num_queries) matrices.

    Rows are target graphs for total counts, or target nodes for position
    distributions.  Per-size normalized MSE is the mean of the per-query
    values over queries whose truth column has non-zero variance; the pooled
    variant normalises all cells of that size together.
    """
    P = np.asarray(preds, dtype=np.float64)
    T = np.asarray(truths, dtype=np.float64)
    if P.shape != T.shape or P.ndim != 2:
        raise MetricError(f"misaligned tables: {P.shape} vs {T.shape}")
    nq = T.shape[1]
    sizes = list(query_sizes) if query_sizes is not None else [0] * nq
    report = MetricReport(
        normalized_mse=_safe_nmse(P, T),
        mae=mae(P, T),
        q_error=q_error_summary(P, T),
    )
    for q in range(nq):
        report.per_query.append({
            "query_id": q,
            "size": sizes[q],
            "normalized_mse": _safe_nmse(P[:, q], T[:, q]),
            "mae": mae(P[:, q], T[:, q]),
        })
    for size in sorted(set(sizes)):
        cols = [q for q in range(nq) if sizes[q] == size]
        per = [r["normalized_mse"] for r in report.per_query if r["size"] == size and r["normalized_mse"] is not None]
        report.per_size[str(size)] = {
            "normalized_mse": float(np.mean(per)) if per else None,
            "pooled_normalized_mse": _safe_nmse(P[:, cols], T[:, cols]),
            "mae": mae(P[:, cols], T[:, cols]),
            "queries_scored": len(per),
            "queries_zero_variance": len(cols) - len(per),
        }
    return report


def _stack(table: CountTable, ids):
    return np.concatenate([np.asarray(table.counts[g], dtype=np.float64) for g in ids])


def position_distribution_error(pred: CountTable, truth: CountTable, query_sizes=None) -> MetricReport:
    """Per-(node, query) metrics: each target node's canonical count is the ground truth."""
    if pred.num_queries != truth.num_queries or set(pred.counts) != set(truth.counts):
        raise MetricError("prediction and truth tables cover different graphs or queries")
    ids = sorted(truth.counts)
    for g in ids:
        if pred.counts[g].shape != truth.counts[g].shape:
            raise MetricError(f"graph {g}: node sets differ")
    return evaluate_matrix(_stack(pred, ids), _stack(truth, ids), query_sizes)


def total_count_error(pred: CountTable, truth: CountTable, query_sizes=None) -> MetricReport:
    """Graph-level metrics on per-(graph, query) totals."""
    if pred.num_queries != truth.num_queries or set(pred.counts) != set(truth.counts):
        raise MetricError("prediction and truth tables cover different graphs or queries")
    ids = sorted(truth.counts)
    pt, tt = pred.totals(), truth.totals()
    return evaluate_matrix(np.stack([pt[g] for g in ids]), np.stack([tt[g] for g in ids]), query_sizes)
