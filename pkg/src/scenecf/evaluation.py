"""Ranking metrics against a ground-truth edit-distance rank.

Two relevance modes are reported. In ``topk`` mode the relevant set for a
metric at cutoff k is the ground-truth top-k. In ``binary`` mode only the
ground-truth top-1 is relevant; binary precision is the hit rate (is the
top-1 within the first k) unless ``binary_precision="fraction"`` asks for
the conventional hits / k.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CoverageError
from .retrieval import GroundTruth, RankTable

DEFAULT_KS = (1, 2, 4)
MODES = ("topk", "binary")


def precision_at_k(retrieved, relevant, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    return sum(1 for r in list(retrieved)[:k] if r in relevant) / k


def ndcg_at_k(retrieved, relevant, k: int) -> float:
    """Binary-gain NDCG with ``1 / log2(p + 1)`` discounts at 1-based positions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    if not relevant:
        raise ValueError("NDCG needs a nonempty relevant set")
    dcg = sum(1.0 / math.log2(p + 1) for p, r in enumerate(list(retrieved)[:k], 1) if r in relevant)
    idcg = sum(1.0 / math.log2(p + 1) for p in range(1, min(k, len(relevant)) + 1))
    return dcg / idcg


def binary_hit_at_k(retrieved, gt_top1, k: int) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    return int(gt_top1 in list(retrieved)[:k])


@dataclass(frozen=True)
class MetricReport:
    backend_tag: str
    query_count: int
    ks: tuple
    topk: dict  # "P@k" / "NDCG@k" -> mean over queries
    binary: dict
    per_query: dict = field(default_factory=dict, repr=False, compare=False)

    def mode(self, name: str) -> dict:
        if name not in MODES:
            raise ValueError(f"unknown relevance mode {name!r}")
        return self.topk if name == "topk" else self.binary

    def columns(self) -> list[str]:
        ks = sorted(self.ks, reverse=True)
        return [f"NDCG@{k}" for k in ks] + [f"P@{k}" for k in ks]


def evaluate(
    gt: GroundTruth, ranks: RankTable, ks=DEFAULT_KS, binary_precision: str = "hit_rate"
) -> MetricReport:
    """Mean P@k and NDCG@k over all queries, in both relevance modes."""
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1:
        raise ValueError("ks must be positive integers")
    if binary_precision not in ("hit_rate", "fraction"):
        raise ValueError("binary_precision must be 'hit_rate' or 'fraction'")
    gt_queries, rank_queries = set(gt.table.ranks), set(ranks.ranks)
    if gt_queries != rank_queries:
        missing = sorted(gt_queries - rank_queries)
        extra = sorted(rank_queries - gt_queries)
        raise CoverageError(f"rank table does not cover the ground-truth queries (missing {missing[:10]}, extra {extra[:10]})")
    queries = sorted(gt_queries)
    per_query = {}
    for q in queries:
        retrieved = ranks.ids(q)
        truth = gt.table.ids(q)
        if not truth:
            raise CoverageError(f"query {q!r} has no ground-truth candidates")
        row = {}
        for k in ks:
            relevant = truth[:k]
            row[("topk", f"P@{k}")] = precision_at_k(retrieved, relevant, k)
            row[("topk", f"NDCG@{k}")] = ndcg_at_k(retrieved, relevant, k)
            hit = binary_hit_at_k(retrieved, truth[0], k)
            row[("binary", f"P@{k}")] = float(hit) if binary_precision == "hit_rate" else hit / k
            row[("binary", f"NDCG@{k}")] = ndcg_at_k(retrieved, truth[:1], k)
        per_query[q] = row
    means = {mode: {} for mode in MODES}
    n = len(queries)
    for mode in MODES:
        for k in ks:
            for metric in (f"NDCG@{k}", f"P@{k}"):
                means[mode][metric] = math.fsum(per_query[q][(mode, metric)] for q in queries) / n if n else 0.0
    return MetricReport(ranks.backend_tag, n, ks, means["topk"], means["binary"], per_query)


def write_report_csv(reports, path, mode: str = "topk", digits: int = 6) -> None:
    """One row per backend, columns ``NDCG@k`` then ``P@k`` for descending k."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    cols = reports[0].columns()
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["backend", *cols])
        for r in reports:
            values = r.mode(mode)
            w.writerow([r.backend_tag, *(f"{values[c]:.{digits}f}" for c in cols)])
