"""Accuracy metrics: k-NN recall with tie tolerance, and range-search
average precision over a pooled, threshold-clipped result list."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dataset import KnnGroundTruth, RangeGroundTruth
from .errors import ValidationError
from .indexes.base import ResultSet


class AccuracyKind(enum.Enum):
    RECALL_AT_K = "recall_at_k"
    RANGE_AP = "range_ap"


@dataclass
class AccuracyReport:
    kind: AccuracyKind
    value: float
    per_query: np.ndarray | None = None  # RECALL_AT_K only
    k: int | None = None
    radius: float | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "value": self.value,
                "k": self.k, "radius": self.radius}


def recall_at_k(results: ResultSet, gt: KnnGroundTruth, k: int,
                tie_eps: float | None = None) -> AccuracyReport:
    """Fraction of the true k nearest neighbors present in each query's first
    k results, averaged over queries.

    A returned id outside the true top-k still counts as a hit when its
    reported distance is within ``tie_eps`` of the true k-th distance, so
    algorithms are not penalized for returning a different member of an
    equidistant tie. ``tie_eps=None`` uses a relative default of
    ``1e-6 * (1 + |d_k|)`` per query; ``tie_eps=0`` disables the tie rule and
    reduces to plain id-set intersection.
    """
    if results.num_queries != gt.num_queries:
        raise ValidationError(
            f"result set has {results.num_queries} queries, ground truth {gt.num_queries}"
        )
    if gt.k < k:
        raise ValidationError(f"ground truth has k={gt.k} < requested k={k}")
    if k < 1:
        raise ValidationError("k must be >= 1")

    per_query = np.zeros(gt.num_queries, dtype=np.float64)
    for q in range(gt.num_queries):
        true_ids = set(int(i) for i in gt.ids[q, :k])
        d_k = float(gt.distances[q, k - 1])
        eps = tie_eps if tie_eps is not None else 1e-6 * (1.0 + abs(d_k))
        hits = 0
        for rid, rdist in zip(results.ids[q][:k], results.distances[q][:k]):
            if int(rid) in true_ids:
                hits += 1
            elif eps > 0 and abs(float(rdist) - d_k) <= eps:
                hits += 1
        per_query[q] = hits / k
    return AccuracyReport(kind=AccuracyKind.RECALL_AT_K, value=float(per_query.mean()),
                          per_query=per_query, k=k)


def range_ap(results: ResultSet, gt: RangeGroundTruth) -> AccuracyReport:
    """Average precision of the pooled result list swept over distance
    thresholds.

    All returned (query, id, distance) triples are pooled into one list. At
    each distinct returned distance ``t`` the list is clipped to distances
    <= t, giving precision(t) and recall(t) against the total ground-truth
    count; AP sums precision weighted by recall increments.
    """
    if results.num_queries != gt.num_queries:
        raise ValidationError(
            f"result set has {results.num_queries} queries, ground truth {gt.num_queries}"
        )
    total_gt = gt.total
    if total_gt == 0:
        raise ValidationError("range AP is undefined: ground truth is empty for all queries")

    dists_parts, tp_parts = [], []
    for q in range(gt.num_queries):
        rids = results.ids[q]
        if rids.size and np.unique(rids).size != rids.size:
            raise ValidationError(f"query {q}: duplicate ids in range results")
        truth = set(int(i) for i in gt.ids[q])
        dists_parts.append(results.distances[q].astype(np.float64))
        tp_parts.append(np.fromiter((int(i) in truth for i in rids),
                                    dtype=bool, count=rids.size))
    if not dists_parts or sum(a.size for a in dists_parts) == 0:
        return AccuracyReport(kind=AccuracyKind.RANGE_AP, value=0.0, radius=gt.radius)

    dists = np.concatenate(dists_parts)
    is_tp = np.concatenate(tp_parts)
    order = np.argsort(dists, kind="stable")
    dists = dists[order]
    is_tp = is_tp[order]

    cum_tp = np.cumsum(is_tp)
    cum_ret = np.arange(1, dists.size + 1)
    # last pooled entry at each distinct threshold
    last = np.flatnonzero(np.r_[dists[1:] != dists[:-1], True])
    precision = cum_tp[last] / cum_ret[last]
    recall = cum_tp[last] / total_gt
    ap = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return AccuracyReport(kind=AccuracyKind.RANGE_AP, value=ap, radius=gt.radius)
