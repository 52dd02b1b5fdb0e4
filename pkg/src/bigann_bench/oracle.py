"""Exact brute-force k-NN and range search.

This is the reference every index is scored against, and the generator for
ground-truth files. Distances accumulate in float32 to match the production
kernels; tests cross-check against an independent float64 rescan.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dataset import (
    KnnGroundTruth,
    Metric,
    RangeGroundTruth,
    VectorDataset,
    metric_keys_batch,
)
from .errors import ValidationError


def top_k_by_key(keys: np.ndarray, k: int, ids: np.ndarray | None = None) -> np.ndarray:
    """Indices of the k smallest keys, ties broken by ascending id.

    ``ids`` defaults to positions; pass explicit ids when ``keys`` covers a
    gathered candidate subset. Returns positions into ``keys``.
    """
    n = keys.shape[0]
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    if k >= n:
        cand = np.arange(n, dtype=np.int64)
    else:
        part = np.argpartition(keys, k - 1)[:k]
        boundary = keys[part].max()
        cand = np.flatnonzero(keys <= boundary)
    order = np.lexsort((ids[cand], keys[cand]))
    return cand[order[:k]]


def _query_chunks(n_queries: int, workers: int):
    if n_queries == 0:
        return []
    workers = max(1, min(workers, n_queries))
    step = -(-n_queries // workers)
    return [(lo, min(lo + step, n_queries)) for lo in range(0, n_queries, step)]


def brute_force_knn(
    base: VectorDataset,
    queries: VectorDataset,
    k: int,
    metric: Metric = Metric.L2,
    workers: int = 1,
) -> KnnGroundTruth:
    """Exact k nearest neighbors per query, ties broken by ascending id.

    Queries are partitioned across ``workers`` threads; output is identical
    for any worker count because each query is scored independently.
    """
    if base.dim != queries.dim:
        raise ValidationError(f"dimension mismatch: base {base.dim}, queries {queries.dim}")
    if base.count < 1:
        raise ValidationError("base dataset is empty")
    if not 1 <= k <= base.count:
        raise ValidationError(f"k={k} must be in [1, {base.count}]")

    points = base.as_float32()
    qmat = queries.as_float32()
    ids = np.empty((queries.count, k), dtype=np.uint32)
    dists = np.empty((queries.count, k), dtype=np.float32)

    def run_block(lo: int, hi: int):
        for q in range(lo, hi):
            vals, keys = metric_keys_batch(points, qmat[q], metric)
            top = top_k_by_key(keys, k)
            ids[q] = top
            dists[q] = vals[top]

    chunks = _query_chunks(queries.count, workers)
    if len(chunks) <= 1:
        for lo, hi in chunks:
            run_block(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(lambda c: run_block(*c), chunks))
    return KnnGroundTruth(k=k, ids=ids, distances=dists)


def brute_force_range(
    base: VectorDataset,
    queries: VectorDataset,
    radius: float,
    metric: Metric = Metric.L2,
    workers: int = 1,
) -> RangeGroundTruth:
    """All base points with squared L2 distance <= radius, per query.

    Only the L2 metric is supported; the radius is in squared units.
    """
    if metric is not Metric.L2:
        raise ValidationError("range search supports only the L2 metric")
    if radius < 0:
        raise ValidationError("radius must be >= 0")
    if base.dim != queries.dim:
        raise ValidationError(f"dimension mismatch: base {base.dim}, queries {queries.dim}")

    points = base.as_float32()
    qmat = queries.as_float32()
    radius32 = np.float32(radius)
    out_ids: list = [None] * queries.count
    out_dists: list = [None] * queries.count

    def run_block(lo: int, hi: int):
        for q in range(lo, hi):
            vals, keys = metric_keys_batch(points, qmat[q], Metric.L2)
            hit = np.flatnonzero(keys <= radius32)
            order = np.lexsort((hit, keys[hit]))
            out_ids[q] = hit[order].astype(np.uint32)
            out_dists[q] = vals[hit[order]]

    chunks = _query_chunks(queries.count, workers)
    if len(chunks) <= 1:
        for lo, hi in chunks:
            run_block(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(lambda c: run_block(*c), chunks))
    return RangeGroundTruth(radius=float(radius32), ids=out_ids, distances=out_dists)
