import numpy as np
import pytest

import bigann_bench as bb


def f64_rescan_knn(base, queries, k, metric=bb.Metric.L2):
    """Independent double-precision brute force (scipy distance kernels)."""
    from scipy.spatial.distance import cdist

    b = base.as_float32().astype(np.float64)
    q = queries.as_float32().astype(np.float64)
    if metric is bb.Metric.L2:
        scores = cdist(q, b, "sqeuclidean")
    else:
        scores = -(q @ b.T)
    ids = np.empty((queries.count, k), dtype=np.uint32)
    dists = np.empty((queries.count, k), dtype=np.float64)
    for i in range(queries.count):
        order = np.lexsort((np.arange(base.count), scores[i]))[:k]
        ids[i] = order
        row = scores[i][order]
        dists[i] = row if metric is bb.Metric.L2 else -row
    return ids, dists


def f64_rescan_range(base, queries, radius):
    from scipy.spatial.distance import cdist

    b = base.as_float32().astype(np.float64)
    q = queries.as_float32().astype(np.float64)
    scores = cdist(q, b, "sqeuclidean")
    out = []
    for i in range(queries.count):
        hit = np.flatnonzero(scores[i] <= radius)
        order = np.lexsort((hit, scores[i][hit]))
        out.append((hit[order].astype(np.uint32), scores[i][hit[order]]))
    return out


@pytest.fixture(scope="session")
def tiny():
    """2k x 16 float32 mixture with 40 queries and exact 10-NN ground truth."""
    spec = bb.SyntheticSpec(n=2000, dim=16, n_clusters=8, seed=11, n_queries=40)
    base, queries = bb.generate_synthetic(spec)
    gt = bb.brute_force_knn(base, queries, 10)
    return base, queries, gt


@pytest.fixture(scope="session")
def medium():
    """10k x 32 float32 mixture with 100 queries and exact 10-NN ground truth."""
    spec = bb.SyntheticSpec(n=10000, dim=32, n_clusters=32, seed=29, n_queries=100)
    base, queries = bb.generate_synthetic(spec)
    gt = bb.brute_force_knn(base, queries, 10)
    return base, queries, gt
