"""Exhaustive-scan index: the exactness reference inside the harness."""

from __future__ import annotations

import numpy as np

from ..dataset import Metric, VectorDataset, metric_keys_batch
from ..oracle import top_k_by_key
from .base import AnnIndex, Params, ResultSet, register_index


@register_index
class FlatIndex(AnnIndex):
    """Stores the dataset and scans it per query. Results are identical to
    the brute-force oracle by construction."""

    algorithm = "flat"
    BUILD_KEYS = {"metric"}
    SEARCH_KEYS: set = set()

    def __init__(self):
        self._built = False
        self.metric = Metric.L2
        self.dataset: VectorDataset | None = None

    def build(self, dataset: VectorDataset, params=None) -> None:
        p = Params.of(params)
        p.ensure_known(self.BUILD_KEYS)
        self.metric = p.get_metric()
        self.dataset = dataset
        self._built = True

    def search_knn(self, queries: VectorDataset, k: int, params=None) -> ResultSet:
        self._require_built()
        Params.of(params).ensure_known(self.SEARCH_KEYS)
        self._check_queries(queries, self.dataset.dim)
        points = self.dataset.as_float32()
        qmat = queries.as_float32()
        kk = min(k, self.dataset.count)
        ids, dists = [], []
        for q in range(queries.count):
            vals, keys = metric_keys_batch(points, qmat[q], self.metric)
            top = top_k_by_key(keys, kk)
            ids.append(top.astype(np.uint32))
            dists.append(vals[top])
        return ResultSet(ids, dists)

    def search_range(self, queries: VectorDataset, radius: float, params=None) -> ResultSet:
        self._require_built()
        Params.of(params).ensure_known(self.SEARCH_KEYS)
        self._check_queries(queries, self.dataset.dim)
        if self.metric is not Metric.L2:
            from ..errors import ValidationError
            raise ValidationError("range search supports only the L2 metric")
        points = self.dataset.as_float32()
        qmat = queries.as_float32()
        r32 = np.float32(radius)
        ids, dists = [], []
        for q in range(queries.count):
            vals, keys = metric_keys_batch(points, qmat[q], Metric.L2)
            hit = np.flatnonzero(keys <= r32)
            order = np.lexsort((hit, keys[hit]))
            ids.append(hit[order].astype(np.uint32))
            dists.append(vals[hit[order]])
        return ResultSet(ids, dists)

    def describe(self) -> dict:
        return {"algorithm": self.algorithm, "build_params": {"metric": self.metric.value}}

    def index_size_bytes(self) -> int:
        self._require_built()
        return int(self.dataset.data.nbytes)

    def _state(self):
        self._require_built()
        meta = {
            "metric": self.metric.value,
            "kind": self.dataset.kind.value,
            "name": self.dataset.name,
        }
        return meta, {"data": self.dataset.data}

    @classmethod
    def _restore(cls, meta, arrays):
        from ..dataset import ScalarKind
        index = cls()
        index.metric = Metric(meta["metric"])
        index.dataset = VectorDataset(ScalarKind(meta["kind"]), arrays["data"],
                                      name=meta["name"])
        index._built = True
        return index
