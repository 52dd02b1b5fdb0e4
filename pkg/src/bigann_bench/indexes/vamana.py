"""In-memory graph index: randomized-order insertion, greedy candidate
search from the medoid, slack-pruned bounded-degree adjacency, and
best-first beam queries.

The graph is always built over squared-L2 geometry; at query time the beam
is ordered by the index metric (inner-product datasets search an L2-built
graph). Hot loops are compiled with numba and hold no shared mutable state,
so searches can run from many threads concurrently.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..dataset import Metric, VectorDataset
from ..errors import ValidationError
from .base import AnnIndex, Params, ResultSet, register_index

_L2 = 0
_IP = 1


@njit(cache=True, nogil=True, inline="always")
def _key(data, node, q, metric):
    acc = 0.0
    if metric == _L2:
        for j in range(data.shape[1]):
            t = data[node, j] - q[j]
            acc += t * t
    else:
        for j in range(data.shape[1]):
            acc += data[node, j] * q[j]
        acc = -acc
    return np.float32(acc)


@njit(cache=True, nogil=True)
def _beam_search(data, adj, deg, entry, q, width, metric, mark, epoch):
    """Best-first search keeping the ``width`` closest nodes seen so far.

    Returns the beam (sorted by (key, id)), the expanded nodes (search
    candidates for graph construction), and every node scored (range-search
    seeds). Each node is visited at most once per epoch.
    """
    beam_ids = np.empty(width, np.int32)
    beam_keys = np.empty(width, np.float32)
    beam_done = np.zeros(width, np.uint8)
    beam_size = 0

    exp_cap = width * 2 + 16
    exp_ids = np.empty(exp_cap, np.int32)
    exp_keys = np.empty(exp_cap, np.float32)
    n_exp = 0

    seen_cap = width * 8 + 64
    seen_ids = np.empty(seen_cap, np.int32)
    seen_keys = np.empty(seen_cap, np.float32)
    n_seen = 0

    k0 = _key(data, entry, q, metric)
    mark[entry] = epoch
    seen_ids[0] = entry
    seen_keys[0] = k0
    n_seen = 1
    beam_ids[0] = entry
    beam_keys[0] = k0
    beam_size = 1

    while True:
        cur = -1
        for i in range(beam_size):
            if beam_done[i] == 0:
                cur = i
                break
        if cur < 0:
            break
        beam_done[cur] = 1
        node = beam_ids[cur]
        kcur = beam_keys[cur]
        if n_exp == exp_cap:
            exp_cap *= 2
            tmp_i = np.empty(exp_cap, np.int32)
            tmp_i[:n_exp] = exp_ids[:n_exp]
            exp_ids = tmp_i
            tmp_k = np.empty(exp_cap, np.float32)
            tmp_k[:n_exp] = exp_keys[:n_exp]
            exp_keys = tmp_k
        exp_ids[n_exp] = node
        exp_keys[n_exp] = kcur
        n_exp += 1

        for e in range(deg[node]):
            nb = adj[node, e]
            if mark[nb] == epoch:
                continue
            mark[nb] = epoch
            kk = _key(data, nb, q, metric)
            if n_seen == seen_cap:
                seen_cap *= 2
                tmp_i = np.empty(seen_cap, np.int32)
                tmp_i[:n_seen] = seen_ids[:n_seen]
                seen_ids = tmp_i
                tmp_k = np.empty(seen_cap, np.float32)
                tmp_k[:n_seen] = seen_keys[:n_seen]
                seen_keys = tmp_k
            seen_ids[n_seen] = nb
            seen_keys[n_seen] = kk
            n_seen += 1

            if beam_size == width:
                last = width - 1
                if kk > beam_keys[last] or (kk == beam_keys[last] and nb > beam_ids[last]):
                    continue
            pos = beam_size
            for i in range(beam_size):
                if kk < beam_keys[i] or (kk == beam_keys[i] and nb < beam_ids[i]):
                    pos = i
                    break
            if pos >= width:
                continue
            top = beam_size if beam_size < width else width - 1
            for i in range(top, pos, -1):
                beam_ids[i] = beam_ids[i - 1]
                beam_keys[i] = beam_keys[i - 1]
                beam_done[i] = beam_done[i - 1]
            beam_ids[pos] = nb
            beam_keys[pos] = kk
            beam_done[pos] = 0
            if beam_size < width:
                beam_size += 1

    return (beam_ids, beam_keys, beam_size,
            exp_ids, exp_keys, n_exp,
            seen_ids, seen_keys, n_seen)


@njit(cache=True, nogil=True)
def _robust_prune(data, pid, cand_ids, cand_keys, ncand, alpha, max_degree, out):
    """Select up to ``max_degree`` neighbors for ``pid`` from candidates.

    Candidates are taken closest-first; once a neighbor is accepted, remaining
    candidates it dominates (alpha * d(neighbor, c) <= d(pid, c), squared L2)
    are discarded. When the candidate pool already fits the degree bound the
    whole pool is kept, so tiny graphs stay fully connected.
    """
    ids = cand_ids[:ncand].copy()
    keys = cand_keys[:ncand].copy()
    o0 = np.argsort(ids, kind="mergesort")
    o1 = np.argsort(keys[o0], kind="mergesort")
    order = o0[o1]

    # drop self-edges and duplicates (duplicate ids share a key, so they are
    # adjacent in (key, id) order)
    alive = np.ones(ncand, np.uint8)
    n_alive = 0
    prev = -1
    for t in range(ncand):
        ci = order[t]
        if ids[ci] == pid or ids[ci] == prev:
            alive[ci] = 0
        else:
            n_alive += 1
            prev = ids[ci]

    n_out = 0
    if n_alive <= max_degree:
        for t in range(ncand):
            ci = order[t]
            if alive[ci] == 1:
                out[n_out] = ids[ci]
                n_out += 1
        return n_out

    for t in range(ncand):
        ci = order[t]
        if alive[ci] == 0:
            continue
        c = ids[ci]
        alive[ci] = 0
        out[n_out] = c
        n_out += 1
        if n_out == max_degree:
            break
        for u in range(t + 1, ncand):
            cu = order[u]
            if alive[cu] == 0:
                continue
            dcc = _key(data, c, data[ids[cu]], _L2)
            if alpha * dcc <= keys[cu]:
                alive[cu] = 0
    return n_out


@njit(cache=True, nogil=True)
def _build_graph(data, order, medoid, max_degree, build_width, alpha):
    n = data.shape[0]
    adj = np.full((n, max_degree), -1, np.int32)
    deg = np.zeros(n, np.int32)
    mark = np.zeros(n, np.int64)
    out = np.empty(max_degree, np.int32)
    scratch_ids = np.empty(max_degree + 1, np.int32)
    scratch_keys = np.empty(max_degree + 1, np.float32)
    cand_ids = np.empty(16, np.int32)
    cand_keys = np.empty(16, np.float32)

    for t in range(order.shape[0]):
        pid = order[t]
        epoch = t + 1
        q = data[pid]
        (_, _, _, exp_ids, exp_keys, n_exp, _, _, _) = _beam_search(
            data, adj, deg, medoid, q, build_width, _L2, mark, epoch
        )
        # candidates: search expansions plus any existing out-edges (the
        # entry point accumulates back-edges before its own insertion turn)
        ncand = n_exp + deg[pid]
        if cand_ids.shape[0] < ncand:
            cand_ids = np.empty(ncand * 2, np.int32)
            cand_keys = np.empty(ncand * 2, np.float32)
        cand_ids[:n_exp] = exp_ids[:n_exp]
        cand_keys[:n_exp] = exp_keys[:n_exp]
        for e in range(deg[pid]):
            nbr = adj[pid, e]
            cand_ids[n_exp + e] = nbr
            cand_keys[n_exp + e] = _key(data, nbr, q, _L2)
        n_out = _robust_prune(data, pid, cand_ids, cand_keys, ncand, alpha,
                              max_degree, out)
        for j in range(n_out):
            adj[pid, j] = out[j]
        for j in range(n_out, max_degree):
            adj[pid, j] = -1
        deg[pid] = n_out

        # read back-edge targets from adj[pid]: `out` is reused as the
        # scratch output of overflow pruning below
        for j in range(n_out):
            b = adj[pid, j]
            present = False
            for e in range(deg[b]):
                if adj[b, e] == pid:
                    present = True
                    break
            if present:
                continue
            if deg[b] < max_degree:
                adj[b, deg[b]] = pid
                deg[b] += 1
            else:
                nc = deg[b]
                for e in range(nc):
                    nbr = adj[b, e]
                    scratch_ids[e] = nbr
                    scratch_keys[e] = _key(data, nbr, data[b], _L2)
                scratch_ids[nc] = pid
                scratch_keys[nc] = _key(data, pid, data[b], _L2)
                n2 = _robust_prune(data, b, scratch_ids, scratch_keys, nc + 1,
                                   alpha, max_degree, out)
                for e in range(n2):
                    adj[b, e] = out[e]
                for e in range(n2, max_degree):
                    adj[b, e] = -1
                deg[b] = n2
    return adj, deg


@njit(cache=True, nogil=True)
def _range_expand(data, adj, deg, q, radius,
                  seen_ids, seen_keys, n_seen, mark, epoch):
    """Breadth-first growth from every in-radius node already seen; neighbors
    are followed only while they stay within the radius."""
    cap = n_seen + 64
    res_ids = np.empty(cap, np.int32)
    res_keys = np.empty(cap, np.float32)
    queue = np.empty(cap, np.int32)
    n_res = 0
    tail = 0
    for i in range(n_seen):
        if seen_keys[i] <= radius:
            res_ids[n_res] = seen_ids[i]
            res_keys[n_res] = seen_keys[i]
            queue[tail] = seen_ids[i]
            n_res += 1
            tail += 1
    head = 0
    while head < tail:
        v = queue[head]
        head += 1
        for e in range(deg[v]):
            nb = adj[v, e]
            if mark[nb] == epoch:
                continue
            mark[nb] = epoch
            kk = _key(data, nb, q, _L2)
            if kk <= radius:
                if n_res == cap:
                    cap *= 2
                    tmp_i = np.empty(cap, np.int32)
                    tmp_i[:n_res] = res_ids[:n_res]
                    res_ids = tmp_i
                    tmp_k = np.empty(cap, np.float32)
                    tmp_k[:n_res] = res_keys[:n_res]
                    res_keys = tmp_k
                    tmp_q = np.empty(cap, np.int32)
                    tmp_q[:tail] = queue[:tail]
                    queue = tmp_q
                res_ids[n_res] = nb
                res_keys[n_res] = kk
                queue[tail] = nb
                n_res += 1
                tail += 1
    return res_ids[:n_res], res_keys[:n_res]


def _compute_medoid(data: np.ndarray, seed: int, sample_cap: int = 10000) -> int:
    """Point (within a seeded sample) minimizing total distance to the sample.

    The exact medoid is quadratic in n, so it is approximated on a sample of
    at most ``sample_cap`` points.
    """
    n = data.shape[0]
    if n <= sample_cap:
        sample_idx = np.arange(n)
    else:
        rng = np.random.default_rng(seed)
        sample_idx = np.sort(rng.choice(n, size=sample_cap, replace=False))
    sample = data[sample_idx].astype(np.float64)
    sums = np.zeros(sample.shape[0])
    chunk = 512
    for lo in range(0, sample.shape[0], chunk):
        block = sample[lo: lo + chunk]
        d2 = (
            np.einsum("ij,ij->i", block, block)[:, None]
            - 2.0 * (block @ sample.T)
            + np.einsum("ij,ij->i", sample, sample)[None, :]
        )
        sums += np.sqrt(np.maximum(d2, 0.0)).sum(axis=0)
    return int(sample_idx[int(np.argmin(sums))])


@register_index
class VamanaIndex(AnnIndex):

    algorithm = "vamana"
    BUILD_KEYS = {"metric", "max_degree", "build_width", "alpha", "seed"}
    SEARCH_KEYS = {"search_width"}

    def __init__(self):
        self._built = False
        self.metric = Metric.L2
        self.max_degree = 32
        self.build_width = 64
        self.alpha = 1.2
        self.seed = 0
        self.medoid = 0
        self.data = None   # (n, d) f32
        self.adj = None    # (n, max_degree) i32, -1 padded
        self.deg = None    # (n,) i32
        self.dataset_name = ""

    def build(self, dataset: VectorDataset, params=None) -> None:
        p = Params.of(params)
        p.ensure_known(self.BUILD_KEYS)
        if dataset.count < 1:
            raise ValidationError("cannot build a graph over an empty dataset")
        self.metric = p.get_metric()
        self.max_degree = p.get_int("max_degree", 32)
        self.build_width = p.get_int("build_width", 64)
        self.alpha = p.get_float("alpha", 1.2)
        self.seed = p.get_int("seed", 0)
        if self.max_degree < 2:
            raise ValidationError("max_degree must be >= 2")
        if self.build_width < 1:
            raise ValidationError("build_width must be >= 1")
        if self.alpha < 1.0:
            raise ValidationError("alpha must be >= 1.0")

        self.data = np.ascontiguousarray(dataset.as_float32())
        self.medoid = _compute_medoid(self.data, self.seed)
        order = np.random.default_rng(self.seed).permutation(dataset.count)
        self.adj, self.deg = _build_graph(
            self.data, order, np.int64(self.medoid),
            np.int64(self.max_degree), np.int64(self.build_width),
            np.float32(self.alpha),
        )
        self.dataset_name = dataset.name
        self._built = True

    def _width(self, params, k: int) -> int:
        p = Params.of(params)
        p.ensure_known(self.SEARCH_KEYS)
        width = p.get_int("search_width", max(k, 64))
        if width < k:
            raise ValidationError(f"search_width={width} must be >= k={k}")
        return width

    def search_knn(self, queries: VectorDataset, k: int, params=None) -> ResultSet:
        self._require_built()
        width = self._width(params, k)
        self._check_queries(queries, self.data.shape[1])
        metric_code = _L2 if self.metric is Metric.L2 else _IP
        qmat = queries.as_float32()
        mark = np.zeros(self.data.shape[0], dtype=np.int64)
        ids_out, dists_out = [], []
        for q in range(queries.count):
            beam_ids, beam_keys, size, *_ = _beam_search(
                self.data, self.adj, self.deg, np.int64(self.medoid),
                np.ascontiguousarray(qmat[q]), np.int64(width), metric_code,
                mark, np.int64(q + 1),
            )
            take = min(k, size)
            ids_out.append(beam_ids[:take].astype(np.uint32))
            keys = beam_keys[:take]
            dists_out.append(keys if metric_code == _L2 else -keys)
        return ResultSet(ids_out, dists_out)

    def search_range(self, queries: VectorDataset, radius: float, params=None) -> ResultSet:
        self._require_built()
        p = Params.of(params)
        p.ensure_known(self.SEARCH_KEYS)
        width = p.get_int("search_width", 64)
        if width < 1:
            raise ValidationError("search_width must be >= 1")
        if self.metric is not Metric.L2:
            raise ValidationError("range search supports only the L2 metric")
        self._check_queries(queries, self.data.shape[1])
        qmat = queries.as_float32()
        r32 = np.float32(radius)
        mark = np.zeros(self.data.shape[0], dtype=np.int64)
        ids_out, dists_out = [], []
        for q in range(queries.count):
            qv = np.ascontiguousarray(qmat[q])
            epoch = np.int64(q + 1)
            (_, _, _, _, _, _, seen_ids, seen_keys, n_seen) = _beam_search(
                self.data, self.adj, self.deg, np.int64(self.medoid), qv,
                np.int64(width), _L2, mark, epoch,
            )
            rid, rkey = _range_expand(self.data, self.adj, self.deg, qv, r32,
                                      seen_ids, seen_keys, n_seen, mark, epoch)
            order = np.lexsort((rid, rkey))
            ids_out.append(rid[order].astype(np.uint32))
            dists_out.append(rkey[order])
        return ResultSet(ids_out, dists_out)

    def describe(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "build_params": {
                "metric": self.metric.value,
                "max_degree": self.max_degree,
                "build_width": self.build_width,
                "alpha": self.alpha,
                "seed": self.seed,
            },
        }

    def index_size_bytes(self) -> int:
        self._require_built()
        return int(self.data.nbytes + self.adj.nbytes + self.deg.nbytes)

    def _state(self):
        self._require_built()
        meta = {
            "metric": self.metric.value,
            "max_degree": self.max_degree,
            "build_width": self.build_width,
            "alpha": self.alpha,
            "seed": self.seed,
            "medoid": self.medoid,
            "dataset_name": self.dataset_name,
        }
        return meta, {"data": self.data, "adj": self.adj, "deg": self.deg}

    @classmethod
    def _restore(cls, meta, arrays):
        index = cls()
        index.metric = Metric(meta["metric"])
        index.max_degree = meta["max_degree"]
        index.build_width = meta["build_width"]
        index.alpha = meta["alpha"]
        index.seed = meta["seed"]
        index.medoid = meta["medoid"]
        index.dataset_name = meta["dataset_name"]
        index.data = np.ascontiguousarray(arrays["data"])
        index.adj = np.ascontiguousarray(arrays["adj"])
        index.deg = np.ascontiguousarray(arrays["deg"])
        index._built = True
        return index
