"""Vector codecs used by the baseline indexes: Lloyd k-means with k-means++
seeding, product quantization with asymmetric distance tables, and per-dimension
8-bit scalar quantization.

All training is deterministic given (data, parameters, seed). k-means runs in
float64 internally so the recorded inertia sequence is non-increasing; final
centroids are stored as float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import VectorDataset
from .errors import ValidationError


def as_matrix(x) -> np.ndarray:
    """Accept a VectorDataset or array-like; return a float32 (n, d) matrix."""
    if isinstance(x, VectorDataset):
        return x.as_float32()
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-d point matrix, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

@dataclass
class KMeansModel:
    centroids: np.ndarray          # (k, d) float32
    inertia: float                 # sum of squared distances at the last iteration
    iterations_run: int
    inertia_history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists_to_centroid(pts: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = pts - c
    return np.einsum("ij,ij->i", diff, diff)


def _assign(pts: np.ndarray, centroids: np.ndarray):
    """Per-point nearest centroid, ties to the lowest index.

    Distances are exact per-term float64 (no expansion trick) so the inertia
    sequence stays monotone.
    """
    n = pts.shape[0]
    best = _sq_dists_to_centroid(pts, centroids[0])
    assign = np.zeros(n, dtype=np.int64)
    for j in range(1, centroids.shape[0]):
        dj = _sq_dists_to_centroid(pts, centroids[j])
        better = dj < best
        assign[better] = j
        np.minimum(best, dj, out=best)
    return assign, best


def kmeans_train(points, k: int, max_iters: int = 25, seed: int = 0) -> KMeansModel:
    """Lloyd iterations from a k-means++ seeding.

    Stops at ``max_iters`` or when assignments no longer change. Clusters that
    empty out are re-seeded from the point currently farthest from its
    assigned centroid.
    """
    pts32 = as_matrix(points)
    n = pts32.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} must be in [1, {n}]")
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    if not np.isfinite(pts32).all():
        raise ValidationError("k-means input contains NaN or Inf")
    pts = pts32.astype(np.float64)

    rng = np.random.default_rng(seed)
    centroids = np.empty((k, pts.shape[1]), dtype=np.float64)
    centroids[0] = pts[rng.integers(n)]
    d2 = _sq_dists_to_centroid(pts, centroids[0])
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centroids[j] = pts[pick]
        np.minimum(d2, _sq_dists_to_centroid(pts, centroids[j]), out=d2)

    history: list = []
    prev_assign = None
    iterations = 0
    for _ in range(max_iters):
        assign, best = _assign(pts, centroids)
        iterations += 1
        history.append(float(best.sum()))
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign

        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, pts)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]

        if not nonempty.all():
            # farthest-point reseeding keeps all k centroids live
            farthest_pool = best.copy()
            for j in np.flatnonzero(~nonempty):
                p = int(np.argmax(farthest_pool))
                centroids[j] = pts[p]
                farthest_pool[p] = -1.0

    return KMeansModel(
        centroids=centroids.astype(np.float32),
        inertia=history[-1],
        iterations_run=iterations,
        inertia_history=history,
    )


def sample_rows(mat: np.ndarray, cap: int, seed: int) -> np.ndarray:
    """Uniform seeded subsample of at most ``cap`` rows (in stable row order)."""
    n = mat.shape[0]
    if n <= cap:
        return mat
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=cap, replace=False))
    return mat[idx]


# ---------------------------------------------------------------------------
# product quantization
# ---------------------------------------------------------------------------

@dataclass
class PqCodebook:
    """Per-subspace codebooks: ``codebooks[s]`` is (k_sub, sub_dim) float32."""

    m: int
    nbits: int
    codebooks: np.ndarray  # (m, k_sub, sub_dim)

    def __post_init__(self):
        if not 1 <= self.nbits <= 16:
            raise ValidationError("nbits must be in [1, 16]")
        if self.codebooks.shape[:2] != (self.m, 2 ** self.nbits):
            raise ValidationError("codebook array shape does not match m / nbits")

    @property
    def k_sub(self) -> int:
        return 2 ** self.nbits

    @property
    def sub_dim(self) -> int:
        return self.codebooks.shape[2]

    @property
    def dim(self) -> int:
        return self.m * self.sub_dim

    @property
    def code_dtype(self) -> np.dtype:
        return np.dtype(np.uint8 if self.nbits <= 8 else np.uint16)


def pq_train(data, m: int, nbits: int, seed: int = 0, max_iters: int = 25,
             train_cap: int | None = None) -> PqCodebook:
    """Independent k-means per coordinate-slice subspace.

    ``d`` must divide evenly into ``m`` subspaces; padding would silently
    change the metric. Training subsamples to ``train_cap`` rows
    (default 256 * 2^nbits).
    """
    mat = as_matrix(data)
    n, d = mat.shape
    if d % m != 0:
        raise ValidationError(f"dim {d} not divisible by m={m}")
    if not 1 <= nbits <= 16:
        raise ValidationError("nbits must be in [1, 16]")
    k_sub = 2 ** nbits
    if n < k_sub:
        raise ValidationError(f"need at least {k_sub} training points, got {n}")
    cap = train_cap if train_cap is not None else 256 * k_sub
    train = sample_rows(mat, cap, seed)

    sub_dim = d // m
    rng = np.random.default_rng(seed)
    sub_seeds = rng.integers(0, 2 ** 63 - 1, size=m)
    books = np.empty((m, k_sub, sub_dim), dtype=np.float32)
    for s in range(m):
        sl = np.ascontiguousarray(train[:, s * sub_dim: (s + 1) * sub_dim])
        books[s] = kmeans_train(sl, k_sub, max_iters=max_iters, seed=int(sub_seeds[s])).centroids
    return PqCodebook(m=m, nbits=nbits, codebooks=books)


def _nearest_rows(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per row, ties to the lowest index.

    Exact per-term squared distances (no expansion trick), so a row equal to
    a centroid scores exactly 0 against it.
    """
    diff = x - centroids[0]
    best = np.einsum("ij,ij->i", diff, diff)
    idx = np.zeros(x.shape[0], dtype=np.int64)
    for j in range(1, centroids.shape[0]):
        diff = x - centroids[j]
        dj = np.einsum("ij,ij->i", diff, diff)
        better = dj < best
        idx[better] = j
        np.minimum(best, dj, out=best)
    return idx


def pq_encode_many(book: PqCodebook, mat) -> np.ndarray:
    """Encode each row to its per-subspace nearest centroid (ties -> lowest)."""
    x = as_matrix(mat)
    if x.shape[1] != book.dim:
        raise ValidationError(f"dimension mismatch: {x.shape[1]} vs codebook {book.dim}")
    codes = np.empty((x.shape[0], book.m), dtype=book.code_dtype)
    for s in range(book.m):
        sl = np.ascontiguousarray(x[:, s * book.sub_dim: (s + 1) * book.sub_dim])
        codes[:, s] = _nearest_rows(sl, book.codebooks[s])
    return codes


def pq_encode(book: PqCodebook, vector) -> np.ndarray:
    vec = np.asarray(vector, dtype=np.float32).reshape(1, -1)
    return pq_encode_many(book, vec)[0]


def pq_decode_many(book: PqCodebook, codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.ndim != 2 or codes.shape[1] != book.m:
        raise ValidationError(f"code array must be (n, {book.m})")
    if codes.size and int(codes.max()) >= book.k_sub:
        raise ValidationError(f"code value out of range for nbits={book.nbits}")
    out = np.empty((codes.shape[0], book.dim), dtype=np.float32)
    for s in range(book.m):
        out[:, s * book.sub_dim: (s + 1) * book.sub_dim] = book.codebooks[s][codes[:, s]]
    return out


def pq_decode(book: PqCodebook, code) -> np.ndarray:
    return pq_decode_many(book, np.asarray(code).reshape(1, -1))[0]


def pq_adc_table(book: PqCodebook, query) -> np.ndarray:
    """(m, k_sub) table of squared sub-distances from the query to every
    codebook entry. ``adc_lookup(table, code)`` then scores a code against the
    uncompressed query."""
    q = np.asarray(query, dtype=np.float32).ravel()
    if q.shape[0] != book.dim:
        raise ValidationError(f"dimension mismatch: query {q.shape[0]} vs codebook {book.dim}")
    table = np.empty((book.m, book.k_sub), dtype=np.float32)
    for s in range(book.m):
        diff = book.codebooks[s] - q[s * book.sub_dim: (s + 1) * book.sub_dim]
        table[s] = np.einsum("ij,ij->i", diff, diff)
    return table


def adc_lookup(table: np.ndarray, code) -> float:
    code = np.asarray(code)
    return float(table[np.arange(table.shape[0]), code].sum(dtype=np.float32))


def adc_lookup_many(table: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Score (n, m) codes against one query's ADC table."""
    return table[np.arange(table.shape[0])[None, :], codes].sum(axis=1, dtype=np.float32)


# ---------------------------------------------------------------------------
# 8-bit scalar quantization
# ---------------------------------------------------------------------------

@dataclass
class Sq8Model:
    """Per-dimension affine byte code: x ~ min + byte * scale."""

    min: np.ndarray    # (d,) float32
    scale: np.ndarray  # (d,) float32, (max - min) / 255

    def __post_init__(self):
        if self.min.shape != self.scale.shape or self.min.ndim != 1:
            raise ValidationError("min and scale must be matching 1-d arrays")
        if (self.scale < 0).any():
            raise ValidationError("scale must be >= 0 per dimension")

    @property
    def dim(self) -> int:
        return self.min.shape[0]


def sq8_train(data) -> Sq8Model:
    mat = as_matrix(data)
    if mat.shape[0] < 1:
        raise ValidationError("cannot train SQ8 on an empty dataset")
    lo = mat.min(axis=0).astype(np.float32)
    hi = mat.max(axis=0).astype(np.float32)
    return Sq8Model(min=lo, scale=(hi - lo) / np.float32(255.0))


def sq8_encode_many(model: Sq8Model, mat) -> np.ndarray:
    x = as_matrix(mat)
    if x.shape[1] != model.dim:
        raise ValidationError(f"dimension mismatch: {x.shape[1]} vs model {model.dim}")
    scaled = np.zeros_like(x)
    live = model.scale > 0
    scaled[:, live] = (x[:, live] - model.min[live]) / model.scale[live]
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def sq8_encode(model: Sq8Model, vector) -> np.ndarray:
    return sq8_encode_many(model, np.asarray(vector, dtype=np.float32).reshape(1, -1))[0]


def sq8_decode_many(model: Sq8Model, codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint8)
    if codes.ndim != 2 or codes.shape[1] != model.dim:
        raise ValidationError(f"code array must be (n, {model.dim})")
    return model.min + codes.astype(np.float32) * model.scale


def sq8_decode(model: Sq8Model, code) -> np.ndarray:
    return sq8_decode_many(model, np.asarray(code).reshape(1, -1))[0]
