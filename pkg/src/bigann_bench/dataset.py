"""Vector dataset and ground-truth containers, binary file formats, distance
kernels, and seeded synthetic data generation.

File formats (all little-endian):

  vectors (``.u8bin`` / ``.i8bin`` / ``.fbin``)
      header: uint32 count, uint32 dim
      data:   count * dim scalars, row-major (uint8 / int8 / float32)

  k-NN ground truth (``.knn.gt``)
      header: uint32 n_queries, uint32 k
      data:   n_queries * k uint32 neighbor ids,
              then n_queries * k float32 distances

  range ground truth (``.range.gt``)
      header: uint32 n_queries, uint32 total
      data:   n_queries uint32 per-query result counts,
              then total uint32 ids, then total float32 distances

All L2 distances in this package, including the ones stored in ground-truth
files, are *squared* Euclidean distances. Squared L2 is order-equivalent to
true L2 and avoids sqrt in hot loops. Inner-product "distances" are the raw
scores; larger means closer.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError

_HEADER = struct.Struct("<II")


class ScalarKind(enum.Enum):
    """Element type of a vector dataset."""

    U8 = "u8"
    I8 = "i8"
    F32 = "f32"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype({"u8": "<u1", "i8": "<i1", "f32": "<f4"}[self.value])

    @property
    def itemsize(self) -> int:
        return self.dtype.itemsize

    @property
    def extension(self) -> str:
        return {"u8": ".u8bin", "i8": ".i8bin", "f32": ".fbin"}[self.value]


_EXT_TO_KIND = {k.extension: k for k in ScalarKind}


class Metric(enum.Enum):
    """Distance function. L2 compares by squared Euclidean distance
    (ascending = closer); INNER_PRODUCT compares by raw dot product
    (descending = closer)."""

    L2 = "l2"
    INNER_PRODUCT = "ip"


class QueryMode(enum.Enum):
    IN_DISTRIBUTION = "in"
    OUT_OF_DISTRIBUTION = "ood"


@dataclass
class VectorDataset:
    """A fixed-dimension collection of vectors, immutable after creation.

    ``data`` is a (count, dim) row-major array whose dtype matches ``kind``.
    """

    kind: ScalarKind
    data: np.ndarray
    name: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data)
        if arr.ndim != 2:
            raise ValidationError(f"dataset array must be 2-d, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValidationError("dataset dim must be >= 1")
        if arr.dtype != self.kind.dtype:
            arr = arr.astype(self.kind.dtype)
        if self.kind is ScalarKind.F32 and arr.size and not np.isfinite(arr).all():
            raise ValidationError(f"dataset '{self.name}' contains NaN or Inf values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "_f32", None)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.count

    def __eq__(self, other) -> bool:
        # name is a label, not part of the stored format
        return (
            isinstance(other, VectorDataset)
            and self.kind is other.kind
            and np.array_equal(self.data, other.data)
        )

    def as_float32(self) -> np.ndarray:
        """The vectors widened to float32. Integer kinds are exact in f32."""
        if self.kind is ScalarKind.F32:
            return self.data
        cached = getattr(self, "_f32", None)
        if cached is None:
            cached = self.data.astype(np.float32)
            cached.setflags(write=False)
            object.__setattr__(self, "_f32", cached)
        return cached

    def row(self, i: int) -> np.ndarray:
        return self.data[i]


@dataclass
class KnnGroundTruth:
    """Exact k nearest neighbors per query.

    ``ids`` and ``distances`` are (n_queries, k). Rows are sorted closest
    first under the generating metric, ties broken by ascending id.
    """

    k: int
    ids: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        ids = np.ascontiguousarray(self.ids, dtype=np.uint32)
        dists = np.ascontiguousarray(self.distances, dtype=np.float32)
        if ids.ndim != 2 or ids.shape[1] != self.k or dists.shape != ids.shape:
            raise ValidationError(
                f"ground truth arrays must be (n_queries, {self.k}), "
                f"got ids {ids.shape} distances {dists.shape}"
            )
        if ids.shape[0] and (np.sort(ids, axis=1)[:, 1:] == np.sort(ids, axis=1)[:, :-1]).any():
            raise ValidationError("ground truth contains duplicate ids within a query")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "distances", dists)

    @property
    def num_queries(self) -> int:
        return self.ids.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, KnnGroundTruth)
            and self.k == other.k
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.distances, other.distances)
        )


@dataclass
class RangeGroundTruth:
    """All points within a radius per query (squared L2 units).

    ``ids[q]`` / ``distances[q]`` are variable-length arrays sorted by
    (distance, id) ascending.
    """

    radius: float
    ids: list = field(default_factory=list)
    distances: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.ids) != len(self.distances):
            raise ValidationError("ids and distances must have one entry per query")
        ids = [np.ascontiguousarray(a, dtype=np.uint32) for a in self.ids]
        dists = [np.ascontiguousarray(a, dtype=np.float32) for a in self.distances]
        for q, (i, d) in enumerate(zip(ids, dists)):
            if i.shape != d.shape or i.ndim != 1:
                raise ValidationError(f"query {q}: mismatched id/distance lengths")
            if i.size and np.unique(i).size != i.size:
                raise ValidationError(f"query {q}: duplicate ids in range result")
            if d.size and float(d.max()) > self.radius:
                raise ValidationError(f"query {q}: distance exceeds radius {self.radius}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "distances", dists)

    @property
    def num_queries(self) -> int:
        return len(self.ids)

    @property
    def total(self) -> int:
        return int(sum(a.size for a in self.ids))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RangeGroundTruth)
            and np.float32(self.radius) == np.float32(other.radius)
            and len(self.ids) == len(other.ids)
            and all(np.array_equal(a, b) for a, b in zip(self.ids, other.ids))
            and all(np.array_equal(a, b) for a, b in zip(self.distances, other.distances))
        )


# ---------------------------------------------------------------------------
# distance kernels
# ---------------------------------------------------------------------------

def l2_squared_batch(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared L2 distance from one query to every row of ``points``.

    Both inputs must be float32. Accumulates per row in float32 so the result
    is identical wherever this kernel is invoked, regardless of which subset
    of rows is passed.
    """
    diff = points - query
    return np.einsum("ij,ij->i", diff, diff)


def inner_product_batch(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Dot product of one query with every row of ``points`` (float32)."""
    return np.einsum("ij,j->i", points, query)


def closeness_keys(values: np.ndarray, metric: Metric) -> np.ndarray:
    """Map metric values to keys where smaller always means closer."""
    return values if metric is Metric.L2 else -values


def metric_keys_batch(points: np.ndarray, query: np.ndarray, metric: Metric):
    """Return (values, keys): metric values and their closeness keys."""
    if metric is Metric.L2:
        vals = l2_squared_batch(points, query)
        return vals, vals
    vals = inner_product_batch(points, query)
    return vals, -vals


def compute_distance(a, b, metric: Metric = Metric.L2) -> float:
    """Distance between two vectors: squared L2 or inner product.

    Integer inputs are widened to float32 before arithmetic.
    """
    av = np.asarray(a, dtype=np.float32).ravel()
    bv = np.asarray(b, dtype=np.float32).ravel()
    if av.shape != bv.shape:
        raise ValidationError(f"dimension mismatch: {av.shape[0]} vs {bv.shape[0]}")
    if metric is Metric.L2:
        diff = av - bv
        return float(np.einsum("i,i->", diff, diff))
    return float(np.einsum("i,i->", av, bv))


# ---------------------------------------------------------------------------
# vector file i/o
# ---------------------------------------------------------------------------

def kind_for_path(path) -> ScalarKind:
    name = str(path)
    for ext, kind in _EXT_TO_KIND.items():
        if name.endswith(ext):
            return kind
    raise FormatError(f"unknown vector file extension: '{name}' "
                      f"(expected one of {sorted(_EXT_TO_KIND)})")


def write_vectors_to(dataset: VectorDataset, fp) -> None:
    fp.write(_HEADER.pack(dataset.count, dataset.dim))
    fp.write(np.ascontiguousarray(dataset.data, dtype=dataset.kind.dtype).tobytes())


def read_vectors_from(fp, kind: ScalarKind, name: str = "") -> VectorDataset:
    header = fp.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise FormatError("vector file shorter than 8-byte header")
    count, dim = _HEADER.unpack(header)
    if dim == 0:
        raise FormatError("vector file declares dim=0")
    payload = fp.read()
    expected = count * dim * kind.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"vector file truncated or oversized: header says {count}x{dim} "
            f"({expected} payload bytes), found {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=kind.dtype).reshape(count, dim)
    return VectorDataset(kind=kind, data=arr, name=name)


def write_vectors(dataset: VectorDataset, path) -> None:
    """Write a dataset to ``path``. The extension must match the scalar kind."""
    kind = kind_for_path(path)
    if kind is not dataset.kind:
        raise FormatError(
            f"extension of '{path}' implies {kind.value}, dataset is {dataset.kind.value}"
        )
    with open(path, "wb") as fp:
        write_vectors_to(dataset, fp)


def read_vectors(path) -> VectorDataset:
    """Read a dataset; scalar kind is taken from the file extension."""
    kind = kind_for_path(path)
    name = _stem(path)
    with open(path, "rb") as fp:
        return read_vectors_from(fp, kind, name=name)


def vectors_to_bytes(dataset: VectorDataset) -> bytes:
    buf = io.BytesIO()
    write_vectors_to(dataset, buf)
    return buf.getvalue()


def vectors_from_bytes(data: bytes, kind: ScalarKind, name: str = "") -> VectorDataset:
    return read_vectors_from(io.BytesIO(data), kind, name=name)


def _stem(path) -> str:
    name = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    for ext in list(_EXT_TO_KIND) + [".knn.gt", ".range.gt"]:
        if name.endswith(ext):
            return name[: -len(ext)]
    return name


# ---------------------------------------------------------------------------
# ground-truth file i/o
# ---------------------------------------------------------------------------

def write_knn_gt(gt: KnnGroundTruth, path) -> None:
    with open(path, "wb") as fp:
        fp.write(_HEADER.pack(gt.num_queries, gt.k))
        fp.write(np.ascontiguousarray(gt.ids, dtype="<u4").tobytes())
        fp.write(np.ascontiguousarray(gt.distances, dtype="<f4").tobytes())


def read_knn_gt(path) -> KnnGroundTruth:
    with open(path, "rb") as fp:
        header = fp.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError("ground-truth file shorter than 8-byte header")
        n_q, k = _HEADER.unpack(header)
        if k == 0:
            raise FormatError("ground-truth file declares k=0")
        payload = fp.read()
    expected = n_q * k * 8
    if len(payload) != expected:
        raise FormatError(
            f"ground-truth payload mismatch: header says {n_q} queries x k={k} "
            f"({expected} bytes), found {len(payload)}"
        )
    ids = np.frombuffer(payload[: n_q * k * 4], dtype="<u4").reshape(n_q, k)
    dists = np.frombuffer(payload[n_q * k * 4:], dtype="<f4").reshape(n_q, k)
    return KnnGroundTruth(k=k, ids=ids, distances=dists)


def write_range_gt(gt: RangeGroundTruth, path) -> None:
    counts = np.array([a.size for a in gt.ids], dtype="<u4")
    flat_ids = (np.concatenate(gt.ids) if gt.ids else np.empty(0, np.uint32))
    flat_dists = (np.concatenate(gt.distances) if gt.distances else np.empty(0, np.float32))
    with open(path, "wb") as fp:
        fp.write(_HEADER.pack(gt.num_queries, gt.total))
        fp.write(np.float32(gt.radius).tobytes())
        fp.write(counts.tobytes())
        fp.write(np.ascontiguousarray(flat_ids, dtype="<u4").tobytes())
        fp.write(np.ascontiguousarray(flat_dists, dtype="<f4").tobytes())


def read_range_gt(path) -> RangeGroundTruth:
    with open(path, "rb") as fp:
        header = fp.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError("ground-truth file shorter than 8-byte header")
        n_q, total = _HEADER.unpack(header)
        radius_bytes = fp.read(4)
        if len(radius_bytes) < 4:
            raise FormatError("range ground-truth file missing radius field")
        radius = float(np.frombuffer(radius_bytes, dtype="<f4")[0])
        payload = fp.read()
    expected = n_q * 4 + total * 8
    if len(payload) != expected:
        raise FormatError(
            f"range ground-truth payload mismatch: expected {expected} bytes "
            f"for {n_q} queries / {total} results, found {len(payload)}"
        )
    counts = np.frombuffer(payload[: n_q * 4], dtype="<u4")
    if int(counts.sum()) != total:
        raise FormatError(
            f"range ground-truth counts sum to {int(counts.sum())}, header says {total}"
        )
    ids = np.frombuffer(payload[n_q * 4: n_q * 4 + total * 4], dtype="<u4")
    dists = np.frombuffer(payload[n_q * 4 + total * 4:], dtype="<f4")
    offsets = np.zeros(n_q + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return RangeGroundTruth(
        radius=radius,
        ids=[ids[offsets[q]: offsets[q + 1]] for q in range(n_q)],
        distances=[dists[offsets[q]: offsets[q + 1]] for q in range(n_q)],
    )


# ---------------------------------------------------------------------------
# synthetic generation and slicing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded Gaussian-mixture dataset plus query set.

    Identical specs always produce bit-identical outputs.
    """

    n: int
    dim: int
    kind: ScalarKind = ScalarKind.F32
    n_clusters: int = 16
    cluster_std: float = 0.0  # 0 selects a kind-appropriate default
    n_queries: int = 100
    seed: int = 0
    query_mode: QueryMode = QueryMode.IN_DISTRIBUTION


_KIND_RANGE = {
    ScalarKind.U8: (0.0, 255.0),
    ScalarKind.I8: (-128.0, 127.0),
    ScalarKind.F32: (-1.0, 1.0),
}


def _quantize(values: np.ndarray, kind: ScalarKind) -> np.ndarray:
    lo, hi = _KIND_RANGE[kind]
    if kind is ScalarKind.F32:
        return values.astype(np.float32)
    return np.clip(np.rint(values), lo, hi).astype(kind.dtype)


def generate_synthetic(spec: SyntheticSpec):
    """Generate (base, queries) datasets from a seeded Gaussian mixture.

    Base points come from ``n_clusters`` isotropic Gaussians with means drawn
    uniformly over the central band of the scalar kind's range. In-distribution
    queries are fresh draws from the same mixture; out-of-distribution queries
    come from a disjoint mixture with shifted means and doubled spread.
    """
    if spec.n < 0 or spec.n_queries < 1 or spec.dim < 1:
        raise ValidationError("invalid synthetic spec: need n >= 0, n_queries >= 1, dim >= 1")
    if spec.n_clusters < 1:
        raise ValidationError("n_clusters must be >= 1")
    if spec.n_clusters > max(spec.n, 1):
        raise ValidationError(f"n_clusters={spec.n_clusters} exceeds n={spec.n}")
    lo, hi = _KIND_RANGE[spec.kind]
    width = hi - lo
    std = spec.cluster_std if spec.cluster_std else 0.05 * width
    if std <= 0:
        raise ValidationError("cluster_std must be > 0")

    rng = np.random.default_rng(spec.seed)
    means = rng.uniform(lo + 0.2 * width, hi - 0.2 * width, size=(spec.n_clusters, spec.dim))
    assign = rng.integers(0, spec.n_clusters, size=spec.n)
    base_vals = means[assign] + rng.normal(0.0, std, size=(spec.n, spec.dim))

    if spec.query_mode is QueryMode.IN_DISTRIBUTION:
        q_means, q_std = means, std
    else:
        shift = rng.uniform(0.15 * width, 0.35 * width, size=(spec.n_clusters, spec.dim))
        signs = rng.integers(0, 2, size=(spec.n_clusters, spec.dim)) * 2 - 1
        q_means, q_std = means + shift * signs, 2.0 * std
    q_assign = rng.integers(0, spec.n_clusters, size=spec.n_queries)
    query_vals = q_means[q_assign] + rng.normal(0.0, q_std, size=(spec.n_queries, spec.dim))

    tag = f"synthetic-{spec.kind.value}-{spec.n}x{spec.dim}-seed{spec.seed}"
    base = VectorDataset(spec.kind, _quantize(base_vals, spec.kind), name=tag)
    queries = VectorDataset(
        spec.kind, _quantize(query_vals, spec.kind),
        name=f"{tag}-queries-{spec.query_mode.value}",
    )
    return base, queries


def slice_prefix(dataset: VectorDataset, n: int) -> VectorDataset:
    """First ``n`` rows as a new dataset. Downstream ground truth must be
    recomputed against the slice; ids refer to positions within it."""
    if n > dataset.count:
        raise ValidationError(f"cannot slice {n} rows from {dataset.count}")
    if n < 0:
        raise ValidationError("slice size must be >= 0")
    return VectorDataset(dataset.kind, dataset.data[:n].copy(),
                         name=f"{dataset.name}[:{n}]" if dataset.name else f"slice{n}")


def slice_rows(dataset: VectorDataset, lo: int, hi: int) -> VectorDataset:
    """Internal helper: rows [lo, hi) as a dataset view for query chunking."""
    return VectorDataset(dataset.kind, dataset.data[lo:hi], name=dataset.name)
