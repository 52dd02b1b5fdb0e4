"""Experiment runner: timed batch searches against ground truth, run-record
persistence, and injectable clocks for exact timing tests."""

from __future__ import annotations

import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .dataset import KnnGroundTruth, RangeGroundTruth, VectorDataset, slice_rows
from .errors import FormatError, ValidationError
from .indexes.base import AnnIndex, Params, ResultSet
from .metrics import AccuracyKind, AccuracyReport, range_ap, recall_at_k

RUN_SCHEMA_VERSION = 1
MAX_QUERY_CONFIGS = 10
MIN_QUERY_SET = 10000


class Clock:
    """Monotonic nanosecond clock; injectable so timing math is testable."""

    def now(self) -> int:
        raise NotImplementedError


class MonotonicClock(Clock):
    def now(self) -> int:
        return time.perf_counter_ns()


class FakeClock(Clock):
    """Returns a scripted sequence of nanosecond timestamps."""

    def __init__(self, times_ns):
        self._times = list(times_ns)
        self._i = 0

    def now(self) -> int:
        if self._i >= len(self._times):
            raise ValidationError("fake clock exhausted")
        t = self._times[self._i]
        self._i += 1
        return t


@dataclass
class QueryConfig:
    """One named set of search parameters."""

    name: str
    params: Params = field(default_factory=Params)

    def __post_init__(self):
        object.__setattr__(self, "params", Params.of(self.params))


@dataclass
class RunRecord:
    """One (algorithm, dataset, build params, query config) measurement."""

    algorithm: str
    describe: dict
    dataset: str
    dataset_count: int
    config: str
    search_params: dict
    qps: float
    accuracy_kind: str
    accuracy: float
    build_seconds: float
    index_size_bytes: int
    wall_seconds: float
    num_queries: int
    k: int | None = None
    radius: float | None = None
    energy_joules: float | None = None
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["schema"] = RUN_SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        schema = d.pop("schema", None)
        if schema != RUN_SCHEMA_VERSION:
            raise FormatError(f"unsupported run record schema {schema!r}")
        return cls(**d)


def _timed_search(index: AnnIndex, queries: VectorDataset, clock: Clock,
                  workers: int, search):
    """Run one full-batch pass; wall time spans submission to last result."""
    if workers <= 1:
        start = clock.now()
        results = search(queries)
        end = clock.now()
    else:
        step = -(-queries.count // workers)
        chunks = [slice_rows(queries, lo, min(lo + step, queries.count))
                  for lo in range(0, queries.count, step)]
        start = clock.now()
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(search, chunks))
        end = clock.now()
        results = ResultSet.concat(parts)
    wall = (end - start) / 1e9
    if wall <= 0:
        raise ValidationError("clock reported non-positive wall time")
    return results, wall


def run_experiment(
    index: AnnIndex,
    dataset: VectorDataset,
    queries: VectorDataset,
    gt,
    configs,
    repeats: int = 1,
    clock: Clock | None = None,
    workers: int = 1,
    k: int = 10,
    build_seconds: float = 0.0,
    energy_joules: float | None = None,
) -> list:
    """Time each query configuration over the full query batch.

    Every config runs ``repeats`` timed passes; the reported QPS is the best
    pass (``num_queries / wall_seconds``). Accuracy is computed once from the
    first pass, outside the timed region; searches are deterministic so all
    passes return the same results. ``gt`` selects the query type: k-NN
    recall for KnnGroundTruth, range AP for RangeGroundTruth.
    """
    if not configs:
        raise ValidationError("at least one query configuration is required")
    if len(configs) > MAX_QUERY_CONFIGS:
        raise ValidationError(
            f"{len(configs)} query configurations given; the limit is {MAX_QUERY_CONFIGS}"
        )
    if gt.num_queries != queries.count:
        raise ValidationError(
            f"ground truth covers {gt.num_queries} queries, query set has {queries.count}"
        )
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")
    if queries.count < MIN_QUERY_SET:
        warnings.warn(
            f"query set has {queries.count} vectors; benchmark practice calls "
            f"for at least {MIN_QUERY_SET}",
            stacklevel=2,
        )
    clock = clock or MonotonicClock()

    if isinstance(gt, KnnGroundTruth):
        def make_search(params):
            return lambda qs: index.search_knn(qs, k, params)

        def score(results) -> AccuracyReport:
            return recall_at_k(results, gt, k)
    elif isinstance(gt, RangeGroundTruth):
        def make_search(params):
            return lambda qs: index.search_range(qs, gt.radius, params)

        def score(results) -> AccuracyReport:
            return range_ap(results, gt)
    else:
        raise ValidationError(f"unsupported ground truth type {type(gt).__name__}")

    records = []
    for config in configs:
        search = make_search(config.params)
        results, best_wall = _timed_search(index, queries, clock, workers, search)
        accuracy = score(results)
        for _ in range(repeats - 1):
            _, wall = _timed_search(index, queries, clock, workers, search)
            best_wall = min(best_wall, wall)
        records.append(RunRecord(
            algorithm=index.algorithm,
            describe=index.describe(),
            dataset=dataset.name,
            dataset_count=dataset.count,
            config=config.name,
            search_params=config.params.to_dict(),
            qps=queries.count / best_wall,
            accuracy_kind=accuracy.kind.value,
            accuracy=accuracy.value,
            build_seconds=build_seconds,
            index_size_bytes=index.index_size_bytes(),
            wall_seconds=best_wall,
            num_queries=queries.count,
            k=accuracy.k,
            radius=accuracy.radius,
            energy_joules=energy_joules,
            timestamp=time.time(),
        ))
    return records


def persist_runs(records, path, append: bool = False) -> None:
    """One self-contained JSON record per line; files concatenate cleanly."""
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as fp:
        for rec in records:
            fp.write(json.dumps(rec.to_dict(), sort_keys=True))
            fp.write("\n")


def load_runs(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(RunRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, TypeError, KeyError, FormatError) as exc:
                raise FormatError(f"{path}: malformed run record on line {lineno}: {exc}")
    return records
