"""Index abstraction shared by all baseline algorithms."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable, NamedTuple

import numpy as np

from ..dataset import Metric, VectorDataset
from ..errors import UnknownParameterError, ValidationError


class Params:
    """String-keyed build/search parameter map with typed accessors.

    Unknown keys are rejected with the offending key named, so typos in
    experiment files fail loudly instead of silently using defaults.
    """

    def __init__(self, values: dict | None = None):
        self._values = dict(values or {})

    @classmethod
    def of(cls, params) -> "Params":
        if params is None:
            return cls()
        if isinstance(params, Params):
            return params
        if isinstance(params, dict):
            return cls(params)
        raise ValidationError(f"cannot interpret {type(params).__name__} as parameters")

    def to_dict(self) -> dict:
        return dict(self._values)

    def __contains__(self, key) -> bool:
        return key in self._values

    def __eq__(self, other) -> bool:
        return isinstance(other, Params) and self._values == other._values

    def __repr__(self) -> str:
        return f"Params({self._values!r})"

    def ensure_known(self, allowed) -> None:
        allowed = set(allowed)
        for key in self._values:
            if key not in allowed:
                raise UnknownParameterError(
                    f"unknown parameter '{key}' (accepted: {', '.join(sorted(allowed))})"
                )

    def _get(self, key, default):
        if key not in self._values:
            if default is None:
                raise ValidationError(f"missing required parameter '{key}'")
            return default
        return self._values[key]

    def get_int(self, key: str, default: int | None = None) -> int:
        val = self._get(key, default)
        if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
            if isinstance(val, float) and val == int(val):
                return int(val)
            raise ValidationError(f"parameter '{key}' must be an integer, got {val!r}")
        return int(val)

    def get_float(self, key: str, default: float | None = None) -> float:
        val = self._get(key, default)
        if isinstance(val, bool) or not isinstance(val, (int, float, np.floating, np.integer)):
            raise ValidationError(f"parameter '{key}' must be a number, got {val!r}")
        return float(val)

    def get_bool(self, key: str, default: bool | None = None) -> bool:
        val = self._get(key, default)
        if not isinstance(val, bool):
            raise ValidationError(f"parameter '{key}' must be a boolean, got {val!r}")
        return val

    def get_str(self, key: str, default: str | None = None) -> str:
        val = self._get(key, default)
        if not isinstance(val, str):
            raise ValidationError(f"parameter '{key}' must be a string, got {val!r}")
        return val

    def get_metric(self, key: str = "metric", default: str = "l2") -> Metric:
        try:
            return Metric(self.get_str(key, default))
        except ValueError:
            raise ValidationError(
                f"parameter '{key}' must be one of {[m.value for m in Metric]}"
            ) from None


class Neighbor(NamedTuple):
    id: int
    distance: float


class ResultSet:
    """Per-query neighbor lists, sorted by closeness then id.

    ``ids[q]`` is uint32, ``distances[q]`` float32; lengths vary per query
    (at most k for k-NN searches).
    """

    def __init__(self, ids: list, distances: list):
        if len(ids) != len(distances):
            raise ValidationError("ids and distances must have one list per query")
        self.ids = [np.ascontiguousarray(a, dtype=np.uint32) for a in ids]
        self.distances = [np.ascontiguousarray(a, dtype=np.float32) for a in distances]
        for i, d in zip(self.ids, self.distances):
            if i.shape != d.shape:
                raise ValidationError("per-query id/distance length mismatch")

    @property
    def num_queries(self) -> int:
        return len(self.ids)

    def neighbors(self, q: int) -> list:
        return [Neighbor(int(i), float(d)) for i, d in zip(self.ids[q], self.distances[q])]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ResultSet)
            and len(self.ids) == len(other.ids)
            and all(np.array_equal(a, b) for a, b in zip(self.ids, other.ids))
            and all(np.array_equal(a, b) for a, b in zip(self.distances, other.distances))
        )

    @staticmethod
    def concat(parts) -> "ResultSet":
        ids: list = []
        dists: list = []
        for part in parts:
            ids.extend(part.ids)
            dists.extend(part.distances)
        return ResultSet(ids, dists)


class AnnIndex(ABC):
    """Uniform build/search surface over the baseline index algorithms.

    After ``build`` an index is immutable; searches are read-only, and the
    same queries with the same parameters always yield identical results.
    """

    algorithm: str = ""

    @abstractmethod
    def build(self, dataset: VectorDataset, params=None) -> None:
        ...

    @abstractmethod
    def search_knn(self, queries: VectorDataset, k: int, params=None) -> ResultSet:
        ...

    @abstractmethod
    def search_range(self, queries: VectorDataset, radius: float, params=None) -> ResultSet:
        ...

    @abstractmethod
    def describe(self) -> dict:
        """Algorithm name plus the build parameters actually in effect."""

    @abstractmethod
    def index_size_bytes(self) -> int:
        ...

    def _require_built(self):
        if getattr(self, "_built", False) is not True:
            raise ValidationError(f"{self.algorithm} index has not been built")

    def _check_queries(self, queries: VectorDataset, dim: int):
        if queries.dim != dim:
            raise ValidationError(
                f"query dim {queries.dim} does not match index dim {dim}"
            )


_REGISTRY: dict = {}


def register_index(cls):
    """Class decorator: make an index constructible by its algorithm name."""
    _REGISTRY[cls.algorithm] = cls
    return cls


def index_class(algorithm: str):
    try:
        return _REGISTRY[algorithm]
    except KeyError:
        raise ValidationError(
            f"unknown algorithm '{algorithm}' (available: {', '.join(sorted(_REGISTRY))})"
        ) from None


def create_index(algorithm: str) -> AnnIndex:
    return index_class(algorithm)()


def available_algorithms() -> list:
    return sorted(_REGISTRY)
