"""Baseline index implementations behind a uniform build/search surface."""

from .base import (
    AnnIndex,
    Neighbor,
    Params,
    ResultSet,
    available_algorithms,
    create_index,
    index_class,
    register_index,
)
from .flat import FlatIndex
from .ivf import IvfFlatIndex
from .ivfpq import IvfPqIndex
from .storage import load_index, save_index
from .vamana import VamanaIndex

__all__ = [
    "AnnIndex",
    "FlatIndex",
    "IvfFlatIndex",
    "IvfPqIndex",
    "Neighbor",
    "Params",
    "ResultSet",
    "VamanaIndex",
    "available_algorithms",
    "create_index",
    "index_class",
    "load_index",
    "register_index",
    "save_index",
]
