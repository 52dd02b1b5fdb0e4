"""Index persistence (``.annidx``).

Layout, little-endian throughout:

    8-byte magic ``BANNIDX1``
    uint32 format version (currently 1)
    length-prefixed UTF-8 algorithm tag
    length-prefixed UTF-8 JSON metadata block
    uint32 array count, then per array:
        length-prefixed UTF-8 name, length-prefixed UTF-8 dtype string,
        uint32 ndim, ndim * uint64 shape, uint64 payload bytes, raw data

A loaded index answers searches bit-identically to the instance that was
saved.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import FormatError
from .base import AnnIndex, index_class

MAGIC = b"BANNIDX1"
VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def _write_blob(fp, data: bytes):
    fp.write(_U32.pack(len(data)))
    fp.write(data)


def _read_exact(fp, n: int) -> bytes:
    data = fp.read(n)
    if len(data) != n:
        raise FormatError(f"index file truncated: wanted {n} bytes, got {len(data)}")
    return data


def _read_blob(fp) -> bytes:
    (n,) = _U32.unpack(_read_exact(fp, 4))
    return _read_exact(fp, n)


def _write_array(fp, name: str, arr: np.ndarray):
    arr = np.ascontiguousarray(arr)
    le = arr.dtype.newbyteorder("<")
    _write_blob(fp, name.encode())
    _write_blob(fp, le.str.encode())
    fp.write(_U32.pack(arr.ndim))
    for s in arr.shape:
        fp.write(_U64.pack(s))
    payload = arr.astype(le, copy=False).tobytes()
    fp.write(_U64.pack(len(payload)))
    fp.write(payload)


def _read_array(fp):
    name = _read_blob(fp).decode()
    dtype = np.dtype(_read_blob(fp).decode())
    (ndim,) = _U32.unpack(_read_exact(fp, 4))
    shape = tuple(_U64.unpack(_read_exact(fp, 8))[0] for _ in range(ndim))
    (nbytes,) = _U64.unpack(_read_exact(fp, 8))
    arr = np.frombuffer(_read_exact(fp, nbytes), dtype=dtype).reshape(shape)
    return name, arr


def save_index(index: AnnIndex, path) -> None:
    meta, arrays = index._state()
    with open(path, "wb") as fp:
        fp.write(MAGIC)
        fp.write(_U32.pack(VERSION))
        _write_blob(fp, index.algorithm.encode())
        _write_blob(fp, json.dumps(meta, sort_keys=True).encode())
        fp.write(_U32.pack(len(arrays)))
        for name, arr in arrays.items():
            _write_array(fp, name, arr)


def load_index(path) -> AnnIndex:
    with open(path, "rb") as fp:
        magic = fp.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"not an index file: bad magic {magic!r}")
        (version,) = _U32.unpack(_read_exact(fp, 4))
        if version != VERSION:
            raise FormatError(f"unsupported index format version {version}")
        algorithm = _read_blob(fp).decode()
        meta = json.loads(_read_blob(fp).decode())
        (n_arrays,) = _U32.unpack(_read_exact(fp, 4))
        arrays = dict(_read_array(fp) for _ in range(n_arrays))
    cls = index_class(algorithm)
    return cls._restore(meta, arrays)
