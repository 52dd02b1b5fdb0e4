"""Client/server protocol for benchmarking out-of-process algorithms.

The server wraps one index implementation behind a small JSON-over-HTTP
surface; the client adaptor satisfies the in-process index contract, so the
harness can drive a remote algorithm unchanged. Vector payloads travel as
base64 of the binary dataset format, bit-exact.

Endpoints (all bodies JSON, all carrying ``"protocol"``):

    GET  /v1/status                                -> state, describe, size
    POST /v1/build      {dataset_path, build_params}
    POST /v1/query_args {search_params}
    POST /v1/knn        {queries, queries_kind, k} -> {ids, distances}
    POST /v1/range      {queries, queries_kind, radius}
                                                   -> {counts, ids, distances}

The server accepts one build at a time (409 on a concurrent attempt) but
serves queries concurrently.
"""

from __future__ import annotations

import base64
import binascii
import json
import tempfile
import threading
import time
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .dataset import (
    ScalarKind,
    VectorDataset,
    read_vectors,
    vectors_from_bytes,
    vectors_to_bytes,
)
from .errors import BenchError, ProtocolError, ValidationError
from .indexes.base import AnnIndex, Params, ResultSet

PROTOCOL_VERSION = 1


class _ServerState:
    def __init__(self, index_factory):
        self.index_factory = index_factory
        self.index: AnnIndex | None = None
        self.state = "idle"
        self.build_lock = threading.Lock()
        self.params_lock = threading.Lock()
        self.search_params = Params()


def _decode_queries(body: dict) -> VectorDataset:
    try:
        raw = base64.b64decode(body["queries"], validate=True)
    except (binascii.Error, ValueError, TypeError) as exc:
        raise ValidationError(f"queries field is not valid base64: {exc}")
    kind = ScalarKind(body.get("queries_kind", "f32"))
    return vectors_from_bytes(raw, kind, name="remote-queries")


class _Handler(BaseHTTPRequestHandler):
    # set by serve_algorithm
    ctx: _ServerState = None

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _reply(self, status: int, payload: dict):
        payload = dict(payload)
        payload["protocol"] = PROTOCOL_VERSION
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw.decode() or "{}")
        except json.JSONDecodeError as exc:
            raise ValidationError(f"request body is not valid JSON: {exc}")
        if body.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: client sent {body.get('protocol')!r}, "
                f"server speaks {PROTOCOL_VERSION}"
            )
        return body

    def do_GET(self):
        if self.path != "/v1/status":
            self._reply(404, {"error": f"no such endpoint {self.path}"})
            return
        ctx = self.ctx
        describe = ctx.index.describe() if ctx.state == "ready" else None
        size = ctx.index.index_size_bytes() if ctx.state == "ready" else None
        self._reply(200, {"state": ctx.state, "describe": describe,
                          "index_size_bytes": size})

    def do_POST(self):
        ctx = self.ctx
        try:
            body = self._body()
            if self.path == "/v1/build":
                self._handle_build(ctx, body)
            elif self.path == "/v1/query_args":
                with ctx.params_lock:
                    ctx.search_params = Params.of(body.get("search_params", {}))
                self._reply(200, {"ok": True})
            elif self.path == "/v1/knn":
                self._handle_knn(ctx, body)
            elif self.path == "/v1/range":
                self._handle_range(ctx, body)
            else:
                self._reply(404, {"error": f"no such endpoint {self.path}"})
        except ProtocolError as exc:
            self._reply(400, {"error": str(exc), "code": "protocol_mismatch"})
        except KeyError as exc:
            self._reply(400, {"error": f"missing required field {exc}"})
        except (BenchError, FileNotFoundError, ValueError) as exc:
            self._reply(400, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive
            self._reply(500, {"error": f"{type(exc).__name__}: {exc}"})

    def _handle_build(self, ctx: _ServerState, body: dict):
        if not ctx.build_lock.acquire(blocking=False):
            self._reply(409, {"error": "a build is already in progress"})
            return
        try:
            ctx.state = "building"
            dataset = read_vectors(body["dataset_path"])
            index = ctx.index_factory()
            start = time.perf_counter()
            index.build(dataset, Params.of(body.get("build_params", {})))
            ctx.index = index
            ctx.state = "ready"
            self._reply(200, {"ok": True, "describe": index.describe(),
                              "build_seconds": time.perf_counter() - start})
        except Exception:
            ctx.state = "idle" if ctx.index is None else "ready"
            raise
        finally:
            ctx.build_lock.release()

    def _ready_index(self, ctx: _ServerState) -> AnnIndex:
        if ctx.state != "ready" or ctx.index is None:
            raise ValidationError("no index has been built yet")
        return ctx.index

    def _handle_knn(self, ctx: _ServerState, body: dict):
        index = self._ready_index(ctx)
        queries = _decode_queries(body)
        k = int(body["k"])
        with ctx.params_lock:
            params = ctx.search_params
        results = index.search_knn(queries, k, params)
        self._reply(200, {
            "ids": [a.tolist() for a in results.ids],
            "distances": [a.tolist() for a in results.distances],
        })

    def _handle_range(self, ctx: _ServerState, body: dict):
        index = self._ready_index(ctx)
        queries = _decode_queries(body)
        radius = float(body["radius"])
        with ctx.params_lock:
            params = ctx.search_params
        results = index.search_range(queries, radius, params)
        self._reply(200, {
            "counts": [int(a.size) for a in results.ids],
            "ids": np.concatenate(results.ids).tolist() if results.ids else [],
            "distances": np.concatenate(results.distances).tolist()
                         if results.distances else [],
        })


class AlgorithmServer:
    """Serves one index implementation over the benchmark protocol."""

    def __init__(self, index_factory, host: str = "127.0.0.1", port: int = 0):
        ctx = _ServerState(index_factory)
        handler = type("BoundHandler", (_Handler,), {"ctx": ctx})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None
        self.ctx = ctx

    @property
    def address(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self):
        self._httpd.serve_forever()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve_algorithm(index_factory, host: str = "127.0.0.1", port: int = 0) -> AlgorithmServer:
    """Create (but do not start) a server for an index factory. Use
    ``.start()/.stop()`` or a ``with`` block; ``.serve_forever()`` blocks."""
    return AlgorithmServer(index_factory, host, port)


class RemoteIndex(AnnIndex):
    """Index adaptor backed by a protocol server.

    ``build`` writes the dataset to a temp file and sends its path, so the
    server must share a filesystem with the client (true for the loopback
    benchmarking setup this models).
    """

    algorithm = "remote"

    def __init__(self, endpoint: str):
        self.endpoint = endpoint.rstrip("/")
        self._describe: dict | None = None
        status = self._get("/v1/status")
        if status.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: server speaks {status.get('protocol')!r}, "
                f"client speaks {PROTOCOL_VERSION}"
            )

    # -- transport ----------------------------------------------------------

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = self.endpoint + path
        data = None
        headers = {}
        if payload is not None:
            body = dict(payload)
            body["protocol"] = PROTOCOL_VERSION
            data = json.dumps(body).encode()
            headers["Content-Type"] = "application/json"
        req = urllib.request.Request(url, data=data, headers=headers, method=method)
        try:
            with urllib.request.urlopen(req, timeout=600) as resp:
                return json.loads(resp.read().decode())
        except urllib.error.HTTPError as exc:
            try:
                message = json.loads(exc.read().decode()).get("error", str(exc))
            except Exception:
                message = str(exc)
            raise ProtocolError(f"server returned {exc.code}: {message}")
        except urllib.error.URLError as exc:
            raise ProtocolError(f"cannot reach {url}: {exc.reason}")

    def _get(self, path: str) -> dict:
        return self._request("GET", path)

    def _post(self, path: str, payload: dict) -> dict:
        return self._request("POST", path, payload)

    # -- AnnIndex surface ----------------------------------------------------

    def build(self, dataset: VectorDataset, params=None) -> None:
        params = Params.of(params)
        with tempfile.TemporaryDirectory(prefix="bigann-remote-") as tmp:
            path = Path(tmp) / f"dataset{dataset.kind.extension}"
            with open(path, "wb") as fp:
                fp.write(vectors_to_bytes(dataset))
            reply = self._post("/v1/build", {
                "dataset_path": str(path),
                "build_params": params.to_dict(),
            })
        self._describe = reply.get("describe")
        self._built = True

    def _send_queries(self, path: str, queries: VectorDataset, extra: dict) -> dict:
        payload = {
            "queries": base64.b64encode(vectors_to_bytes(queries)).decode(),
            "queries_kind": queries.kind.value,
        }
        payload.update(extra)
        return self._post(path, payload)

    def search_knn(self, queries: VectorDataset, k: int, params=None) -> ResultSet:
        self._post("/v1/query_args", {"search_params": Params.of(params).to_dict()})
        reply = self._send_queries("/v1/knn", queries, {"k": k})
        return ResultSet(
            [np.asarray(a, dtype=np.uint32) for a in reply["ids"]],
            [np.asarray(a, dtype=np.float32) for a in reply["distances"]],
        )

    def search_range(self, queries: VectorDataset, radius: float, params=None) -> ResultSet:
        self._post("/v1/query_args", {"search_params": Params.of(params).to_dict()})
        reply = self._send_queries("/v1/range", queries, {"radius": float(radius)})
        counts = reply["counts"]
        ids = np.asarray(reply["ids"], dtype=np.uint32)
        dists = np.asarray(reply["distances"], dtype=np.float32)
        offsets = np.zeros(len(counts) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return ResultSet(
            [ids[offsets[q]: offsets[q + 1]] for q in range(len(counts))],
            [dists[offsets[q]: offsets[q + 1]] for q in range(len(counts))],
        )

    def describe(self) -> dict:
        if self._describe is None:
            self._describe = self._get("/v1/status").get("describe")
        return {"algorithm": self.algorithm, "remote": self._describe}

    def index_size_bytes(self) -> int:
        size = self._get("/v1/status").get("index_size_bytes")
        if size is None:
            raise ValidationError("remote server has no built index")
        return int(size)


def remote_index(endpoint: str) -> RemoteIndex:
    """Connect to a protocol server and return the index adaptor."""
    return RemoteIndex(endpoint)
