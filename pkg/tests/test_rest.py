"""Protocol server and remote-index adaptor: loopback equivalence and error
surfacing."""

import base64
import json
import threading
import time
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

import bigann_bench as bb
from bigann_bench.errors import ProtocolError
from bigann_bench.rest import PROTOCOL_VERSION, remote_index, serve_algorithm


@pytest.fixture(scope="module")
def data():
    spec = bb.SyntheticSpec(n=1000, dim=16, seed=71, n_queries=25, n_clusters=5)
    base, queries = bb.generate_synthetic(spec)
    return base, queries


LOOPBACK_ALGOS = [
    ("flat", {}, {}),
    ("ivf", {"nlist": 16, "seed": 1}, {"nprobe": 4}),
    ("ivf", {"nlist": 16, "encoding": "sq8", "seed": 1}, {"nprobe": 4}),
    ("ivfpq", {"nlist": 8, "m": 4, "nbits": 4, "seed": 1}, {"nprobe": 4}),
    ("vamana", {"max_degree": 16, "seed": 1}, {"search_width": 40}),
]


class TestLoopback:

    @pytest.mark.parametrize("algo,bparams,sparams", LOOPBACK_ALGOS)
    def test_knn_results_bit_identical(self, data, algo, bparams, sparams):
        base, queries = data
        local = bb.create_index(algo)
        local.build(base, bparams)
        with serve_algorithm(lambda: bb.create_index(algo)) as server:
            remote = remote_index(server.address)
            remote.build(base, bparams)
            got = remote.search_knn(queries, 10, sparams)
        want = local.search_knn(queries, 10, sparams)
        assert got == want

    @pytest.mark.parametrize("algo,bparams,sparams", [
        ("flat", {}, {}),
        ("ivf", {"nlist": 16, "seed": 1}, {"nprobe": 16}),
        ("vamana", {"max_degree": 16, "seed": 1}, {"search_width": 40}),
    ])
    def test_range_results_bit_identical(self, data, algo, bparams, sparams):
        base, queries = data
        gt = bb.brute_force_knn(base, queries, 10)
        radius = float(np.median(gt.distances[:, -1]))
        local = bb.create_index(algo)
        local.build(base, bparams)
        with serve_algorithm(lambda: bb.create_index(algo)) as server:
            remote = remote_index(server.address)
            remote.build(base, bparams)
            got = remote.search_range(queries, radius, sparams)
        assert got == local.search_range(queries, radius, sparams)

    def test_u8_payloads(self):
        spec = bb.SyntheticSpec(n=400, dim=8, kind=bb.ScalarKind.U8, seed=72,
                                n_queries=10)
        base, queries = bb.generate_synthetic(spec)
        local = bb.FlatIndex()
        local.build(base)
        with serve_algorithm(lambda: bb.FlatIndex()) as server:
            remote = remote_index(server.address)
            remote.build(base, {})
            got = remote.search_knn(queries, 5, {})
        assert got == local.search_knn(queries, 5, {})


class TestProtocolSurface:

    def test_status_idle_before_build(self):
        with serve_algorithm(lambda: bb.FlatIndex()) as server:
            with urllib.request.urlopen(server.address + "/v1/status") as resp:
                body = json.loads(resp.read())
        assert body["state"] == "idle"
        assert body["describe"] is None
        assert body["protocol"] == PROTOCOL_VERSION

    def test_status_ready_after_build(self, data):
        base, _ = data
        with serve_algorithm(lambda: bb.FlatIndex()) as server:
            remote = remote_index(server.address)
            remote.build(base, {})
            with urllib.request.urlopen(server.address + "/v1/status") as resp:
                body = json.loads(resp.read())
        assert body["state"] == "ready"
        assert body["describe"]["algorithm"] == "flat"
        assert body["index_size_bytes"] == base.data.nbytes

    def test_malformed_base64_is_a_400(self, data):
        base, _ = data
        with serve_algorithm(lambda: bb.FlatIndex()) as server:
            remote = remote_index(server.address)
            remote.build(base, {})
            payload = json.dumps({"protocol": PROTOCOL_VERSION,
                                  "queries": "@@not-base64@@", "k": 3}).encode()
            req = urllib.request.Request(
                server.address + "/v1/knn", data=payload,
                headers={"Content-Type": "application/json"}, method="POST")
            with pytest.raises(urllib.error.HTTPError) as err:
                urllib.request.urlopen(req)
            assert err.value.code == 400
            assert "base64" in json.loads(err.value.read())["error"]

    def test_version_mismatch_rejected_by_server(self):
        with serve_algorithm(lambda: bb.FlatIndex()) as server:
            payload = json.dumps({"protocol": 99, "search_params": {}}).encode()
            req = urllib.request.Request(
                server.address + "/v1/query_args", data=payload,
                headers={"Content-Type": "application/json"}, method="POST")
            with pytest.raises(urllib.error.HTTPError) as err:
                urllib.request.urlopen(req)
            assert err.value.code == 400
            assert json.loads(err.value.read())["code"] == "protocol_mismatch"

    def test_version_mismatch_rejected_by_client(self):
        class StaleHandler(BaseHTTPRequestHandler):
            def do_GET(self):
                body = json.dumps({"protocol": 0, "state": "idle"}).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *a):
                pass

        httpd = ThreadingHTTPServer(("127.0.0.1", 0), StaleHandler)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        try:
            host, port = httpd.server_address[:2]
            with pytest.raises(ProtocolError, match="version mismatch"):
                remote_index(f"http://{host}:{port}")
        finally:
            httpd.shutdown()
            httpd.server_close()

    def test_build_failure_propagates_message(self, data):
        base, _ = data
        with serve_algorithm(lambda: bb.IvfFlatIndex()) as server:
            remote = remote_index(server.address)
            with pytest.raises(ProtocolError, match="nlists"):
                remote.build(base, {"nlists": 4})

    def test_query_before_build_rejected(self, data):
        _, queries = data
        with serve_algorithm(lambda: bb.FlatIndex()) as server:
            remote = remote_index(server.address)
            with pytest.raises(ProtocolError, match="no index"):
                remote.search_knn(queries, 3, {})

    def test_concurrent_build_conflicts(self, data):
        base, _ = data

        class SlowFlat(bb.FlatIndex):
            def build(self, dataset, params=None):
                time.sleep(0.8)
                super().build(dataset, params)

        with serve_algorithm(lambda: SlowFlat()) as server:
            remote1 = remote_index(server.address)
            remote2 = remote_index(server.address)
            errors = []

            def second_build():
                time.sleep(0.2)
                try:
                    remote2.build(base, {})
                except ProtocolError as exc:
                    errors.append(str(exc))

            t = threading.Thread(target=second_build)
            t.start()
            remote1.build(base, {})
            t.join()
        assert errors and "already in progress" in errors[0]

    def test_unreachable_server(self):
        with pytest.raises(ProtocolError, match="cannot reach"):
            remote_index("http://127.0.0.1:1")
