"""End-to-end command line pipeline and its validation surface."""

import json

import numpy as np
import pytest

import bigann_bench as bb
from bigann_bench.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def no_small_query_warning():
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*at least 10000.*")
        yield


def write_params(path, build=None, queries=None):
    doc = {"build": build or {}, "queries": queries or [{"name": "c0", "params": {}}]}
    path.write_text(json.dumps(doc))
    return path


class TestPipeline:

    def test_gen_gt_build_run_score_plot(self, tmp_path, capsys, no_small_query_warning):
        out = tmp_path / "work"
        assert run_cli("gen", "--out", str(out), "--name", "d", "--count", "3000",
                       "--dim", "16", "--clusters", "8", "--num-queries", "50",
                       "--seed", "1") == 0
        base = out / "d.base.fbin"
        queries = out / "d.queries.fbin"
        assert base.exists() and queries.exists()

        assert run_cli("gt", "--dataset", str(base), "--queries", str(queries),
                       "--out", str(out), "--name", "d", "--k", "10") == 0
        gt = out / "d.knn.gt"
        assert gt.exists()

        params = write_params(out / "flat.json")
        assert run_cli("build", "--algo", "flat", "--dataset", str(base),
                       "--params", str(params), "--out", str(out)) == 0
        assert (out / "flat.annidx").exists()

        capsys.readouterr()
        assert run_cli("run", "--algo", "flat", "--dataset", str(base),
                       "--queries", str(queries), "--gt", str(gt),
                       "--params", str(params), "--out", str(out)) == 0
        printed = capsys.readouterr().out
        assert "c0: qps=" in printed and "accuracy=1.0000" in printed
        runs = out / "runs.jsonl"
        records = bb.load_runs(runs)
        assert len(records) == 1 and records[0].accuracy == 1.0

        assert run_cli("plot", "--runs", str(runs), "--out", str(out),
                       "--format", "csv") == 0
        assert (out / "tradeoff.csv").exists()
        assert run_cli("plot", "--runs", str(runs), "--out", str(out),
                       "--format", "svg", "--threshold", "1000") == 0
        assert (out / "tradeoff.svg").exists()

    def test_run_with_prebuilt_index(self, tmp_path, capsys, no_small_query_warning):
        out = tmp_path / "w"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "1000",
                "--dim", "8", "--num-queries", "20", "--seed", "2")
        base, queries = out / "d.base.fbin", out / "d.queries.fbin"
        run_cli("gt", "--dataset", str(base), "--queries", str(queries),
                "--out", str(out), "--name", "d", "--k", "10")
        params = write_params(out / "p.json", build={"nlist": 8},
                              queries=[{"name": "probe-all", "params": {"nprobe": 8}}])
        run_cli("build", "--algo", "ivf", "--dataset", str(base),
                "--params", str(params), "--out", str(out))
        capsys.readouterr()
        assert run_cli("run", "--dataset", str(base), "--queries", str(queries),
                       "--gt", str(out / "d.knn.gt"), "--params", str(params),
                       "--out", str(out), "--index", str(out / "ivf.annidx")) == 0
        assert "accuracy=1.0000" in capsys.readouterr().out

    def test_range_pipeline(self, tmp_path, capsys, no_small_query_warning):
        out = tmp_path / "w"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "1500",
                "--dim", "8", "--num-queries", "30", "--seed", "3")
        base, queries = out / "d.base.fbin", out / "d.queries.fbin"
        ds = bb.read_vectors(base)
        qs = bb.read_vectors(queries)
        knn = bb.brute_force_knn(ds, qs, 10)
        radius = float(np.median(knn.distances[:, -1]))
        assert run_cli("gt", "--dataset", str(base), "--queries", str(queries),
                       "--out", str(out), "--name", "d",
                       "--radius", str(radius)) == 0
        params = write_params(out / "p.json")
        capsys.readouterr()
        assert run_cli("run", "--algo", "flat", "--dataset", str(base),
                       "--queries", str(queries), "--gt", str(out / "d.range.gt"),
                       "--params", str(params), "--out", str(out)) == 0
        assert "accuracy=1.0000" in capsys.readouterr().out

    def test_gen_is_idempotent(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            run_cli("gen", "--out", str(out), "--name", "d", "--count", "500",
                    "--dim", "8", "--num-queries", "10", "--seed", "9")
        assert (out1 / "d.base.fbin").read_bytes() == (out2 / "d.base.fbin").read_bytes()
        assert (out1 / "d.queries.fbin").read_bytes() == \
               (out2 / "d.queries.fbin").read_bytes()

    def test_build_is_idempotent(self, tmp_path):
        out = tmp_path / "w"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "600",
                "--dim", "8", "--num-queries", "10", "--seed", "4")
        params = write_params(out / "p.json", build={"nlist": 4})
        for name in ("i1", "i2"):
            run_cli("build", "--algo", "ivf", "--dataset", str(out / "d.base.fbin"),
                    "--params", str(params), "--out", str(out), "--name", name,
                    "--seed", "5")
        assert (out / "i1.annidx").read_bytes() == (out / "i2.annidx").read_bytes()


class TestValidation:

    def test_eleven_query_configs_exit_one(self, tmp_path, capsys):
        out = tmp_path / "w"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "200",
                "--dim", "4", "--num-queries", "5", "--seed", "0")
        run_cli("gt", "--dataset", str(out / "d.base.fbin"),
                "--queries", str(out / "d.queries.fbin"), "--out", str(out),
                "--name", "d", "--k", "5")
        params = write_params(
            out / "p.json",
            queries=[{"name": f"c{i}", "params": {}} for i in range(11)])
        code = run_cli("run", "--algo", "flat", "--dataset", str(out / "d.base.fbin"),
                       "--queries", str(out / "d.queries.fbin"),
                       "--gt", str(out / "d.knn.gt"), "--params", str(params),
                       "--out", str(out))
        assert code == 1
        assert "limit is 10" in capsys.readouterr().err

    def test_missing_input_exit_one(self, tmp_path, capsys):
        code = run_cli("gt", "--dataset", str(tmp_path / "nope.fbin"),
                       "--queries", str(tmp_path / "nope.fbin"),
                       "--out", str(tmp_path), "--k", "5")
        assert code == 1
        assert "not found" in capsys.readouterr().err

    def test_malformed_param_file_exit_one(self, tmp_path, capsys):
        out = tmp_path / "w"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "200",
                "--dim", "4", "--num-queries", "5", "--seed", "0")
        bad = out / "p.json"
        bad.write_text("{ nope")
        code = run_cli("build", "--algo", "flat", "--dataset",
                       str(out / "d.base.fbin"), "--params", str(bad),
                       "--out", str(out))
        assert code == 1
        assert "malformed parameter file" in capsys.readouterr().err

    def test_unknown_param_file_key_exit_one(self, tmp_path, capsys):
        out = tmp_path / "w"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "200",
                "--dim", "4", "--num-queries", "5", "--seed", "0")
        bad = out / "p.json"
        bad.write_text(json.dumps({"build": {}, "extra": 1}))
        code = run_cli("build", "--algo", "flat",
                       "--dataset", str(out / "d.base.fbin"),
                       "--params", str(bad), "--out", str(out))
        assert code == 1
        assert "extra" in capsys.readouterr().err

    def test_gt_requires_exactly_one_query_type(self, tmp_path, capsys):
        out = tmp_path / "w"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "200",
                "--dim", "4", "--num-queries", "5", "--seed", "0")
        code = run_cli("gt", "--dataset", str(out / "d.base.fbin"),
                       "--queries", str(out / "d.queries.fbin"),
                       "--out", str(out), "--k", "5", "--radius", "1.0")
        assert code == 1

    def test_data_root_env_resolution(self, tmp_path, monkeypatch, capsys):
        out = tmp_path / "root"
        run_cli("gen", "--out", str(out), "--name", "d", "--count", "200",
                "--dim", "4", "--num-queries", "5", "--seed", "0")
        monkeypatch.setenv("BIGANN_BENCH_DATA", str(out))
        monkeypatch.chdir(tmp_path)
        assert run_cli("gt", "--dataset", "d.base.fbin", "--queries",
                       "d.queries.fbin", "--out", str(tmp_path / "o"),
                       "--k", "3") == 0


class TestScoreCommand:

    def _record(self, algo, dataset, qps, accuracy, config="c0"):
        return bb.RunRecord(
            algorithm=algo, describe={"algorithm": algo, "build_params": {}},
            dataset=dataset, dataset_count=10 ** 9, config=config,
            search_params={}, qps=qps, accuracy_kind="recall_at_k",
            accuracy=accuracy, build_seconds=0.0, index_size_bytes=0,
            wall_seconds=1.0, num_queries=int(qps), k=10, timestamp=0.0)

    def test_score_reproduces_reference_ranking(self, tmp_path, capsys):
        from test_scoring import T1_BASELINE, T1_ENTRIES

        records = [self._record("baseline", ds, 12000.0, acc)
                   for ds, acc in T1_BASELINE.items()]
        for algo, cells in T1_ENTRIES.items():
            records.extend(self._record(algo, ds, 12000.0, acc)
                           for ds, acc in cells.items())
        runs = tmp_path / "fixture.jsonl"
        bb.persist_runs(records, runs)

        capsys.readouterr()
        code = run_cli("score", "--runs", str(runs), "--mode", "recall-at-qps",
                       "--threshold", "10000", "--out", str(tmp_path))
        assert code == 0
        out = capsys.readouterr().out
        first_line = out.strip().splitlines()[0]
        assert first_line.startswith("1. kst_ann_t1")
        assert "+0.2280" in first_line

        board = json.loads((tmp_path / "leaderboard.json").read_text())
        assert board["mode"] == "recall-at-qps"
        top = board["entries"][0]
        assert top["algorithm"] == "kst_ann_t1"
        assert abs(top["aggregate"] - 0.2280) < 1e-6

    def test_score_qps_mode_prints_tables(self, tmp_path, capsys):
        records = [self._record("baseline", "D", 3000.0, 0.95),
                   self._record("fast", "D", 9000.0, 0.95)]
        runs = tmp_path / "r.jsonl"
        bb.persist_runs(records, runs)
        capsys.readouterr()
        assert run_cli("score", "--runs", str(runs), "--mode", "qps-at-recall",
                       "--threshold", "2000", "--out", str(tmp_path)) == 0
        assert "D: fast=9000" in capsys.readouterr().out


class TestHelp:

    @pytest.mark.parametrize("command,flags", [
        ("gen", ["--out", "--name", "--count", "--dim", "--kind", "--clusters",
                 "--std", "--num-queries", "--seed", "--query-mode"]),
        ("gt", ["--dataset", "--queries", "--out", "--name", "--k", "--radius",
                "--metric", "--workers"]),
        ("build", ["--algo", "--dataset", "--params", "--out", "--name", "--seed"]),
        ("run", ["--algo", "--dataset", "--queries", "--gt", "--params", "--out",
                 "--index", "--seed", "--workers", "--repeats", "--k", "--runs-file"]),
        ("serve", ["--algo", "--listen"]),
        ("score", ["--runs", "--mode", "--threshold", "--baseline",
                   "--min-datasets", "--min-accuracy", "--out"]),
        ("plot", ["--runs", "--out", "--name", "--format", "--threshold"]),
    ])
    def test_help_lists_every_flag(self, capsys, command, flags):
        with pytest.raises(SystemExit) as exc:
            run_cli(command, "--help")
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in flags:
            assert flag in text
