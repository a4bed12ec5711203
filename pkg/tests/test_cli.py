"""CLI contract tests: subcommands, exit codes, stdout/stderr separation."""

import json
import subprocess
import sys

import pytest

from conftest import FIXTURES

CLI = [sys.executable, "-m", "redi.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(
        CLI + list(args), capture_output=True, text=True, cwd=cwd
    )


def retrieve_args(out_dir, **extra):
    args = [
        "retrieve",
        "--corpus", str(FIXTURES / "corpus.jsonl"),
        "--queries", str(FIXTURES / "queries.jsonl"),
        "--units", str(FIXTURES / "units_sparse.jsonl"),
        "--mode", "sparse",
        "--output-dir", str(out_dir),
        "--jobs", "1",
    ]
    for key, value in extra.items():
        args += [f"--{key.replace('_', '-')}", str(value)]
    return args


class TestIngest:
    def test_stats_on_stdout(self, tmp_path):
        out = tmp_path / "index.jsonl"
        proc = run_cli(
            "ingest", "--corpus", str(FIXTURES / "corpus.jsonl"), "--out", str(out)
        )
        assert proc.returncode == 0
        assert "docs 20" in proc.stdout
        assert "avgdl" in proc.stdout and "vocab" in proc.stdout
        assert out.exists()

    def test_missing_file_exit_2(self, tmp_path):
        proc = run_cli(
            "ingest", "--corpus", "/no/such/file.jsonl",
            "--out", str(tmp_path / "i.jsonl"),
        )
        assert proc.returncode == 2
        assert "/no/such/file.jsonl" in proc.stderr
        assert proc.stdout == ""

    def test_rerun_byte_identical(self, tmp_path):
        outs = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            proc = run_cli(
                "ingest", "--corpus", str(FIXTURES / "corpus.jsonl"),
                "--out", str(out),
            )
            assert proc.returncode == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestRetrieveEval:
    def test_golden_run_via_cli(self, tmp_path):
        run_path = tmp_path / "run.txt"
        proc = run_cli(*retrieve_args(tmp_path), "--out", str(run_path))
        assert proc.returncode == 0, proc.stderr
        assert run_path.read_bytes() == (
            FIXTURES / "golden_run_sparse_sum.txt"
        ).read_bytes()
        assert (tmp_path / "config.resolved.json").exists()

    def test_eval_of_golden_run(self, tmp_path):
        report_path = tmp_path / "report.json"
        proc = run_cli(
            "eval",
            "--run", str(FIXTURES / "golden_run_sparse_sum.txt"),
            "--qrels", str(FIXTURES / "qrels.txt"),
            "--report", str(report_path),
            "--no-figure",
        )
        assert proc.returncode == 0, proc.stderr
        assert report_path.read_bytes() == (
            FIXTURES / "golden_report_sparse_sum.json"
        ).read_bytes()
        assert "ndcg@10" in proc.stdout

    def test_retrieve_then_eval_equals_benchmark(self, tmp_path):
        """Command composition matches the combined library pipeline."""
        from redi.evaluation import write_report_json
        from redi.runner import ExperimentConfig, run_benchmark

        run_path = tmp_path / "run.txt"
        report_path = tmp_path / "report.json"
        assert run_cli(*retrieve_args(tmp_path), "--out", str(run_path)).returncode == 0
        assert run_cli(
            "eval", "--run", str(run_path), "--qrels", str(FIXTURES / "qrels.txt"),
            "--report", str(report_path), "--no-figure",
        ).returncode == 0

        combined = run_benchmark(ExperimentConfig(
            corpus=str(FIXTURES / "corpus.jsonl"),
            queries=str(FIXTURES / "queries.jsonl"),
            qrels=str(FIXTURES / "qrels.txt"),
            units=str(FIXTURES / "units_sparse.jsonl"),
            mode="sparse",
            jobs=1,
        ))
        expected_report = tmp_path / "expected.json"
        write_report_json(expected_report, combined.reports)
        assert report_path.read_bytes() == expected_report.read_bytes()

    def test_eval_renders_figure(self, tmp_path):
        report_path = tmp_path / "report.json"
        proc = run_cli(
            "eval",
            "--run", str(FIXTURES / "golden_run_sparse_sum.txt"),
            "--qrels", str(FIXTURES / "qrels.txt"),
            "--report", str(report_path),
        )
        assert proc.returncode == 0, proc.stderr
        figure = tmp_path / "report.png"
        assert figure.exists()
        assert figure.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_groups_manifest_adds_macro_rows(self, tmp_path):
        manifest = tmp_path / "groups.json"
        manifest.write_text(json.dumps(
            {"1": "nature", "2": "kitchen", "3": "energy", "4": "sport",
             "5": "nature"}
        ))
        proc = run_cli(
            "eval",
            "--run", str(FIXTURES / "golden_run_sparse_sum.txt"),
            "--qrels", str(FIXTURES / "qrels.txt"),
            "--groups", str(manifest),
            "--no-figure",
        )
        assert proc.returncode == 0, proc.stderr
        assert "nature" in proc.stdout and "per-group" in proc.stdout

    def test_bad_groups_manifest_exit_2(self, tmp_path):
        manifest = tmp_path / "groups.json"
        manifest.write_text(json.dumps(["not", "a", "mapping"]))
        proc = run_cli(
            "eval",
            "--run", str(FIXTURES / "golden_run_sparse_sum.txt"),
            "--qrels", str(FIXTURES / "qrels.txt"),
            "--groups", str(manifest),
            "--no-figure",
        )
        assert proc.returncode == 2

    def test_bad_qrels_exit_2(self, tmp_path):
        proc = run_cli(
            "eval", "--run", str(FIXTURES / "golden_run_sparse_sum.txt"),
            "--qrels", "/no/such/qrels.txt",
        )
        assert proc.returncode == 2

    def test_usage_error_exit_2(self):
        proc = run_cli("retrieve", "--mode", "hologram")
        assert proc.returncode == 2


class TestSweepCommand:
    def test_sweep_writes_csv_and_figure(self, tmp_path):
        csv_path = tmp_path / "sweep.csv"
        # retrieve_args() starts with the subcommand name; reuse its flags.
        proc = run_cli(
            "sweep", *retrieve_args(tmp_path)[1:],
            "--qrels", str(FIXTURES / "qrels.txt"),
            "--grid", "k3=0.2,0.4,0.9",
            "--out", str(csv_path),
        )
        assert proc.returncode == 0, proc.stderr
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("k3,")
        assert len(lines) == 4
        assert (tmp_path / "sweep.png").exists()

    def test_single_cell_matches_retrieve_eval(self, tmp_path):
        csv_path = tmp_path / "sweep.csv"
        proc = run_cli(
            "sweep", *retrieve_args(tmp_path)[1:],
            "--qrels", str(FIXTURES / "qrels.txt"),
            "--grid", "k3=0.4",
            "--out", str(csv_path), "--no-figure",
        )
        assert proc.returncode == 0, proc.stderr
        header, row = csv_path.read_text().splitlines()
        report = json.loads(
            (FIXTURES / "golden_report_sparse_sum.json").read_text()
        )
        ndcg_mean = report[0]["mean"]
        cells = dict(zip(header.split(","), row.split(",")))
        assert float(cells["ndcg@10"]) == pytest.approx(ndcg_mean, abs=1e-6)
        assert cells["status"] == "ok"


class TestUnderstandCommand:
    @pytest.mark.skipif(
        "REDI_LIVE_ENDPOINT" not in __import__("os").environ,
        reason="live smoke gated by REDI_LIVE_ENDPOINT",
    )
    def test_live_smoke_produces_schema_valid_cache(self, tmp_path):
        import os

        from redi.understanding import load_unit_cache

        cache = tmp_path / "live.jsonl"
        proc = run_cli(
            "understand",
            "--queries", str(FIXTURES / "queries.jsonl"),
            "--mode", "sparse",
            "--out", str(cache),
            "--endpoint", os.environ["REDI_LIVE_ENDPOINT"],
            "--model", os.environ.get("REDI_LIVE_MODEL", "default"),
        )
        assert proc.returncode == 0, proc.stderr
        loaded = load_unit_cache(cache)  # schema validation happens here
        assert len(loaded) == 5
        for unit_set in loaded.values():
            assert 1 <= len(unit_set.units) <= 15

    def test_cached_queries_skip_network(self, tmp_path):
        """With every query already cached, no endpoint is ever contacted."""
        cache = tmp_path / "cache.jsonl"
        cache.write_bytes((FIXTURES / "units_sparse.jsonl").read_bytes())
        before = cache.read_bytes()
        proc = run_cli(
            "understand",
            "--queries", str(FIXTURES / "queries.jsonl"),
            "--mode", "sparse",
            "--out", str(cache),
            "--endpoint", "http://127.0.0.1:1",  # unreachable on purpose
            "--model", "stub",
        )
        assert proc.returncode == 0, proc.stderr
        assert cache.read_bytes() == before
        assert "5 unit sets (0 new)" in proc.stdout

    def test_mixed_cache_fetches_only_uncached(self, tmp_path, capsys):
        """One query dropped from the cache: exactly one reasoner call."""
        import json as json_mod
        import threading
        from http.server import BaseHTTPRequestHandler, HTTPServer

        from redi.cli import main as cli_main

        cache = tmp_path / "cache.jsonl"
        lines = (FIXTURES / "units_sparse.jsonl").read_text().splitlines()
        cache.write_text("\n".join(lines[:-1]) + "\n")  # drop query 5

        calls = []

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = self.rfile.read(int(self.headers["Content-Length"]))
                calls.append(json_mod.loads(body))
                if len(calls) == 1:
                    text = '[{"sub_query": "pond care basics"}]'
                else:
                    text = "algae, shading, nutrients"
                payload = json_mod.dumps(
                    {"choices": [{"message": {"content": text}}]}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            rc = cli_main([
                "understand",
                "--queries", str(FIXTURES / "queries.jsonl"),
                "--mode", "sparse",
                "--out", str(cache),
                "--endpoint", f"http://127.0.0.1:{server.server_port}/chat",
                "--model", "stub",
            ])
        finally:
            server.shutdown()
            thread.join(timeout=5)
        assert rc == 0
        out = capsys.readouterr().out
        assert "5 unit sets (1 new)" in out
        # 1 decompose + 1 interpretation for the single uncached query.
        assert len(calls) == 2
        from redi.understanding import load_unit_cache

        assert ("5", "sparse") in load_unit_cache(cache)
