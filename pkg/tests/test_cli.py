"""
Black-box tests for the transdim CLI (transdim.cli.main).

These tests invoke the CLI via ``python -m transdim.cli.main <subcommand> ...``
through subprocess so they exercise the real argparse wiring and exit codes.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]


def run_cli(*args, cwd=None):
    """Run the transdim CLI as a subprocess and return the CompletedProcess."""
    return subprocess.run(
        [sys.executable, "-m", "transdim.cli.main", *[str(a) for a in args]],
        capture_output=True,
        text=True,
        cwd=cwd or str(REPO_ROOT),
    )


def _error_payload(result):
    """The JSON error object written as the last line of stderr."""
    lines = [line for line in result.stderr.splitlines() if line.strip()]
    return json.loads(lines[-1])["error"]


@pytest.fixture
def run_dir(toy_config, tmp_path):
    """A finished three-replicate toy run."""
    out = tmp_path / "run"
    result = run_cli("run", "--config", toy_config, "--out", out)
    assert result.returncode == 0, result.stderr
    return out


class TestRun:

    def test_run_json_summary(self, toy_config, tmp_path):
        result = run_cli("run", "--config", toy_config, "--out", tmp_path / "r", "--json")
        assert result.returncode == 0, result.stderr
        summary = json.loads(result.stdout)
        assert summary["model_kind"] == "toy"
        assert len(summary["replicate_streams"]) == 3

    def test_run_writes_replicate_files(self, run_dir):
        for name in ("trace_r00.csv", "params_r02.csv", "acceptance_r01.csv",
                     "resolved_config.json", "run_summary.json"):
            assert (run_dir / name).exists(), name

    def test_replicate_override(self, toy_config, tmp_path):
        out = tmp_path / "one"
        result = run_cli("run", "--config", toy_config, "--out", out, "--replicates", "1")
        assert result.returncode == 0, result.stderr
        assert sorted(p.name for p in out.glob("trace_r*.csv")) == ["trace_r00.csv"]

    def test_same_seed_same_trace(self, toy_config, tmp_path):
        for name in ("a", "b"):
            assert run_cli("run", "--config", toy_config, "--out", tmp_path / name).returncode == 0
        assert (tmp_path / "a" / "trace_r01.csv").read_bytes() == \
            (tmp_path / "b" / "trace_r01.csv").read_bytes()

    def test_missing_config(self, tmp_path):
        result = run_cli("run", "--config", tmp_path / "absent.toml")
        assert result.returncode == 1
        assert "message" in _error_payload(result)

    def test_unknown_key_is_a_config_error(self, write_config, tmp_path):
        path = write_config(f"""
            [model]
            kind = "toy"
            colour = "red"

            [sampler]
            iterations = 10

            [output]
            directory = "{(tmp_path / 'out').as_posix()}"
        """)
        result = run_cli("run", "--config", path)
        assert result.returncode == 1
        error = _error_payload(result)
        assert error["type"] == "ConfigError"
        assert "model.colour" in error["message"]


class TestDiagnose:

    def test_diagnose_writes_panels(self, run_dir):
        result = run_cli("diagnose", run_dir)
        assert result.returncode == 0, result.stderr
        report = json.loads((run_dir / "diagnostics.json").read_text())
        assert report["replicates"] == 3
        assert report["contract"] == []
        for name in ("ks.csv", "chisq.csv", "mpsrf.csv"):
            assert (run_dir / name).exists(), name

    def test_diagnose_json_to_other_directory(self, run_dir, tmp_path):
        out = tmp_path / "diag"
        result = run_cli("diagnose", run_dir, "--out", out, "--json")
        report = json.loads(result.stdout)
        assert (out / "diagnostics.json").exists()
        assert report["findings_summary"]["error"] == 0

    def test_strict_exit_code_follows_findings(self, run_dir):
        result = run_cli("diagnose", run_dir, "--strict", "--json")
        summary = json.loads(result.stdout)["findings_summary"]
        assert result.returncode == (1 if summary["total"] - summary["info"] else 0)

    def test_single_replicate_fails_strict(self, toy_config, tmp_path):
        out = tmp_path / "single"
        run_cli("run", "--config", toy_config, "--out", out, "--replicates", "1")
        assert run_cli("diagnose", out).returncode == 0
        assert run_cli("diagnose", out, "--strict").returncode == 1

    def test_no_traces(self, tmp_path):
        result = run_cli("diagnose", tmp_path)
        assert result.returncode == 1
        assert _error_payload(result)["type"] == "FileNotFoundError"


class TestEstimate:

    def test_estimate_report(self, run_dir):
        result = run_cli("estimate", run_dir, "--json")
        assert result.returncode == 0, result.stderr
        report = json.loads(result.stdout)
        total = sum(entry["probability"] for entry in report["model_probabilities"].values())
        assert total == pytest.approx(1.0)
        assert report["warnings"] == []
        assert (run_dir / "estimates.json").exists()

    def test_estimate_single_trace_file(self, run_dir):
        result = run_cli("estimate", run_dir / "trace_r00.csv", "--burnin", "50", "--json")
        assert result.returncode == 0, result.stderr
        assert json.loads(result.stdout)["burn_in"] == 50

    def test_missing_input(self, tmp_path):
        result = run_cli("estimate", tmp_path / "nope")
        assert result.returncode == 1
        assert _error_payload(result)["type"] == "FileNotFoundError"
