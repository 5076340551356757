"""Command-line interface: exit codes, artifacts, and manifests."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from asht.cli import EX_BUDGET, EX_OK, EX_USAGE, EX_VALIDATION, dispatch
from asht.instances import BanditClass, save_instance


@pytest.fixture
def m2_file(tmp_path):
    inst = BanditClass(
        np.array([[[0.8, 0.2], [0.4, 0.6]], [[0.3, 0.7], [0.7, 0.3]]])
    )
    path = tmp_path / "m2.json"
    save_instance(inst, str(path))
    return str(path)


@pytest.fixture
def chdir_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


class TestExitCodes:
    def test_help_exits_zero(self):
        assert dispatch(["--help"]) == EX_OK

    def test_missing_subcommand_is_usage_error(self, capsys):
        assert dispatch([]) == EX_USAGE
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_subcommand_is_usage_error(self):
        assert dispatch(["frobnicate"]) == EX_USAGE

    def test_bad_flag_value_is_validation_error(self, m2_file, chdir_tmp):
        rc = dispatch(
            ["pde", "--instance", m2_file, "--nx", "15", "--no-refine"]
        )
        assert rc == EX_VALIDATION

    def test_missing_instance_file(self, chdir_tmp):
        rc = dispatch(["bounds", "--instance", "no_such.json"])
        assert rc == EX_VALIDATION

    def test_malformed_instance_file(self, tmp_path, chdir_tmp):
        bad = tmp_path / "bad.json"
        bad.write_text('{"m": 2}')
        rc = dispatch(["bounds", "--instance", str(bad)])
        assert rc == EX_VALIDATION

    def test_budget_exhaustion_writes_bracket(self, m2_file, chdir_tmp):
        rc = dispatch(
            [
                "bounds", "--instance", m2_file,
                "--include", "r_go_1", "--de-maxiter", "1",
                "--out", "b.json",
            ]
        )
        assert rc == EX_BUDGET
        payload = json.loads((chdir_tmp / "b.json").read_text())
        assert "bracket" in payload and payload["bracket"][1] is not None

    def test_console_script_help(self):
        out = subprocess.run(
            ["asht", "--help"], capture_output=True, text=True
        )
        assert out.returncode == 0
        for name in ("bounds", "pde", "goap", "approach", "simulate", "report"):
            assert name in out.stdout

    def test_module_invocation(self):
        out = subprocess.run(
            [sys.executable, "-m", "asht.cli", "nonsense"],
            capture_output=True, text=True,
        )
        assert out.returncode == EX_USAGE


class TestBoundsCommand:
    def test_writes_artifact_and_manifest(self, m2_file, chdir_tmp, capsys):
        rc = dispatch(
            [
                "bounds", "--instance", m2_file,
                "--include", "r_static,r_ub", "--out", "bounds.json",
            ]
        )
        assert rc == EX_OK
        text = capsys.readouterr().out
        assert "r_static" in text and "r_ub" in text
        payload = json.loads((chdir_tmp / "bounds.json").read_text())
        assert payload["r_static"] <= payload["r_ub"] + 1e-9
        manifest = json.loads((chdir_tmp / "bounds.json.manifest.json").read_text())
        assert manifest["subcommand"] == "bounds"
        assert "instance_sha256" in manifest
        assert manifest["versions"]["numpy"]

    def test_manifest_bytes_deterministic(self, m2_file, chdir_tmp):
        argv = [
            "bounds", "--instance", m2_file,
            "--include", "r_static", "--out", "bounds.json",
        ]
        assert dispatch(argv) == EX_OK
        first = (chdir_tmp / "bounds.json.manifest.json").read_bytes()
        art_first = json.loads((chdir_tmp / "bounds.json").read_text())
        assert dispatch(argv) == EX_OK
        assert (chdir_tmp / "bounds.json.manifest.json").read_bytes() == first
        art_second = json.loads((chdir_tmp / "bounds.json").read_text())
        # numbers are bit-identical; only wall-clock timings may move
        for payload in (art_first, art_second):
            for entry in payload.get("meta", {}).values():
                entry.pop("runtime_s", None)
        assert art_first == art_second


class TestPdeCommand:
    def test_solves_and_reports(self, m2_file, chdir_tmp, capsys):
        rc = dispatch(
            [
                "pde", "--instance", m2_file, "--nx", "16",
                "--no-refine", "--out", "pde.json",
            ]
        )
        assert rc == EX_OK
        payload = json.loads((chdir_tmp / "pde.json").read_text())
        assert payload["N_x"] == 16
        assert payload["r_go_inf"] > 0.0
        # CFL-tight default: dt at most the stability limit
        assert payload["dt"] <= payload["dh"] / (2 * np.log(5.0)) * (1 + 1e-9)
        assert "r_go_inf" in capsys.readouterr().out


class TestGoapCommand:
    def test_table_and_paths(self, m2_file, chdir_tmp):
        rc = dispatch(
            [
                "goap", "--instance", m2_file, "--batches", "2",
                "--dh", "0.5", "--paths", "2", "--horizon", "40",
                "--out", "goap.json",
            ]
        )
        assert rc == EX_OK
        payload = json.loads((chdir_tmp / "goap.json").read_text())
        assert payload["B"] == 2
        assert len(payload["grid_sizes"]) == 3
        rows = list(csv.reader((chdir_tmp / "goap_paths.csv").open(newline="")))
        assert rows[0] == ["path", "truth", "decision", "terminal_value", "x_1", "x_2"]
        assert len(rows) == 1 + 2 * 2  # header + paths * truths

    def test_csv_uses_crlf(self, m2_file, chdir_tmp):
        dispatch(
            [
                "goap", "--instance", m2_file, "--batches", "2",
                "--dh", "0.5", "--paths", "1", "--horizon", "40",
                "--out", "goap.json",
            ]
        )
        raw = (chdir_tmp / "goap_paths.csv").read_bytes()
        assert b"\r\n" in raw


class TestApproachCommand:
    def test_rate_runs_and_paths(self, m2_file, chdir_tmp):
        rc = dispatch(
            [
                "approach", "--instance", m2_file, "--batches", "6",
                "--trials", "2", "--truth", "0", "--horizon", "30",
                "--emit-paths", "paths", "--out", "approach.json",
            ]
        )
        assert rc == EX_OK
        payload = json.loads((chdir_tmp / "approach.json").read_text())
        assert payload["r_approach"] > 0.0
        assert payload["runs"][0]["trials"] == 2
        path_csv = chdir_tmp / "paths" / "path_truth0_trial0.csv"
        rows = list(csv.reader(path_csv.open(newline="")))
        assert rows[0] == ["batch", "x_1", "x_2", "l_x", "w_1", "w_2"]
        assert len(rows) == 1 + 6


class TestSimulateCommand:
    def test_static_results_csv(self, m2_file, chdir_tmp, capsys):
        rc = dispatch(
            [
                "simulate", "--instance", m2_file, "--policy", "static",
                "--t-grid", "6,10", "--trials", "400",
                "--out", "results.csv",
            ]
        )
        assert rc == EX_OK
        rows = list(csv.reader((chdir_tmp / "results.csv").open(newline="")))
        assert rows[0] == [
            "policy", "truth", "T", "trials", "errors", "p_hat", "ci_lo", "ci_hi",
        ]
        assert len(rows) == 1 + 2 * 2  # header + horizons * truths
        summary = json.loads((chdir_tmp / "results.json").read_text())
        assert "slope" in summary and "stderr" in summary
        assert "slope" in capsys.readouterr().out

    def test_insufficient_data_is_validation_exit(self, m2_file, chdir_tmp):
        rc = dispatch(
            [
                "simulate", "--instance", m2_file, "--policy", "static",
                "--t-grid", "400,500", "--trials", "50",
                "--out", "results.csv",
            ]
        )
        assert rc == EX_VALIDATION


class TestReportCommand:
    def test_joins_bounds_files(self, m2_file, chdir_tmp):
        dispatch(
            [
                "bounds", "--instance", m2_file,
                "--include", "r_static,r_ub", "--out", "b1.json",
            ]
        )
        rc = dispatch(
            ["report", "--inputs", "b1.json", "--out", "report.csv"]
        )
        assert rc == EX_OK
        rows = list(csv.reader((chdir_tmp / "report.csv").open(newline="")))
        assert rows[0][:5] == ["instance", "m", "n_arms", "support_size", "r_static"]
        assert len(rows) == 2
        assert rows[1][1] == "2"
