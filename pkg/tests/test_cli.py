import csv
import io
import json

import numpy as np
import pytest

from socialcf.channel import load_external_channels
from socialcf.cli import main

SMALL = ["-s", "n_ues=6", "-s", "mc_deployments=1", "-s", "runs_per_deployment=2"]


def rows_from(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_outputs_csv(capsys):
    assert main(["run", "-a", "EA,BC", *SMALL]) == 0
    rows = rows_from(capsys.readouterr().out)
    assert [r["algorithm"] for r in rows] == ["EA", "BC"]
    assert float(rows[1]["n_associations"]) == 6


def test_run_json_to_file(tmp_path):
    out = tmp_path / "r.json"
    assert main(["run", *SMALL, "-f", "json", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["n_ues"] == 6 and "version" in doc


def test_config_file_and_matching_export(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("n_ues = 5\nmc_deployments = 1\nruns_per_deployment = 1\nalgorithm = DA\n")
    match = tmp_path / "m.txt"
    assert main(["run", "-c", str(conf), "-o", str(tmp_path / "r.csv"),
                 "--export-matching", str(match)]) == 0
    lines = match.read_text().splitlines()
    assert lines[0].startswith("0:") and len([ln for ln in lines if ":" in ln]) == 5
    assert any(ln.startswith("associations = ") for ln in lines)


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "-s", "bogus=1"],
        ["run", "-s", "n_ues=-1"],
        ["run", "-a", "KMEANS"],
        ["run", "-c", "/does/not/exist"],
        ["run", "-w", "0"],
        ["pareto"],  # default instance is far too large to enumerate
    ],
)
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_failed_runs_exit_3(capsys):
    for bad in ("channel_file=/nonexistent.csv", "ap_positions=1 1; 2 2"):
        assert main(["run", *SMALL, "-s", bad]) == 3
        assert "failed run" in capsys.readouterr().err


def test_sweeps(capsys):
    assert main(["sweep-social", *SMALL, "--alphas", "0,1"]) == 0
    assert len(rows_from(capsys.readouterr().out)) == 4
    assert main(["sweep-load", *SMALL, "--n-ues", "4,6", "-a", "EA,CS"]) == 0
    assert len(rows_from(capsys.readouterr().out)) == 4
    assert main(["sweep-nmse", *SMALL, "--nmse=-20,perfect"]) == 0
    assert [r["nmse_db"] for r in rows_from(capsys.readouterr().out)] == ["-20.0", "perfect"]
    assert main(["shutdown", *SMALL, "--n-ues", "5"]) == 0
    row = rows_from(capsys.readouterr().out)[0]
    assert float(row["effective_power"]) <= float(row["total_power"])


def test_pareto_tiny(capsys):
    argv = ["pareto", "-s", "n_ues=2", "-s", "n_aps=2", "-s", "k_max=1", "-s", "m_max=1",
            "-s", "ap_positions=20 10; 70 25"]
    assert main(argv) == 0
    rows = rows_from(capsys.readouterr().out)
    assert len(rows) >= 1 and all(len(r["clustering"]) == 5 for r in rows)


def test_channel_export_import(tmp_path, capsys):
    path = tmp_path / "h.csv"
    base = ["-s", "n_ues=4", "-s", "n_aps=3", "-s", "ap_positions=10 10; 50 20; 90 30"]
    assert main(["export-channels", str(path), *base]) == 0
    h = load_external_channels(path)
    assert h.shape == (4, 3, 16)
    assert main(["import-channels", str(path), "-s", "mc_deployments=1",
                 "-s", "runs_per_deployment=1", "-a", "EA"]) == 0
    assert rows_from(capsys.readouterr().out)[0]["algorithm"] == "EA"


def test_import_bad_file_exits_2(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("1,1\n")
    assert main(["import-channels", str(path)]) == 2


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "socialcf", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "sweep-social" in out.stdout
