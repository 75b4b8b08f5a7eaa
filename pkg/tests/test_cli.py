import csv
import json

import pytest

from twinmesh import cli
from twinmesh.strategies import InvariantViolation


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_compare_all_writes_three_runs_and_reports(tmp_path, capsys):
    out = tmp_path / "x"
    assert cli.main(["--scenario", "builtin", "--approach", "all", "--seed", "7", "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"OneTwin", "SeveralTwins", "LicensingNotification", "report.csv", "report.txt"} <= names
    assert "Comparison" in capsys.readouterr().out


def test_identical_argv_gives_identical_artifacts(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["--approach", "all", "--seed", "3", "--out", str(tmp_path / d)]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_out_dir_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TWINMESH_OUT", str(tmp_path / "env"))
    assert cli.main(["--approach", "1"]) == 0
    assert (tmp_path / "env" / "report.txt").exists()


def test_loss_overlay_shows_reduced_retention(tmp_path):
    out = tmp_path / "loss"
    assert cli.main(["--approach", "2", "--lose-provider", "REPAIR1@90", "--out", str(out)]) == 0
    with open(out / "report.csv") as fh:
        rows = {r["metric"]: r["value"] for r in csv.DictReader(fh)}
    assert float(rows["mandatory_completeness"]) < 1.0
    assert rows["departed"] == "REPAIR1"


def test_transfer_overlay(tmp_path):
    out = tmp_path / "t"
    argv = ["--approach", "1", "--transfer-owner", "vehicle1=RECYCLER@6", "--format", "json", "--out", str(out)]
    assert cli.main(argv) == 0
    world = json.loads((out / "OneTwin" / "world.json").read_text())
    owners = {a["name"]: a["owner"] for a in world["assets"]}
    assert owners["vehicle1"] == "RECYCLER"


def test_scale_mode_writes_aggregate_only(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["--scale", "20", "--approach", "3", "--out", str(out)]) == 0
    doc = json.loads((out / "scale.json").read_text())
    (run,) = doc["runs"]
    assert run["n_vehicles"] == 20
    assert run["total_messages"] == 20 * run["per_vehicle_messages"]["min"]
    assert [p.name for p in out.iterdir()] == ["scale.json"]


@pytest.mark.parametrize(
    "argv",
    [
        ["--bogus"],
        ["--approach", "4"],
        ["--lose-provider", "REPAIR1"],
        ["--lose-provider", "REPAIR1@soon"],
        ["--transfer-owner", "vehicle1@5"],
        ["--scale", "0"],
        ["--scenario", "/nonexistent/scenario.json"],
    ],
)
def test_usage_errors_exit_64(tmp_path, argv):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 64


def test_invalid_scenario_exits_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "stakeholders": [], "events": [{"at": 0, "actor": "A", "kind": "Sell", "payload": {}}]}')
    assert cli.main(["--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["--lose-provider", "NOBODY@5", "--out", str(tmp_path / "o")]) == 1


def test_invariant_violation_exits_2(tmp_path, monkeypatch):
    def broken(*a, **k):
        raise InvariantViolation("forced")

    monkeypatch.setattr(cli, "run", broken)
    assert cli.main(["--approach", "1", "--out", str(tmp_path)]) == 2


def test_help_exits_0(capsys):
    assert cli.main(["--help"]) == 0
