import csv
import json

import numpy as np
import pytest

from cornerflow import cli
from cornerflow.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from cornerflow.transport import StiffnessError


def test_empty_vorticity_static(tmp_path):
    assert main(["run", "--config", "empty.toml", "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "trajectory.csv")))
    for k in ("0", "1"):
        pts = {(r["x1"], r["x2"]) for r in rows if r["tracer_id"] == k}
        assert len(pts) == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["hit_boundary_events"] == 0 and summary["n_blobs"] == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] is True


def test_failed_check_exit(tmp_path):
    code = main(["run", "--config", "empty.toml", "--out", str(tmp_path), "--set", 'checks.boundary="some"'])
    assert code == EXIT_CHECK


@pytest.mark.parametrize(
    "argv",
    [
        ["collision", "--theta-over-pi", "0.6666666666666666"],
        ["verify-lemma", "--xi", "0.5"],
        ["verify-lemma", "--xi", "0.4", "0.9"],
        ["run", "--config", "does_not_exist.toml"],
        ["run", "--config", "empty.toml", "--set", "checks.teleport=true"],
        ["run", "--config", "empty.toml", "--set", "numerics.h=-1"],
        ["run", "--config", "empty.toml", "--threads", "0"],
    ],
)
def test_config_errors(argv, tmp_path, capsys):
    if argv[0] == "run":
        argv = argv + ["--out", str(tmp_path)]
    assert main(argv) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_invalid_toml(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[domain\nvariant = 1")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_numerical_failure(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise StiffnessError("forced", 0.5, "tracer 0")

    monkeypatch.setattr(cli, "simulate", boom)
    assert main(["run", "--config", "empty.toml", "--out", str(tmp_path)]) == EXIT_NUMERIC


def test_lemma_single_point(tmp_path):
    code = main(["verify-lemma", "--theta-over-pi", "1", "--xi", "0.9", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "lemma_report.json").read_text())
    (entry,) = rep["entries"].values()
    assert entry["samples"]["ratio"][0] == pytest.approx(2.3809162617542934, rel=1e-4)


@pytest.mark.parametrize("config", ["map_disk.toml", "map_sector_3pi2.toml"])
def test_verify_map(config):
    assert main(["verify-map", "--config", config]) == EXIT_OK


def test_bench_parity(tmp_path, capsys):
    assert main(["bench", "--n", "2", "--targets", "50", "--repeats", "1", "--out", str(tmp_path)]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out.split("\ncheck")[0])
    assert rows[0]["max_rel_error"] < 1e-12


def test_deterministic_outputs(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        argv = ["collision", "--out", str(d), "--seed", "3", "--set", "checks.dt_halving=false",
                "--set", "numerics.t_end=0.5"]
        main(argv)
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0].keys() == {"trajectory.csv", "summary.json", "report.json"}
    assert outs[0] == outs[1]


def test_seed_changes_random_checks_only(tmp_path):
    reports = []
    for seed in (1, 2):
        d = tmp_path / f"s{seed}"
        main(["collision", "--out", str(d), "--seed", str(seed), "--set", "checks.dt_halving=false",
              "--set", "numerics.t_end=0.2"])
        reports.append(json.loads((d / "report.json").read_text()))
        traj = (d / "trajectory.csv").read_bytes()
    assert reports[0]["entries"]["image_identity"]["note"] != reports[1]["entries"]["image_identity"]["note"]
    assert (tmp_path / "s1" / "trajectory.csv").read_bytes() == traj
