import csv
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from uclab import cli, report
from uclab.cli import EXIT_INAPPLICABLE, EXIT_INVALID, EXIT_OK, SweepError, main, run, sweep
from uclab.config import ConfigError, load, validate

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = ROOT / "tests" / "golden"


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


# -- validation ---------------------------------------------------------------------


def test_validation_lists_every_bad_field(tmp_path, capsys):
    bad = {"kind": "bad_cube_census", "function": {"zoo": "linear", "n": 2},
           "lattice": {"A": 4.5, "K": 10}, "thresholds": {"N": 1.0, "delta": 3.0}}
    with pytest.raises(ConfigError) as exc:
        validate(bad)
    fields = {f for f, _ in exc.value.problems}
    assert {"lattice.A", "lattice.K", "thresholds.delta"} <= fields
    assert main(["validate", write_config(tmp_path, bad)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "invalid lattice.A" in err and "invalid thresholds.delta" in err


def test_every_shipped_config_validates():
    for path in sorted(CONFIGS.glob("*.json")):
        assert main(["validate", str(path)]) == EXIT_OK


def test_unknown_kind_is_rejected():
    with pytest.raises(ConfigError):
        validate({"kind": "nonsense"})


# -- run ----------------------------------------------------------------------------


def test_run_linear_census_has_no_bad_cubes(tmp_path):
    rep = run(load(CONFIGS / "census_linear.json"), str(tmp_path))
    assert rep.status == "ok"
    rows = list(csv.DictReader(open(tmp_path / "census_linear.csv")))
    assert rows and all(r["bad"] == "0" and r["undecided"] == "0" for r in rows)
    data = json.loads((tmp_path / "census_linear.json").read_text())
    assert data["status"] == "ok" and "wall_clock" not in json.dumps(data)
    assert json.loads((tmp_path / "census_linear.timing.json").read_text())["wall_clock_seconds"] >= 0


def test_golden_report_is_byte_identical(tmp_path):
    cfg = load(CONFIGS / "theorem33_n2.json")
    for k in (1, 2):
        out = tmp_path / f"run{k}"
        run(cfg, str(out))
        for suffix in ("json", "csv"):
            got = (out / f"theorem33_n2.{suffix}").read_bytes()
            assert got == (GOLDEN / f"theorem33_n2.{suffix}").read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("UCLAB_OUT", str(tmp_path / "env"))
    assert main(["run", str(CONFIGS / "weak_bound.json")]) == EXIT_OK
    assert (tmp_path / "env" / "weak_bound.json").exists()
    assert main(["run", str(CONFIGS / "weak_bound.json"), "--out", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "weak_bound.json").exists()


def test_inapplicable_exit_code(tmp_path, capsys):
    data = json.loads((CONFIGS / "big_scale_power.json").read_text())
    data["thresholds"]["N"] = 50.0
    code = main(["run", write_config(tmp_path, data), "--out", str(tmp_path)])
    assert code == EXIT_INAPPLICABLE
    assert "inapplicable:" in capsys.readouterr().err
    rep = json.loads((tmp_path / "big_scale_power.json").read_text())
    assert rep["status"] == "inapplicable" and rep["results"]["reason"]


def test_findings_are_printed(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "theorem33_n2.json"), "--out", str(tmp_path)]) == EXIT_OK
    lines = [ln for ln in capsys.readouterr().err.splitlines() if ln.startswith("finding: ")]
    assert lines
    assert json.loads(lines[0][len("finding: "):])["type"] == "ceiling_violation"


def test_console_script_runs(tmp_path):
    exe = shutil.which("uclab")
    cmd = [exe] if exe else [sys.executable, "-m", "uclab.cli"]
    proc = subprocess.run(cmd + ["validate", str(CONFIGS / "recursion_dp.json")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


# -- sweep --------------------------------------------------------------------------


@pytest.mark.parametrize("workers", [1, 2])
def test_sweep_writes_one_report_per_value(tmp_path, workers):
    out = tmp_path / f"w{workers}"
    code = main(["sweep", str(CONFIGS / "sublevel_saddle.json"), "--axis", "thresholds.a", "--values", "1,2,3",
                 "--workers", str(workers), "--out", str(out)])
    assert code == EXIT_OK
    reports = sorted(out.glob("sublevel_saddle.[0-9][0-9][0-9].json"))
    assert len(reports) == 3
    rows = list(csv.reader(open(out / "sublevel_saddle.sweep.csv")))
    assert rows[0] == ["thresholds.a", "headline", "status"] and len(rows) == 4
    heads = [float(r[1]) for r in rows[1:]]
    assert heads == sorted(heads, reverse=True)  # content shrinks as a grows


def test_sweep_results_do_not_depend_on_workers(tmp_path):
    cfg = load(CONFIGS / "sublevel_saddle.json")
    a = sweep(cfg, "thresholds.a", [1, 2], 1, str(tmp_path / "a"))
    b = sweep(cfg, "thresholds.a", [1, 2], 2, str(tmp_path / "b"))
    assert [r.dumps() for r in a] == [r.dumps() for r in b]


def test_empty_or_non_numeric_sweep_is_rejected(tmp_path):
    cfg = load(CONFIGS / "sublevel_saddle.json")
    with pytest.raises(SweepError):
        sweep(cfg, "thresholds.a", [], 1, str(tmp_path))
    with pytest.raises(SweepError):
        sweep(cfg, "thresholds.a", ["x"], 1, str(tmp_path))
    assert main(["sweep", str(CONFIGS / "sublevel_saddle.json"), "--axis", "thresholds.a", "--values", ",",
                 "--out", str(tmp_path)]) == EXIT_INVALID
    assert not list(tmp_path.iterdir())


# -- atomic output ------------------------------------------------------------------


def test_failed_write_leaves_no_files(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = os.fsync

    def flaky(fd):
        calls["n"] += 1
        if calls["n"] == 2:
            raise OSError("disk full")
        real(fd)

    monkeypatch.setattr(report.os, "fsync", flaky)
    with pytest.raises(OSError):
        run(load(CONFIGS / "theorem33_n2.json"), str(tmp_path))
    assert list(tmp_path.iterdir()) == []


def test_internal_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(cli.experiments.RUNNERS, "weak_bound", boom)
    assert main(["run", str(CONFIGS / "weak_bound.json"), "--out", str(tmp_path)]) == cli.EXIT_INTERNAL
    assert list(tmp_path.iterdir()) == []
