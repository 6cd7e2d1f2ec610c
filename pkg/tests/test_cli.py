import json
import logging

import pytest

from laserclock import __version__, cli
from laserclock.experiments import EXPERIMENTS, Experiment, ExperimentResult


def run(tmp_path, *args):
    return cli.main(["run", *args, "--out", str(tmp_path)])


def only_run(tmp_path):
    (d,) = [p for p in tmp_path.iterdir() if p.is_dir()]
    return d


def test_linewidth_example(tmp_path, capsys):
    assert run(tmp_path, "linewidth", "--mu", "20", "--kappa", "1", "--gain", "hl") == 0
    d = only_run(tmp_path)
    res = json.loads((d / "results.json").read_text())
    assert set(res) >= {"config", "results", "pass"}
    (row,) = res["results"]
    assert row["theory"] == 0.0125
    assert abs(row["measured"] / 0.0125 - 1) < 0.1
    assert row["pass"] and row["equation"] == "Eq. (16)"
    assert "PASS" in capsys.readouterr().out
    dat = (d / "linewidth_hl.dat").read_text().splitlines()
    assert dat[0].startswith("#") and len(dat[1].split()) == 2


def test_ensemble_example(tmp_path):
    assert run(tmp_path, "ensemble-equality", "--mu", "9") == 0
    res = json.loads((only_run(tmp_path) / "results.json").read_text())
    assert res["results"][0]["measured"] < 1e-8


def test_budget_example(tmp_path, capsys):
    code = run(tmp_path, "budget", "--power", "1e-3", "--lambda", "600e-9", "--linewidth", "1e6", "--parties", "1")
    assert code == 0
    out = capsys.readouterr().out
    assert "Eq" in out and "22" in out
    table = (only_run(tmp_path) / "budget.csv").read_text().splitlines()
    assert table[0].split(",")[0] == "linewidth_interpretation"
    bound = float(table[1].split(",")[table[0].split(",").index("bound_rad2")])
    assert bound == pytest.approx(1.8e-5, rel=0.02)


def test_unknown_key_rejected(tmp_path, capsys):
    assert run(tmp_path, "budget", "--colour", "red") == 2
    assert "unknown key" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_bad_values_rejected(tmp_path):
    assert run(tmp_path, "linewidth", "--gain", "loud") == 2
    assert run(tmp_path, "budget", "--power") == 2
    assert run(tmp_path, "budget", "--format", "xml") == 2
    # a numerical precondition failure is a configuration problem
    assert run(tmp_path, "channel", "--alpha", "1") == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "lw.cfg"
    cfg.write_text("# linewidth run\nmu = 40\nkappa = 2\n")
    out = tmp_path / "runs"
    assert cli.main(["run", "linewidth", "--config", str(cfg), "--kappa", "1", "--out", str(out)]) == 0
    manifest = json.loads((only_run(out) / "manifest.json").read_text())
    assert manifest["config"]["params"]["mu"] == 40
    assert manifest["config"]["params"]["kappa"] == 1
    assert manifest["version"] == __version__


def test_config_file_syntax_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mu 40\n")
    assert cli.main(["run", "linewidth", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "envdir"))
    assert cli.main(["run", "ensemble-equality", "--mu", "4"]) == 0
    assert (tmp_path / "envdir").is_dir()


def test_list_values_parse():
    assert cli._parse_overrides(["--mu", "4,9", "--gain=hl"]) == {"mu": [4, 9], "gain": "hl"}


def test_byte_identical_tables(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["run", "channel", "--out", str(out), "--seed", "3"]) == 0
    da, db = only_run(a), only_run(b)
    assert da.name == db.name
    for name in ("results.csv", "pixel_table.csv", "summary.txt"):
        assert (da / name).read_bytes() == (db / name).read_bytes()
    ja = json.loads((da / "results.json").read_text())
    jb = json.loads((db / "results.json").read_text())
    assert ja["results"] == jb["results"]


def test_csv_full_precision(tmp_path):
    run(tmp_path, "budget")
    row = (only_run(tmp_path) / "results.csv").read_text().splitlines()[1]
    measured = row.split(",")[3]
    assert len(measured.replace(".", "").replace("e-05", "").lstrip("0")) >= 16


def test_csv_only(tmp_path):
    run(tmp_path, "budget", "--format", "csv")
    d = only_run(tmp_path)
    assert (d / "results.csv").exists() and not (d / "results.json").exists()


def test_tolerance_failure_exit(tmp_path):
    assert run(tmp_path, "linewidth", "--rtol", "0.001") == 3


def test_lock_loss_exit(tmp_path, monkeypatch):
    def lost(params, seed):
        return ExperimentResult(lock_loss=True)

    monkeypatch.setitem(EXPERIMENTS, "budget", Experiment(lost, {}))
    assert cli.main(["run", "budget", "--out", str(tmp_path)]) == 4


def test_report_empty(tmp_path, capsys):
    assert cli.main(["report", str(tmp_path)]) == 2
    assert "no runs found" in capsys.readouterr().err


def test_report_two_pass(tmp_path):
    run(tmp_path, "budget")
    run(tmp_path, "ensemble-equality", "--mu", "4")
    code, summary = cli.report(tmp_path)
    assert code == 0 and summary["pass_count"] == 2
    assert json.loads((tmp_path / "summary.json").read_text())["pass_count"] == 2
    assert (tmp_path / "summary.txt").read_text().startswith("runs: 2")


def test_report_mixed(tmp_path, capsys):
    run(tmp_path, "budget")
    run(tmp_path, "linewidth", "--rtol", "0.001")
    capsys.readouterr()
    assert cli.main(["report", str(tmp_path)]) == 3
    out = capsys.readouterr().out
    assert "FAIL: 1" in out
    assert "linewidth hl mu=20" in out and "Eq. (16)" in out


def test_report_skips_missing_manifest(tmp_path, caplog):
    run(tmp_path, "budget")
    orphan = tmp_path / "orphan"
    orphan.mkdir()
    (orphan / "results.json").write_text("{}")
    with caplog.at_level(logging.WARNING, logger="laserclock"):
        code, summary = cli.report(tmp_path)
    assert code == 0 and len(summary["runs"]) == 1
    assert "no manifest" in caplog.text
