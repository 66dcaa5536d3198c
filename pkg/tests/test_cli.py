import json
import subprocess
import sys

import pytest

import sparse_regret.harness as harness
from sparse_regret.cli import main


@pytest.fixture(autouse=True)
def single_process(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "1")


def parse_pairs(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines() if "=" in line)


RUN = ["run", "--algo", "ewa-losses", "--adversary", "random-sparse", "--d", "10", "--s", "3", "--T", "200", "--reps", "3", "--seed", "7"]


def test_run_passes_and_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(RUN + ["--out", str(out)]) == 0
    summary = parse_pairs(capsys.readouterr().out)
    assert summary["pass"] == "true" and summary["output"] == str(out)
    assert float(summary["mean_regret"]) <= float(summary["bound"])
    assert out.read_text().startswith("replication,stage,expected_regret,realized_regret,regime_m\n")


def test_run_json_format_by_flag_and_extension(tmp_path):
    assert main(RUN + ["--out", str(tmp_path / "a.out"), "--format", "json"]) == 0
    json.loads((tmp_path / "a.out").read_text())
    assert main(RUN + ["--out", str(tmp_path / "b.json")]) == 0
    json.loads((tmp_path / "b.json").read_text())


def test_bound_violation_exits_two(monkeypatch, capsys):
    monkeypatch.setattr(harness, "bound_for", lambda config, s: (0.0, "upper"))
    assert main(RUN) == 2
    assert parse_pairs(capsys.readouterr().out)["pass"] == "false"


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--algo", "ewa-losses", "--adversary", "random-sparse", "--s", "3", "--T", "10"],
        ["run", "--algo", "nope", "--adversary", "random-sparse", "--d", "4", "--s", "1", "--T", "10"],
        ["run", "--algo", "omd-gains", "--adversary", "random-sparse", "--d", "4", "--s", "1", "--T", "10", "--direction", "loss"],
        ["run", "--algo", "ewa-losses", "--adversary", "random-sparse", "--d", "4", "--s", "1", "--T", "10", "--ramp", "a,b"],
        ["run", "--algo", "ewa-losses", "--adversary", "random-sparse", "--d", "4", "--s", "1", "--T", "10", "--bandit-q", "2"],
        ["bounds", "--d", "4", "--s", "5", "--T", "10"],
        ["bounds", "--d", "4"],
        [],
    ],
)
def test_usage_and_input_errors_exit_one(argv, capsys):
    with pytest.raises(SystemExit) as stop:
        sys.exit(main(argv))
    assert stop.value.code == 1
    assert "error" in capsys.readouterr().err


def test_bandit_precondition_is_named(capsys):
    argv = ["run", "--algo", "bandit-tsallis", "--adversary", "random-sparse", "--d", "8", "--s", "2", "--T", "10"]
    assert main(argv) == 1
    assert "d/s >= e^2" in capsys.readouterr().err


def test_bandit_exponent_override_runs(capsys):
    argv = ["run", "--algo", "bandit-tsallis", "--adversary", "random-sparse", "--d", "8", "--s", "2", "--T", "50", "--bandit-q", "2"]
    assert main(argv) == 0


def test_bounds_table(capsys):
    assert main(["bounds", "--d", "64", "--s", "4", "--T", "40000"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "setting,bound"
    table = dict(line.split(",") for line in lines[1:])
    assert float(table["bandit-losses-upper"]) == pytest.approx(2196.0, abs=0.5)
    assert float(table["bandit-losses-lower"]) == 12.5
    assert main(["bounds", "--d", "10", "--s", "1", "--T", "100"]) == 0
    table = dict(line.split(",") for line in capsys.readouterr().out.strip().splitlines()[1:])
    assert float(table["full-info-gains"]) == 10.0
    assert float(table["bandit-losses-upper"]) > 0
    assert main(["bounds", "--d", "8", "--s", "2", "--T", "100"]) == 0
    table = dict(line.split(",") for line in capsys.readouterr().out.strip().splitlines()[1:])
    assert table["bandit-losses-upper"] == ""


def write_config(tmp_path, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


BASE = {
    "algorithm": "adaptive-losses",
    "adversary": {"kind": "random-sparse", "ramp": [1, 2]},
    "d": 10,
    "s": 2,
    "T": 100,
    "replications": 2,
    "base_seed": 3,
}


def test_config_file_run(tmp_path, capsys):
    doc = dict(BASE, out=str(tmp_path / "c.csv"))
    assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 0
    assert parse_pairs(capsys.readouterr().out)["algorithm"] == "adaptive-losses"
    assert (tmp_path / "c.csv").exists()


def test_config_sweep_runs_the_cartesian_product(tmp_path, capsys):
    doc = dict(BASE, out=str(tmp_path / "s.csv"), sweep={"d": [10, 12], "T": [50, 60]})
    assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 0
    names = sorted(p.name for p in tmp_path.glob("s_*.csv"))
    assert names == ["s_d10_s2_T50.csv", "s_d10_s2_T60.csv", "s_d12_s2_T50.csv", "s_d12_s2_T60.csv"]
    assert capsys.readouterr().out.count("pass=true") == 4


@pytest.mark.parametrize(
    "doc",
    [
        dict(BASE, colour="red"),
        dict(BASE, adversary={"kind": "random-sparse", "shape": 1}),
        dict(BASE, sweep={"d": []}),
        dict(BASE, sweep={"d": [1.5]}),
        dict(BASE, sweep={"k": [1]}),
        {k: v for k, v in BASE.items() if k != "d"},
        [1, 2],
    ],
)
def test_bad_config_files_exit_one(tmp_path, doc, capsys):
    assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 1
    assert "error" in capsys.readouterr().err


def test_config_cannot_be_mixed_with_flags(tmp_path):
    assert main(["run", "--config", str(write_config(tmp_path, BASE)), "--d", "5"]) == 1


def test_unreadable_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", "--config", str(bad)]) == 1


def test_verify_subset(monkeypatch, capsys):
    small = {"tiny": harness.ExperimentConfig("ewa-losses", harness.AdversarySpec("random-sparse", 6, 2, 50), 2, 1)}
    monkeypatch.setattr("sparse_regret.cli.verification_suite", lambda seed=7: small)
    assert main(["verify"]) == 0
    assert capsys.readouterr().out.startswith("check=tiny ")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sparse_regret", "bounds", "--d", "64", "--s", "4", "--T", "40000"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("setting,bound")
    proc = subprocess.run([sys.executable, "-m", "sparse_regret", "run", "--algo", "ewa-losses"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr
