import json

import pytest

from byzsim.cli import EXIT_CONFIG, EXIT_OK, main
from byzsim.logio import read_log

CONFIG = {
    "seed": 5,
    "name": "cli_run",
    "n_clients": 20,
    "sample_ratio": 0.5,
    "malicious_fraction": 0.1,
    "rounds": 2,
    "dataset": {"num_classes": 3, "samples_per_client": 15, "test_samples": 150,
                "feature_dim": 5, "class_separation": 3.0, "root_size": 30},
    "attack": {"kind": "gaussian"},
    "defense": {"mode": "black_box_uniform"},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(CONFIG))
    return path


def test_run_writes_log_and_summary(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    code = main(["run", str(config_path), "--out", str(out), "--quiet"])
    assert code == EXIT_OK
    log = read_log(out / "cli_run_seed5.jsonl")
    assert len(log.records) == 2
    assert "negative_impact" in log.summary


def test_run_seed_override(tmp_path, config_path):
    out = tmp_path / "out"
    assert main(["run", str(config_path), "--out", str(out), "--seed", "9",
                 "--quiet"]) == EXIT_OK
    assert (out / "cli_run_seed9.jsonl").exists()


def test_run_threads_byte_identical(tmp_path, config_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["run", str(config_path), "--out", str(out1), "--quiet"]) == EXIT_OK
    assert main(["run", str(config_path), "--out", str(out2), "--threads", "4",
                 "--quiet"]) == EXIT_OK
    a = (out1 / "cli_run_seed5.jsonl").read_bytes()
    b = (out2 / "cli_run_seed5.jsonl").read_bytes()
    assert a == b


def test_run_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"sample_ratio": 2.0}))
    assert main(["run", str(path), "--quiet"]) == EXIT_CONFIG


def test_run_missing_config_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "nope.json"), "--quiet"]) == EXIT_CONFIG


def test_env_var_out_dir(tmp_path, config_path, monkeypatch):
    monkeypatch.setenv("BYZSIM_OUT", str(tmp_path / "envout"))
    monkeypatch.chdir(tmp_path)
    assert main(["run", str(config_path), "--quiet"]) == EXIT_OK
    assert (tmp_path / "envout" / "cli_run_seed5.jsonl").exists()


def test_sweep_and_report(tmp_path, config_path):
    cfg_dir = tmp_path / "configs"
    cfg_dir.mkdir()
    for i, frac in enumerate((0.0, 0.1)):
        doc = dict(CONFIG)
        doc["name"] = f"s{i}"
        doc["malicious_fraction"] = frac
        (cfg_dir / f"s{i}.json").write_text(json.dumps(doc))
    out = tmp_path / "sweepout"
    assert main(["sweep", str(cfg_dir), "--out", str(out), "--quiet"]) == EXIT_OK
    table = (out / "comparison.csv").read_text()
    assert table.count("\n") == 3  # header + 2 rows
    logs = sorted(p.name for p in out.glob("s*_seed5.jsonl"))
    assert logs == ["s0_seed5.jsonl", "s1_seed5.jsonl"]

    report_out = tmp_path / "reportout"
    assert main(["report", str(out / "s0_seed5.jsonl"), str(out / "s1_seed5.jsonl"),
                 "--out", str(report_out), "--quiet"]) == EXIT_OK
    assert (report_out / "report.csv").exists()


def test_sweep_empty_dir_is_config_error(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    assert main(["sweep", str(empty), "--quiet"]) == EXIT_CONFIG


def test_theory_subcommand(tmp_path, capsys):
    inputs = {"L": 1.0, "G_l2": 1.0, "G_g2": 0.5, "K": 10, "h_m": 1, "T": 100,
              "expected_alpha": 0.2, "F0_gap": 1.0, "grad0_sq": 1.0}
    path = tmp_path / "theory.json"
    path.write_text(json.dumps(inputs))
    assert main(["theory", str(path), "--quiet"]) == EXIT_OK
    out = capsys.readouterr().out
    doc = json.loads(out.strip().splitlines()[-1])
    assert 0 < doc["eta"] <= 1 / 8
    assert doc["bound"] > 0


def test_theory_bad_inputs(tmp_path):
    path = tmp_path / "theory.json"
    path.write_text(json.dumps({"L": 1.0}))
    assert main(["theory", str(path), "--quiet"]) == EXIT_CONFIG


def test_runtime_failure_exit_code(tmp_path, config_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("a file where the out dir should be")
    code = main(["run", str(config_path), "--out", str(blocker / "sub"), "--quiet"])
    assert code == 2
