import json
import subprocess
import sys

from splitsim.cli import main
from splitsim.data import load_csv


def _write_config(path, **overrides):
    cfg = {
        "dataset": {"kind": "synthetic", "n": 800, "d_in": 8, "pos_frac": 0.2,
                    "separation": 2.0, "test_frac": 0.2},
        "batch_size": 32,
        "iterations": 25,
        "mechanism": {"kind": "none"},
        "seed": 3,
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


def test_run_command(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json")
    rc = main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out/run.csv").exists()
    assert (tmp_path / "out/summary.csv").exists()
    out = capsys.readouterr().out
    assert "test_auc" in out


def test_run_requires_out_somewhere(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json")
    rc = main(["run", "--config", str(cfg)])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_run_out_from_config(tmp_path):
    cfg = _write_config(tmp_path / "cfg.json", out=str(tmp_path / "fromcfg"))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "fromcfg/run.csv").exists()


def test_seed_override_changes_csv(tmp_path):
    cfg = _write_config(tmp_path / "cfg.json")
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a/run.csv").read_bytes() != (tmp_path / "b/run.csv").read_bytes()


def test_unknown_config_key_exits_2(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"iterations": 5, "bogus": 1}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_invalid_json_exits_2(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_missing_dataset_file_exits_3(tmp_path, capsys):
    cfg = _write_config(
        tmp_path / "cfg.json",
        dataset={"kind": "csv", "path": str(tmp_path / "absent.csv")},
    )
    rc = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 3


def test_sweep_command(tmp_path):
    cfg = _write_config(tmp_path / "cfg.json", iterations=20)
    rc = main(
        ["sweep", "--config", str(cfg), "--mechanism", "iso",
         "--grid", "0.5,2", "--out", str(tmp_path / "sw")]
    )
    assert rc == 0
    lines = (tmp_path / "sw/tradeoff.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "iso"


def test_sweep_bad_grid_exits_2(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json")
    rc = main(["sweep", "--config", str(cfg), "--mechanism", "iso",
               "--grid", "1,zap", "--out", str(tmp_path / "sw")])
    assert rc == 2


def test_gen_data_synthetic(tmp_path):
    out = tmp_path / "data.csv"
    rc = main(["gen-data", "synthetic", "--n", "200", "--d-in", "5", "--out", str(out)])
    assert rc == 0
    ds = load_csv(out)
    assert ds.n == 200 and ds.d == 5


def test_gen_data_toy1d_feeds_run(tmp_path):
    out = tmp_path / "toy.csv"
    assert main(["gen-data", "toy1d", "--n", "600", "--out", str(out)]) == 0
    cfg = _write_config(
        tmp_path / "cfg.json",
        dataset={"kind": "csv", "path": str(out), "test_frac": 0.2},
        iterations=10,
    )
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_module_entry_point(tmp_path):
    cfg = _write_config(tmp_path / "cfg.json", iterations=5)
    proc = subprocess.run(
        [sys.executable, "-m", "splitsim", "run", "--config", str(cfg),
         "--out", str(tmp_path / "out")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out/run.csv").exists()
