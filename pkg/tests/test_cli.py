import json
import os

import numpy as np
import pytest

from skpura import cli


def write_config(path, **overrides):
    cfg = {
        "scheme": "row1",
        "M": 2,
        "ebn0_db": [25.0],
        "ka": [1],
        "frames": 2,
        "master_seed": 11,
        "output": str(path.parent / "out.csv"),
        "receiver": {"t_max": 3, "outer_iters": 4, "bigamp_max_iter": 40,
                     "bigamp_tol": 1e-4, "n_top": 6},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return cfg


def read_body(path):
    lines = path.read_text().strip().split("\n")
    rows = [line.split(",") for line in lines[1:]]
    # blank out the wall_seconds column (index 8)
    for r in rows:
        r[8] = "X"
    return lines[0], rows


def test_high_snr_single_user_row(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    out = cli.run_experiment(str(cfg_path))
    header, rows = read_body(tmp_path / "out.csv")
    assert header == cli.CSV_HEADER
    assert len(rows) == 1
    scheme, M, ka, ebn0, frames, errors, pupe = rows[0][:7]
    assert (scheme, M, ka, ebn0, frames) == ("row1", "2", "1", "25", "2")
    assert errors == "0" and float(pupe) == 0.0


def test_determinism_across_runs_and_workers(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, ebn0_db=[25.0, -5.0], frames=2)
    cli.run_experiment(str(cfg_path), workers=1)
    h1, b1 = read_body(tmp_path / "out.csv")
    cli.run_experiment(str(cfg_path), workers=1)
    h2, b2 = read_body(tmp_path / "out.csv")
    cli.run_experiment(str(cfg_path), workers=2)
    h3, b3 = read_body(tmp_path / "out.csv")
    assert b1 == b2 == b3


def test_invalid_scheme_exits_nonzero_without_csv(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, scheme="row9")
    rc = cli.main(["simulate", "--config", str(cfg_path)])
    assert rc == 1
    assert not (tmp_path / "out.csv").exists()


def test_malformed_json_diagnostic(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text("{not json")
    rc = cli.main(["simulate", "--config", str(cfg_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "bad.json" in err


def test_missing_field_diagnostic(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg = write_config(cfg_path)
    del cfg["frames"]
    cfg_path.write_text(json.dumps(cfg))
    with pytest.raises(cli.ConfigFileError, match="frames"):
        cli.load_experiment_config(str(cfg_path))


def test_resume_skips_completed_frames(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path, frames=3)
    cli.run_experiment(str(cfg_path))
    progress = tmp_path / "out.csv.progress"
    assert len(progress.read_text().strip().split("\n")) == 3
    _, before = read_body(tmp_path / "out.csv")
    # truncate the progress file to simulate an interrupted run
    lines = progress.read_text().strip().split("\n")
    progress.write_text("\n".join(lines[:2]) + "\n")
    cli.run_experiment(str(cfg_path), resume=True)
    _, after = read_body(tmp_path / "out.csv")
    assert before == after
    # only the one missing frame was recomputed
    assert len(progress.read_text().strip().split("\n")) == 3


def test_env_output_override(tmp_path, monkeypatch):
    cfg_path = tmp_path / "cfg.json"
    write_config(cfg_path)
    target = tmp_path / "elsewhere.csv"
    monkeypatch.setenv(cli.ENV_OUTPUT, str(target))
    cli.run_experiment(str(cfg_path))
    assert target.exists()


def test_bound_subcommand(tmp_path):
    cfg_path = tmp_path / "bound.json"
    cfg_path.write_text(json.dumps({
        "M": [1, 8], "ka": [10], "eps": 0.1, "realizations": 5000,
        "seed": 4, "output": str(tmp_path / "bound.csv"),
    }))
    rc = cli.main(["bound", "--config", str(cfg_path)])
    assert rc == 0
    lines = (tmp_path / "bound.csv").read_text().strip().split("\n")
    assert lines[0] == "M,Ka,required_EbN0_dB"
    assert len(lines) == 3
    vals = {int(l.split(",")[0]): float(l.split(",")[2]) for l in lines[1:]}
    assert vals[8] < vals[1]


def test_bound_delegates_to_module(tmp_path):
    from skpura import bound as bound_mod

    cfg_path = tmp_path / "bound.json"
    cfg_path.write_text(json.dumps({
        "M": [2], "ka": [5], "eps": 0.1, "realizations": 3000,
        "seed": 7, "output": str(tmp_path / "b.csv"),
    }))
    cli.run_bound(str(cfg_path))
    val = float((tmp_path / "b.csv").read_text().strip().split("\n")[1].split(",")[2])
    ref = bound_mod.required_ebn0(bound_mod.BoundConfig(M=2, K_a=5, eps=0.1,
                                                        realizations=3000, seed=7))
    assert val == ref


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
