import json
import warnings

import pytest

from skpura_plots import extract
from skpura_plots.render import render as run_render
from skpura_plots.extract import SweepRow, extract_required_ebn0, interpolate_crossing
from skpura_plots.render import CurveSpec

HEADER = ("scheme,M,Ka,EbN0_dB,frames,user_errors,pupe,mean_trials_used,"
          "wall_seconds,master_seed,git_describe")


def write_csv(path, rows):
    lines = [HEADER]
    for scheme, m, ka, ebn0, pupe in rows:
        lines.append(f"{scheme},{m},{ka},{ebn0:g},100,{int(pupe*100*ka)},{pupe!r},3.0,1.0,7,abc")
    path.write_text("\n".join(lines) + "\n")


def test_interpolation_reference_example():
    val, flag = interpolate_crossing([(10.0, 0.2), (12.0, 0.05)], 0.1)
    assert flag == "ok"
    assert val == 10.0 + 2.0 * (0.2 - 0.1) / (0.2 - 0.05)
    assert round(val, 2) == 11.33


def test_exact_grid_hit_returns_point():
    val, flag = interpolate_crossing([(8.0, 0.4), (10.0, 0.1), (12.0, 0.01)], 0.1)
    assert (val, flag) == (10.0, "ok")


def test_flat_zero_flagged_below_grid():
    val, flag = interpolate_crossing([(0.0, 0.0), (5.0, 0.0)], 0.1)
    assert val is None and flag == "below grid"


def test_all_above_flagged():
    val, flag = interpolate_crossing([(0.0, 0.9), (5.0, 0.5)], 0.1)
    assert val is None and flag == "above grid"


def test_extract_groups_and_flags(tmp_path):
    p = tmp_path / "sweep.csv"
    write_csv(p, [
        ("row1", 8, 10, -10.0, 0.8), ("row1", 8, 10, -8.0, 0.3), ("row1", 8, 10, -6.0, 0.02),
        ("row1", 1, 10, 10.0, 0.0), ("row1", 1, 10, 14.0, 0.0),
    ])
    rows = extract.read_sweep_csv(str(p))
    thr = extract_required_ebn0(rows, 0.1)
    by_m = {t.m: t for t in thr}
    assert by_m[8].flag == "ok" and -8.0 < by_m[8].ebn0_db < -6.0
    assert by_m[1].flag == "below grid"


def test_render_sidecar_matches_extraction(tmp_path):
    p = tmp_path / "sweep.csv"
    write_csv(p, [
        ("row1", 8, 10, -10.0, 0.8), ("row1", 8, 10, -8.0, 0.3), ("row1", 8, 10, -6.0, 0.02),
        ("row2", 8, 50, -6.0, 0.5), ("row2", 8, 50, -2.0, 0.05),
    ])
    out = tmp_path / "figs"
    sidecar = run_render(CurveSpec(csv_paths=[str(p)], eps=0.1, out_dir=str(out)))
    thr = extract_required_ebn0(extract.read_sweep_csv(str(p)), 0.1)
    expect = [
        {"scheme": t.scheme, "M": t.m, "Ka": t.ka, "required_EbN0_dB": t.ebn0_db}
        for t in thr if t.flag == "ok"
    ]
    assert sidecar["points"] == expect
    on_disk = json.loads((out / "threshold_points.json").read_text())
    assert on_disk["points"] == expect
    for fig in sidecar["figures"]:
        assert (tmp_path / "figs").exists()


def test_render_empty_groups_warns_but_writes(tmp_path):
    p = tmp_path / "sweep.csv"
    write_csv(p, [("row1", 8, 10, -10.0, 0.0)])
    out = tmp_path / "figs"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sidecar = run_render(CurveSpec(csv_paths=[str(p)], eps=0.1, out_dir=str(out)))
    assert any("below grid" in str(w.message) for w in caught)
    assert sidecar["points"] == []
    assert (out / "required_ebn0_vs_ka.png").exists()


def test_bound_overlay_consumed(tmp_path):
    p = tmp_path / "sweep.csv"
    write_csv(p, [("row1", 8, 10, -10.0, 0.8), ("row1", 8, 10, -6.0, 0.02)])
    b = tmp_path / "bound.csv"
    b.write_text("M,Ka,required_EbN0_dB\n8,10,-12.5\n8,50,-7.0\n")
    out = tmp_path / "figs"
    sidecar = run_render(CurveSpec(csv_paths=[str(p)], eps=0.1,
                                      out_dir=str(out), bound_csv=str(b)))
    assert (out / "required_ebn0_vs_ka.png").exists()


def test_cli_roundtrip(tmp_path, capsys):
    from skpura_plots import cli

    p = tmp_path / "sweep.csv"
    write_csv(p, [("row1", 8, 10, -10.0, 0.8), ("row1", 8, 10, -6.0, 0.02)])
    rc = cli.main(["--csv", str(p), "--eps", "0.1", "--out", str(tmp_path / "o")])
    assert rc == 0
    assert (tmp_path / "o" / "threshold_points.json").exists()


def test_cli_unreadable_csv_fails(tmp_path):
    from skpura_plots import cli

    rc = cli.main(["--csv", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_schema_mismatch_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        extract.read_sweep_csv(str(p))
