import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockstab.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, compare_tables, parse_grid, run
from shockstab.exceptions import ConfigError

GOLDENS = Path(__file__).parent / "goldens"


def manifest(d):
    return json.loads((Path(d) / "manifest.json").read_text())


def assert_manifest_complete(d):
    m = manifest(d)
    listed = [o["file"] for o in m["outputs"]]
    present = sorted(p.name for p in Path(d).iterdir() if p.name != "manifest.json")
    assert sorted(listed) == present and len(set(listed)) == len(listed)
    assert {"inputs", "versions", "wall_time_s", "tolerances"} <= set(m)


# --------------------------------------------------------------------------
# grids


def test_grid_forms():
    assert parse_grid("0:0.1:0.3").tolist() == [0.0, 0.1, 0.2, 0.3]
    assert parse_grid("-8:0.01:0")[-1] == 0.0 and len(parse_grid("-8:0.01:0")) == 801
    assert parse_grid("1:-0.5:0").tolist() == [1.0, 0.5, 0.0]
    assert parse_grid("1, 2,3").tolist() == [1.0, 2.0, 3.0]
    assert parse_grid(2.5).tolist() == [2.5]


@pytest.mark.parametrize("bad", ["", "0:1:-1", "0:0:1", "a:b:c", "1:2", "nan"])
def test_grid_rejects(bad):
    with pytest.raises(ConfigError):
        parse_grid(bad, "s_grid")


@settings(max_examples=200, deadline=None)
@given(start=st.integers(-1000, 1000), step=st.integers(1, 50), n=st.integers(0, 200))
def test_grid_count_and_endpoints(start, step, n):
    # centi-units so that the decimal values are exact in the grid string
    a, h = start / 100, step / 100
    b = (start + n * step) / 100
    g = parse_grid(f"{a}:{h}:{b}")
    assert len(g) == n + 1 and g[0] == a and g[-1] == b
    assert np.all(np.diff(g) > 0)


# --------------------------------------------------------------------------
# subcommands


def test_lopatinski_golden_bracket(tmp_path):
    rc = run(["lopatinski", "--model", "local", "--anchor", "1,0", "--s-grid", "-8:0.01:0",
              "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "transition.json").read_text())
    lo, hi = sorted(rep["bracket"])
    assert -3.3348293 <= lo and hi <= -3.334829
    assert_manifest_complete(tmp_path)


def test_empty_grid_is_a_config_error(tmp_path, capsys):
    rc = run(["hugoniot", "--s-grid", "0:0.1:-1", "--output-dir", str(tmp_path)])
    assert rc == EXIT_CONFIG
    assert "s_grid" in capsys.readouterr().err


def test_argparse_errors_map_to_config_exit(tmp_path):
    assert run(["hugoniot", "--model", "vacuum"]) == EXIT_CONFIG
    assert run(["no-such-command"]) == EXIT_CONFIG


def test_output_is_deterministic(tmp_path):
    args = ["hugoniot", "--model", "global", "--C", "10", "--s-grid", "-5:0.5:0"]
    assert run(args + ["--output-dir", str(tmp_path / "a")]) == EXIT_OK
    assert run(args + ["--output-dir", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "hugoniot.csv").read_bytes() == (tmp_path / "b" / "hugoniot.csv").read_bytes()
    assert_manifest_complete(tmp_path / "a")


def test_floats_have_17_significant_digits(tmp_path):
    run(["hugoniot", "--model", "local", "--s-grid", "-1,-0.5", "--output-dir", str(tmp_path)])
    rows = list(csv.DictReader(open(tmp_path / "hugoniot.csv")))
    # backward curves are traced from the anchor outward
    assert rows[0]["S"] == "-0.5" and rows[1]["S"] == "-1"
    assert len(rows[0]["tau"].lstrip("-").replace(".", "").lstrip("0")) == 17


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "model": {"kind": "global", "C": 10},
        "anchor": "1,0",
        "hugoniot": {"s_grid": "-2:1:0"},
    }))
    out = tmp_path / "o"
    assert run(["hugoniot", "--config", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    m = manifest(out)
    assert m["inputs"]["model"] == "global" and m["inputs"]["C"] == 10
    rows = list(csv.reader(open(out / "hugoniot.csv")))
    assert len(rows) == 4
    # an explicit flag beats the file
    assert run(["hugoniot", "--config", str(cfg), "--s-grid", "-1:1:0", "--output-dir", str(out)]) == EXIT_OK
    assert len(list(csv.reader(open(out / "hugoniot.csv")))) == 3


def test_config_errors_name_the_field(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"hugoniot": {"s_grid": "-1:1:0", "colour": "red"}}))
    assert run(["hugoniot", "--config", str(cfg)]) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().err
    cfg.write_text("{not json")
    assert run(["hugoniot", "--config", str(cfg)]) == EXIT_CONFIG
    assert run(["hugoniot", "--s-grid", "-1:1:0", "--tolerance-scale", "-1"]) == EXIT_CONFIG


def test_eos_check_rows(tmp_path):
    assert run(["eos-check", "--model", "global", "--C", "10", "--n-tau", "4", "--n-s", "5",
                "--output-dir", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "conditions.csv")))
    assert len(rows) == 1 + 20 and rows[0][:3] == ["tau", "S", "G1"]
    summary = json.loads((tmp_path / "conditions_summary.json").read_text())["holds_everywhere"]
    assert all(summary[g] for g in ("G1", "G2", "G3", "G4", "G5", "G6"))
    assert_manifest_complete(tmp_path)


def test_profile_outputs(tmp_path):
    assert run(["profile", "--model", "stable", "--s-minus", "-2", "--output-dir", str(tmp_path)]) == EXIT_OK
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert {"mu", "kappa", "sigma", "U_minus", "U_plus", "L_minus", "L_plus"} <= set(meta)
    header = next(csv.reader(open(tmp_path / "profile.csv")))
    assert header == ["x", "tau", "S", "v", "T", "e"]


def test_profile_without_shock_is_config_error(tmp_path):
    assert run(["profile", "--model", "stable", "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_evans_winding_designer(tmp_path):
    assert run(["evans-winding", "--system", "designer", "--M", "2.72", "--gamma", "0.05", "--radius", "4",
                "--output-dir", str(tmp_path)]) == EXIT_OK
    w = json.loads((tmp_path / "winding.json").read_text())
    assert w["winding"] == 0 and w["rouche_ok"]
    assert_manifest_complete(tmp_path)


def test_evans_roots_designer(tmp_path):
    assert run(["evans-roots", "--system", "designer", "--M", "2.3", "--gamma", "0.65",
                "--box", "-0.04,0.07,-0.06,0.06", "--output-dir", str(tmp_path)]) == EXIT_OK
    roots = json.loads((tmp_path / "roots.json").read_text())["roots"]
    assert len(roots) == 1 and roots[0]["location"][0] == pytest.approx(0.0692, abs=1e-3)


def test_evans_hf_synthetic_single_row(tmp_path):
    assert run(["evans-hf", "--system", "synthetic", "--output-dir", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "hf_table.csv")))
    assert rows[0] == ["R", "error", "C1", "C2"] and len(rows) == 2


def test_goldens_synthetic_and_diff(tmp_path):
    out = tmp_path / "g"
    assert run(["goldens", "--case", "synthetic", "--compare", str(GOLDENS), "--output-dir", str(out)]) == EXIT_OK
    diff = json.loads((out / "golden_diff.json").read_text())
    assert diff["mismatches"] == {"synthetic": []}
    assert_manifest_complete(out)
    # a tampered golden is reported as a numerical failure
    bad = tmp_path / "bad"
    bad.mkdir()
    text = (GOLDENS / "golden_synthetic.csv").read_text().replace("0.5", "0.6")
    (bad / "golden_synthetic.csv").write_text(text)
    assert run(["goldens", "--case", "synthetic", "--compare", str(bad),
                "--output-dir", str(tmp_path / "h")]) == EXIT_NUMERICAL


def test_compare_tables_tolerance(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("R,error\n2,0.10000001\n")
    b.write_text("R,error\n2,0.1\n")
    assert compare_tables(a, b, rtol=1e-6) == []
    assert len(compare_tables(a, b, rtol=1e-9, atol=0)) == 1


def test_designer_scan_single_cell(tmp_path):
    assert run(["designer-scan", "--gamma", "0.4", "--m-gamma", "1.5", "--radius", "6", "--workers", "1",
                "--output-dir", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "scan.csv")))
    assert len(rows) == 1 and rows[0]["root_count"] == "3" and rows[0]["error"] == ""


def test_designer_track_format(tmp_path):
    assert run(["designer-track", "--M", "2.3,2.35", "--gamma", "0.65", "--box", "-0.04,0.07,-0.06,0.06", "--output-dir", str(tmp_path)]) == EXIT_OK
    tr = json.loads((tmp_path / "trajectory.json").read_text())
    assert tr["varying"] == "M" and len(tr["steps"]) == 2
    assert [e["kind"] for e in tr["events"]] == ["window"]
    assert run(["designer-track", "--M", "2.3", "--output-dir", str(tmp_path)]) == EXIT_CONFIG
    assert run(["designer-track", "--M", "2.3,2.4", "--gamma", "0.6,0.7", "--output-dir", str(tmp_path)]) == EXIT_CONFIG
