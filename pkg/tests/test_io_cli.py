import json
import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlqwalk import io as nio
from nlqwalk.cli import parse_angle, parse_range, run_cli
from nlqwalk.regimes import phase_diagram
from nlqwalk.walk import Recorder, WalkConfig, evolve


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips_doubles(x):
    assert float(nio.fmt(x)) == x


def test_record_round_trip(tmp_path):
    rec = evolve(WalkConfig(11, 0.7, 0.4, seed=2, total_steps=200), Recorder(density_stride=20))
    nio.serialize_record(rec, tmp_path / "r.csv", tmp_path / "r.density.csv")
    back = nio.parse_record(tmp_path / "r.csv")
    np.testing.assert_array_equal(back["t"], np.arange(201))
    np.testing.assert_array_equal(back["coherence"], rec.coherence)
    np.testing.assert_array_equal(back["participation"], rec.participation)
    t, dens = nio.parse_density(tmp_path / "r.density.csv")
    times, expected = rec.density_matrix()
    np.testing.assert_array_equal(t, times)
    np.testing.assert_array_equal(dens, expected)
    raw = (tmp_path / "r.csv").read_bytes()
    assert b"\r\n" not in raw and raw.startswith(b"t,coherence,participation\n")


def test_grid_one_cell_round_trip(tmp_path):
    g = phase_diagram([0.1], [0.5], WalkConfig(11, 0.5, seed=4, total_steps=400))
    nio.serialize_grid(g, tmp_path / "g.csv", tmp_path / "g.json")
    back = nio.parse_grid_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(back["mean_coherence"], g.mean_coherence)
    assert back["labels"][0, 0] == g.labels[0, 0].value
    assert int(back["seeds"][0, 0]) == int(g.seeds[0, 0, 0])
    data = nio.read_json(tmp_path / "g.json")
    assert data["labels"] == [[g.labels[0, 0].value]]
    assert data["mean_coherence"][0][0] == g.mean_coherence[0, 0]


def test_atomic_write_keeps_old_file_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.csv"
    target.write_text("old\n")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        nio.atomic_write(target, "new contents\n")
    assert target.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]


def test_manifest_rejects_unknown_command():
    with pytest.raises(ValueError):
        nio.make_manifest("bogus", {}, {})


# ---------------------------------------------------------------- parsing

@pytest.mark.parametrize("text,value", [
    ("0.25pi", math.pi / 4), ("pi/4", math.pi / 4), ("0.7853981633974483", math.pi / 4),
    ("pi", math.pi), ("2pi/3", 2 * math.pi / 3), ("0.5π", math.pi / 2), ("1e-1pi", 0.1 * math.pi),
])
def test_parse_angle(text, value):
    assert abs(parse_angle(text) - value) <= 1e-15


def test_parse_range():
    np.testing.assert_allclose(parse_range("0:0.5:6"), [0, 0.1, 0.2, 0.3, 0.4, 0.5])
    np.testing.assert_allclose(parse_range("0.02pi:0.48pi:3", parse_angle),
                               np.array([0.02, 0.25, 0.48]) * math.pi, atol=1e-15)
    np.testing.assert_allclose(parse_range("0.1,0.3"), [0.1, 0.3])
    np.testing.assert_allclose(parse_range("0.2"), [0.2])


# ---------------------------------------------------------------- CLI

def _evolve_args(out, *extra):
    return ["evolve", "--n", "21", "--theta", "0.25pi", "--chi", "0.3", "--steps", "400",
            "--seed", "7", "--out", str(out), *extra]


def test_cli_evolve(tmp_path):
    out = tmp_path / "run.csv"
    assert run_cli(_evolve_args(out)) == 0
    series = nio.parse_record(out)
    assert len(series["t"]) == 401
    manifest = nio.read_json(tmp_path / "run.manifest.json")
    assert manifest["command"] == "evolve"
    assert manifest["config"]["theta_pi"] == 0.25
    assert manifest["config"]["seed"] == 7
    assert manifest["thresholds"]["osc_frac"] == 0.25
    assert manifest["result"]["regime"]["kind"] in {"Stationary", "Breathing", "Chaoticlike", "SelfFocusing"}
    assert (tmp_path / "run.density.csv").exists()


def test_cli_evolve_zero_steps(tmp_path):
    out = tmp_path / "z.csv"
    args = _evolve_args(out)
    args[args.index("--steps") + 1] = "0"
    assert run_cli(args) == 0
    assert len(nio.parse_record(out)["t"]) == 1
    assert nio.read_json(tmp_path / "z.manifest.json")["result"]["regime"] is None


def test_cli_reproducible_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert run_cli(_evolve_args(a / "run.csv")) == 0
    assert run_cli(_evolve_args(b / "run.csv")) == 0
    for name in ("run.csv", "run.density.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = nio.read_json(a / "run.manifest.json")
    mb = nio.read_json(b / "run.manifest.json")
    for m in (ma, mb):
        for key in ("created_at", "elapsed_s", "outputs", "argv"):
            m.pop(key, None)
    assert ma == mb


def test_cli_manifest_reproduces_output(tmp_path):
    assert run_cli(_evolve_args(tmp_path / "run.csv", "--density-stride", "0")) == 0
    m = nio.read_json(tmp_path / "run.manifest.json")
    rec = evolve(WalkConfig.from_dict(m["config"]), Recorder(density_stride=0))
    np.testing.assert_array_equal(nio.parse_record(tmp_path / "run.csv")["coherence"], rec.coherence)


def test_cli_angle_forms_agree(tmp_path):
    assert run_cli(_evolve_args(tmp_path / "a.csv", "--density-stride", "0")) == 0
    args = _evolve_args(tmp_path / "b.csv", "--density-stride", "0")
    args[args.index("--theta") + 1] = "0.7853981633974483"
    assert run_cli(args) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_invalid_config(tmp_path, capsys):
    assert run_cli(_evolve_args(tmp_path / "x.csv", "--transient", "400")) == 1
    assert "transient" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_cli_unknown_flag(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run_cli(_evolve_args(tmp_path / "x.csv", "--bogus"))
    assert exc.value.code == 2


def test_cli_unwritable_path(tmp_path, capsys):
    assert run_cli(_evolve_args(tmp_path / "missing" / "x.csv")) == 1
    assert "does not exist" in capsys.readouterr().err


def test_cli_plot(tmp_path):
    assert run_cli(_evolve_args(tmp_path / "run.csv", "--plot")) == 0
    png = tmp_path / "run.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert nio.read_json(tmp_path / "run.manifest.json")["outputs"]["figure"] == str(png)


def test_cli_scan_chi(tmp_path):
    out = tmp_path / "scan.csv"
    assert run_cli(["scan-chi", "--n", "21", "--theta", "0.25pi", "--chi", "0:0.08:9",
                    "--steps", "10000", "--out", str(out), "--plot"]) == 0
    header, rows = nio.read_csv(out)
    assert header == ["chi", "coherence_min", "coherence_min_frac"] and len(rows) == 9
    result = nio.read_json(tmp_path / "scan.json")
    assert result["critical"]["found"]
    assert 0.03 < result["critical"]["chi_sd"] < 0.05
    assert "ratio" in result["jump"]
    assert (tmp_path / "scan.png").exists()


def test_cli_scan_chi_requires_zero_start(tmp_path):
    assert run_cli(["scan-chi", "--n", "21", "--theta", "0.25pi", "--chi", "0.01:0.08:9",
                    "--steps", "100", "--out", str(tmp_path / "s.csv")]) == 1


def test_cli_threshold_curve(tmp_path):
    out = tmp_path / "curve.json"
    assert run_cli(["threshold-curve", "--n", "21", "--theta", "0.2pi:0.4pi:3",
                    "--chi", "0:0.2:21", "--resolution", "1e-3", "--out", str(out), "--plot"]) == 0
    data = nio.read_json(out)
    curve = data["curves"][0]
    assert curve["n_sites"] == 21 and curve["status"] == ["ok"] * 3
    assert curve["monotonicity_violations"] == []
    header, rows = nio.read_csv(tmp_path / "curve.csv")
    assert header[:2] == ["n_sites", "theta"] and len(rows) == 3


def test_cli_scaling(tmp_path):
    out = tmp_path / "sc.json"
    assert run_cli(["scaling", "--n", "11,15,21,31", "--theta", "0.25pi", "--chi", "0:0.2:21",
                    "--resolution", "2e-4", "--out", str(out), "--plot"]) == 0
    fit = nio.read_json(out)["fits"][0]
    assert -1.2 < fit["exponent"] < -0.8
    assert (tmp_path / "sc.png").exists()


def test_cli_scaling_undetected_is_partial(tmp_path):
    out = tmp_path / "sc.json"
    code = run_cli(["scaling", "--n", "11,15,21,31", "--theta", "0.25pi", "--chi", "0:0.001:2",
                    "--steps", "200", "--out", str(out)])
    assert code == 3
    assert "error" in nio.read_json(out)["fits"][0]


def test_cli_phase_diagram(tmp_path):
    out = tmp_path / "pd.csv"
    assert run_cli(["phase-diagram", "--n", "11", "--chi", "0:0.6:2", "--theta", "0.2pi:0.4pi:2",
                    "--steps", "1000", "--threads", "2", "--out", str(out), "--plot"]) == 0
    data = nio.read_json(tmp_path / "pd.json")
    assert len(data["labels"]) == 2 and len(data["labels"][0]) == 2
    assert data["labels"][0] == ["Stationary", "Stationary"]
    header, rows = nio.read_csv(out)
    assert header == nio.GRID_HEADER and len(rows) == 4
    assert (tmp_path / "pd.png").exists()
    m = nio.read_json(tmp_path / "pd.manifest.json")
    assert m["failed_points"] == 0 and m["config"]["n_seeds"] == 1


def test_cli_phase_diagram_partial_failure(tmp_path, capsys):
    out = tmp_path / "pd.csv"
    code = run_cli(["phase-diagram", "--n", "11", "--chi", "0.1", "--theta=0.5,7",
                    "--steps", "300", "--out", str(out)])
    assert code == 3
    data = nio.read_json(tmp_path / "pd.json")
    assert data["labels"][0][1] is None and data["labels"][0][0] is not None
    assert data["errors"][0]["theta_index"] == 1
    assert json.loads((tmp_path / "pd.manifest.json").read_text())["failed_points"] == 1
