import csv
import json
import math

import numpy as np
import pytest

from agmonlab.cli import (BOUNDS_COLUMNS, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, ConfigError, main,
                          parse_alpha_grid)

SMALL_1D = {"scenario": "exact_1d", "grid": {"extent": [[0.0, 8.0]], "n": [401]}}


def _config(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def _read_csv(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.reader(ln for ln in lines if not ln.startswith("#")))
    return header, rows[0], rows[1:]


def test_parse_alpha_grid():
    g = parse_alpha_grid("0.5:8:5")
    assert g[0] == pytest.approx(0.5) and g[-1] == pytest.approx(8.0)
    assert g[2] == pytest.approx(2.0)
    assert parse_alpha_grid("1:3:3:lin") == pytest.approx((1.0, 2.0, 3.0))
    for bad in ("1:2", "2:1:4", "a:b:c", "1:2:3:cubic", "0:1:3"):
        with pytest.raises(ConfigError):
            parse_alpha_grid(bad)


def test_eig_exact_1d_record(tmp_path):
    cfg = _config(tmp_path, SMALL_1D)
    assert main(["eig", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rec = json.loads((tmp_path / "eig.json").read_text())
    assert rec["lambda"] == 0.0 and rec["residual"] == 0.0
    header, cols, rows = _read_csv(tmp_path / "u.csv")
    assert cols == ["x", "u"] and len(rows) == 401
    assert any(h.startswith("# seed=") for h in header)
    assert any(h.startswith("# git=") for h in header)
    x, u = np.array(rows, dtype=float).T
    assert np.allclose(u, np.sinh(8 - x) / np.sinh(8), atol=1e-3)


def test_eig_four_squares_below_box_ground_state(tmp_path):
    cfg = _config(tmp_path, {"scenario": "four_squares", "params": {"m": 100},
                             "grid": {"extent": [[0, 2], [0, 2]], "n": [65, 65]},
                             "lambda": "eigensolve"})
    assert main(["eig", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rec = json.loads((tmp_path / "eig.json").read_text())
    assert rec["lambda"] <= math.pi ** 2 and rec["walled"]


@pytest.mark.parametrize("payload", [
    {"scenario": "exact_1d", "grid": {"extent": [[0, 1]]}},
    {"scenario": "exact_1d", "unknown_key": 1},
    {"scenario": "nowhere"},
    {"params": {}},
    {"scenario": "exact_1d", "lambda": "guess"},
    {"scenario": "exact_1d", "alpha_grid": "1:2"},
])
def test_malformed_config_exit_2(tmp_path, payload, capsys):
    cfg = _config(tmp_path, payload)
    assert main(["eig", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err
    assert not (tmp_path / "eig.json").exists()


def test_unreadable_config_exit_2(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["eig", "--config", str(p)]) == EXIT_CONFIG
    assert main(["eig", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_missing_scenario_exit_2(tmp_path):
    assert main(["bounds", "--out", str(tmp_path)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as e:
        main(["bounds", "--scenario", "nowhere"])
    assert e.value.code == 2


def test_point_outside_grid_exit_2(tmp_path):
    cfg = _config(tmp_path, SMALL_1D)
    assert main(["measure", "--config", cfg, "--point", "9.5", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_agmon_columns_and_empty_bubble(tmp_path):
    cfg = _config(tmp_path, SMALL_1D)
    # the smallest positive rho on this grid is sqrt(2 * 0.5) * h = 0.02
    assert main(["agmon", "--config", cfg, "--alpha", "0.001", "--out", str(tmp_path)]) == EXIT_OK
    _, cols, rows = _read_csv(tmp_path / "agmon.csv")
    assert cols == ["x", "rho", "laplacian", "flag", "cut_locus", "region"]
    x, rho = np.array([r[:2] for r in rows], dtype=float).T
    assert np.allclose(rho, x, atol=0.02)
    header, bcols, brows = _read_csv(tmp_path / "bubble.csv")
    assert bcols == ["x", "class"] and brows == []
    assert header[-1] == "# alpha=0.001"


def test_agmon_radial_shell_laplacian_negative(tmp_path):
    cfg = _config(tmp_path, {"scenario": "radial_shell",
                             "grid": {"extent": [[-1.5, 1.5], [-1.5, 1.5]], "n": [121, 121]}})
    assert main(["agmon", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    _, cols, rows = _read_csv(tmp_path / "agmon.csv")
    a = np.array(rows, dtype=float)
    r = np.hypot(a[:, 0], a[:, 1])
    band = (r > 0.3) & (r < 0.8) & np.isfinite(a[:, 3])
    assert band.sum() > 100 and np.mean(a[band, 3] < 0) > 0.95


def test_outputs_byte_identical(tmp_path):
    cfg = _config(tmp_path, SMALL_1D)
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["bounds", "--config", cfg, "--seed", "5", "--samples", "400",
                     "--point", "1.0", "--point", "2.5", "--out", str(d)]) == EXIT_OK
        assert main(["measure", "--config", cfg, "--seed", "5", "--samples", "400",
                     "--alpha", "3", "--point", "1.0", "--dt", "1e-3", "--out", str(d)]) in (0, 1)
        outs.append({f: (d / f).read_bytes() for f in ("bounds.csv", "bounds.json",
                                                        "measure.json")})
    assert outs[0] == outs[1]


def test_bounds_columns_and_soundness(tmp_path):
    cfg = _config(tmp_path, SMALL_1D)
    code = main(["bounds", "--config", cfg, "--samples", "1000", "--point", "0.5",
                 "--point", "2.0", "--alpha-grid", "0.25:6:16", "--out", str(tmp_path)])
    assert code == EXIT_OK
    _, cols, rows = _read_csv(tmp_path / "bounds.csv")
    assert cols == BOUNDS_COLUMNS and len(rows) == 2
    rec = json.loads((tmp_path / "bounds.json").read_text())
    assert rec["violations"] == [] and rec["theorem3_valid"] == 2


def test_bounds_soundness_failure_exit_1(tmp_path, monkeypatch):
    import agmonlab.bounds as b

    monkeypatch.setattr(b, "theorem1_certified", lambda *a, **k: (0.0, 1.0))
    cfg = _config(tmp_path, SMALL_1D)
    code = main(["bounds", "--config", cfg, "--samples", "200", "--point", "1.0",
                 "--out", str(tmp_path)])
    assert code == EXIT_FAIL
    assert json.loads((tmp_path / "bounds.json").read_text())["violations"]


def test_measure_interval(tmp_path):
    """Exit from (0, 4) through 0 has probability 1 - x/4."""
    cfg = _config(tmp_path, {"scenario": "exact_1d", "grid": {"extent": [[0.0, 4.0]], "n": [401]}})
    code = main(["measure", "--config", cfg, "--samples", "4000", "--dt", "1e-4",
                 "--point", "1.0", "--point", "3.0", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rec = json.loads((tmp_path / "measure.json").read_text())
    for p in rec["points"]:
        x = p["point"][0]
        assert p["pde"] == pytest.approx(1 - x / 4, abs=1e-8)
        assert p["agree"]
        assert abs(p["mc"]["value"] - (1 - x / 4)) <= 3 * p["mc"]["stderr"] + 0.02


def test_measure_strip_decays_along_axis(tmp_path):
    cfg = _config(tmp_path, {"scenario": "strip",
                             "grid": {"extent": [[-4.0, 12.0], [-3.0, 3.0]], "n": [161, 61]}})
    args = ["measure", "--config", cfg, "--samples", "200", "--dt", "1e-3", "--alpha", "3",
            "--out", str(tmp_path)]
    for x in (1.5, 2.0, 2.5, 3.0):
        args += ["--point", f"{x},0"]
    assert main(args) in (EXIT_OK, EXIT_FAIL)
    pde = [p["pde"] for p in json.loads((tmp_path / "measure.json").read_text())["points"]]
    assert all(a > b for a, b in zip(pde, pde[1:]))


def test_closed_forms_selftest(tmp_path, capsys):
    assert main(["closed-forms", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out and all(ln.startswith("PASS") for ln in out)
    rep = json.loads((tmp_path / "closed_forms.json").read_text())
    assert all(c["passed"] for c in rep["checks"])


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    cfg = _config(tmp_path, SMALL_1D)
    r = subprocess.run([sys.executable, "-m", "agmonlab.cli", "eig", "--config", cfg,
                        "--out", str(tmp_path)], capture_output=True, text=True, timeout=300)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "agmonlab.cli", "eig"], capture_output=True,
                       text=True, timeout=300)
    assert r.returncode == 2
