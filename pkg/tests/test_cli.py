import math
import subprocess
import sys

import numpy as np
import pytest

from photoalign.cli import EIGEN_COLUMNS, EXIT, TRACE_COLUMNS, main, read_csv

from .test_sweep import SMALL


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_eigen_harmonic(tmp_path):
    cfg = write(tmp_path, '[potential]\nground = "harmonic"\nharmonic_spacing = "1 GHz"\n[eigen]\nn_levels = 6\n')
    assert main(["eigen", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == EXIT["ok"]
    meta, header, rows = read_csv(tmp_path / "o" / "levels.csv")
    assert tuple(header) == EIGEN_COLUMNS
    e = np.array([float(r[header.index("energy_mhz")]) for r in rows])
    np.testing.assert_allclose(e, 1000.0 * (np.arange(6) + 0.5), rtol=1e-6)
    assert "config_hash" in meta and (tmp_path / "o" / "config.toml").exists()


def test_eigen_morse(tmp_path):
    text = (
        '[potential]\nground = "morse"\nmorse_depth = "100 GHz"\nmorse_center = "20 bohr"\n'
        'morse_range = "0.3 1/bohr"\n[grid]\nr_max = "60 bohr"\nbeta = 8.0\n[eigen]\nn_levels = 4\n'
    )
    cfg = write(tmp_path, text)
    assert main(["eigen", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == EXIT["ok"]
    _, header, rows = read_csv(tmp_path / "levels.csv")
    e = np.array([float(r[header.index("energy_mhz")]) for r in rows])
    # Morse levels relative to the dissociation limit, written out from first principles
    from scipy import constants as c

    mu = 86.909180527 / 2 * c.atomic_mass
    a = 0.3 / c.physical_constants["Bohr radius"][0]
    d = 100e9 * c.h
    nu = np.sqrt(2 * mu * d) / (a * c.hbar)
    n = np.arange(4)
    exact = -d * (1 - (n + 0.5) / nu) ** 2 / c.h * 1e-6
    np.testing.assert_allclose(e, exact, rtol=1e-6)


def test_eigen_model_reports_roles(tmp_path):
    cfg = write(tmp_path, "")
    assert main(["eigen", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == EXIT["ok"]
    _, header, rows = read_csv(tmp_path / "levels.csv")
    roles = {r[header.index("role")]: r for r in rows if r[header.index("role")]}
    target = roles["target"]
    assert float(target[header.index("energy_mhz")]) == pytest.approx(-764.0, abs=1.0)
    assert float(target[header.index("bv_mhz")]) == pytest.approx(16.3, abs=0.2)
    assert target[header.index("level_from_top")] == "1"
    assert "intermediate" in roles


def test_propagate_trace(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["propagate", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == EXIT["ok"]
    meta, header, rows = read_csv(tmp_path / "trace.csv")
    assert tuple(header) == TRACE_COLUMNS
    data = np.array([[float(x) for x in r] for r in rows])
    assert np.all(np.diff(data[:, 0]) > 0)
    assert math.isnan(data[0, header.index("align_total")])
    assert float(meta["period_ns"]) == pytest.approx(30.7, rel=1e-3)
    for key in ("conventions", "undefined", "final_population", "max_norm_error", "tool"):
        assert key in meta


def sweep_text(extra=""):
    return SMALL + '\n[[sweep.axis]]\nname = "intensity"\nvalues = ["300 W/cm2", "900 W/cm2", "2.7 kW/cm2"]\n' + extra


def test_sweep_bytes_identical_across_workers(tmp_path):
    cfg = write(tmp_path, sweep_text())
    outs = []
    for workers in ("1", "2", "3"):
        out = tmp_path / f"w{workers}"
        assert main(["sweep", "--config", str(cfg), "--out", str(out), "--workers", workers, "-q"]) == EXIT["ok"]
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    meta, header, rows = read_csv(tmp_path / "w1" / "sweep.csv")
    assert header[0] == "intensity" and len(rows) == 3
    assert meta["points"] == "3" and meta["failed"] == "0"


def test_sweep_point_traces(tmp_path):
    cfg = write(tmp_path, sweep_text("\n[output]\npoint_traces = true\n"))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == EXIT["ok"]
    assert sorted(p.name for p in (tmp_path / "points").iterdir()) == [f"point_{i:05d}.csv" for i in range(3)]


def test_exit_codes(tmp_path):
    bad = write(tmp_path, '[pulse]\nsigma = 10\n', "bad.toml")
    assert main(["propagate", "--config", str(bad), "--out", str(tmp_path), "-q"]) == EXIT["config"]
    assert main(["eigen", "--config", str(tmp_path / "none.toml"), "-q"]) == EXIT["config"]
    assert main(["sweep", "--config", str(write(tmp_path, SMALL, "nosweep.toml")), "--out", str(tmp_path), "-q"]) == EXIT["config"]
    assert main(["sweep", "--config", str(write(tmp_path, sweep_text(), "s.toml")), "--workers", "0", "-q"]) == EXIT["config"]
    partial = SMALL + '\n[train]\nn_pulses = 2\n[[sweep.axis]]\nname = "delay"\nvalues = ["5 ns", "30 ns"]\n'
    out = tmp_path / "partial"
    assert main(["sweep", "--config", str(write(tmp_path, partial, "p.toml")), "--out", str(out), "-q"]) == EXIT["partial"]
    _, header, rows = read_csv(out / "sweep.csv")
    assert [r[header.index("error_code")] for r in rows] == ["2", "0"]
    narrow = '[potential]\nground = "harmonic"\nharmonic_center = "5 bohr"\n'
    assert main(["eigen", "--config", str(write(tmp_path, narrow, "h.toml")), "--out", str(tmp_path), "-q"]) == EXIT["config"]
    # an unconverged eigen grid is a numerical failure
    coarse = '[potential]\nground = "morse"\n[grid]\nr_max = "60 bohr"\nbeta = 2.0\n[eigen]\ntolerance = "1 Hz"\n'
    assert main(["eigen", "--config", str(write(tmp_path, coarse, "c.toml")), "--out", str(tmp_path), "-q"]) == EXIT["numerical"]


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "photoalign.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("photoalign ")
    res = subprocess.run([sys.executable, "-m", "photoalign.cli", "eigen"], capture_output=True, text=True)
    assert res.returncode == 2 and "--config" in res.stderr
