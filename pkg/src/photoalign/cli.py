"""Command-line front end: ``photoalign {eigen,propagate,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 sweep finished with failed points.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, units
from .config import ConfigError, RunConfig, load_config
from .model import build_radial_model
from .propagate import PropagationError
from .radial import (
    CalibrationError,
    ConvergenceError,
    mapped_grid,
    outer_turning_point,
    solve_channel,
    uniform_grid,
)
from .sweep import SweepPlan, run_point, run_sweep

__all__ = ["main", "cmd_eigen", "cmd_propagate", "cmd_sweep", "write_csv", "read_csv", "EXIT", "TRACE_COLUMNS", "EIGEN_COLUMNS"]

log = logging.getLogger("photoalign")

EXIT = {"ok": 0, "config": 2, "numerical": 3, "partial": 4}

TRACE_COLUMNS = ("time_ns", "pop_even", "pop_odd", "pop_total", "align_even", "align_odd", "align_total")
EIGEN_COLUMNS = ("channel", "J", "Omega", "level", "level_from_top", "energy_mhz", "bv_mhz", "outer_turning_point_bohr", "role")

_NUMERICAL = (PropagationError, ConvergenceError, CalibrationError, np.linalg.LinAlgError, FloatingPointError)


# ---------------------------------------------------------------------------
# CSV


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else f"{x:.12g}"
    return str(x)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (tuple, set)):
        return list(x)
    return str(x)


def write_csv(path, columns, rows, metadata: dict) -> Path:
    """Comma-separated table behind a '#'-prefixed metadata header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in metadata.items():
            text = value if isinstance(value, str) else json.dumps(value, sort_keys=True, default=_json_default)
            fh.write(f"# {key}: {text}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def read_csv(path) -> tuple:
    """(metadata dict of raw strings, header, rows as lists of strings)."""
    meta, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
        else:
            lines.append(line)
    table = list(csv.reader(lines))
    return meta, table[0], table[1:]


def _metadata(cfg: RunConfig, command: str, **extra) -> dict:
    return {"tool": f"photoalign {__version__}", "command": command, "config_hash": cfg.hash, **extra}


def _echo(cfg: RunConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config.toml"
    path.write_text(f"# photoalign {__version__}, config hash {cfg.hash}\n" + cfg.to_toml())
    return path


# ---------------------------------------------------------------------------
# eigen


def _turning_point(curve, energy_mhz, mass):
    try:
        return outer_turning_point(curve, energy_mhz, mass_amu=mass)
    except ValueError:
        return float("nan")


def _test_curve_rows(cfg: RunConfig) -> list:
    """Lowest levels of a harmonic or Morse ground curve."""
    v = cfg.values["potential"]
    curve, mass, n = cfg.ground_curve(), v["mass"], cfg["eigen.n_levels"]
    if curve.kind == "harmonic":
        m_omega = units.amu_to_me(mass) * units.mhz_to_hartree(v["harmonic_spacing"])
        # top-level turning point plus eight oscillator lengths of decaying tail
        half = (math.sqrt(2 * n + 1) + 8.0) / math.sqrt(m_omega)
        lo = v["harmonic_center"] - half
        if lo <= 0:
            raise ConfigError(
                f"harmonic well of {n} levels needs potential.harmonic_center > {half:.4g} bohr "
                "so that the radial wall at R = 0 does not cut it"
            )
        grid = uniform_grid(lo, v["harmonic_center"] + half, max(400, 8 * n), mass)
        sol = solve_channel(curve, 0, 0, grid, manifold="harmonic", e_cap_mhz=np.inf, check_convergence=False)
    else:
        # wall far up the repulsive side so the hard edge does not shift deep levels
        grid = mapped_grid(curve, mass, r_max=cfg["grid.r_max"], e_max_mhz=0.0, beta=cfg["grid.beta"], wall_factor=20.0)
        sol = solve_channel(curve, 0, 0, grid, manifold="morse", tol_mhz=cfg["eigen.tolerance"], check_indices=range(n))
    rows = []
    for k in range(min(n, len(sol.energies_mhz))):
        e = float(sol.energies_mhz[k])
        if curve.kind == "harmonic":
            rt = v["harmonic_center"] + math.sqrt(2e-3 * e / curve.shape)
        else:
            rt = _turning_point(curve, e, mass)
        rows.append([curve.kind, 0, 0, k, "", e, float(sol.bv_mhz[k]), rt, ""])
    return rows


def _model_rows(cfg: RunConfig) -> list:
    spec = cfg.model_spec()
    rm = build_radial_model(spec)
    rows = []
    for channel, sol, curve, chosen in (
        ("ground", rm.target, spec.ground, rm.target_level),
        ("excited", rm.intermediate, spec.excited, rm.intermediate_level),
    ):
        nb = sol.n_bound
        for k in range(nb):
            e = float(sol.energies_mhz[k])
            role = ""
            if k == chosen:
                role = "target" if channel == "ground" else "intermediate"
            rt = _turning_point(curve, e, spec.mass_amu)
            rows.append([channel, 0, 0, k, nb - 1 - k, e, float(sol.bv_mhz[k]), rt, role])
    return rows


def cmd_eigen(cfg: RunConfig, out: Path) -> Path:
    """Bound-level table (energy, B_v, outer turning point) per channel."""
    kind = cfg["potential.ground"]
    rows = _test_curve_rows(cfg) if kind in ("harmonic", "morse") else _model_rows(cfg)
    _echo(cfg, out)
    meta = _metadata(cfg, "eigen", units="energy MHz relative to the channel asymptote; B_v MHz; R bohr")
    return write_csv(out / "levels.csv", EIGEN_COLUMNS, rows, meta)


# ---------------------------------------------------------------------------
# propagate


def cmd_propagate(cfg: RunConfig, out: Path) -> Path:
    """Ensemble time traces of target population and alignment."""
    res = run_point(cfg)
    cols = res.columns()
    rows = zip(*(cols[c] for c in TRACE_COLUMNS))
    _echo(cfg, out)
    meta = _metadata(
        cfg,
        "propagate",
        conventions=res.metadata.get("alignment", ""),
        undefined="alignment is nan where the target population is below "
        f"{cfg['ensemble.alignment_floor']:g}",
        period_ns=res.period_ns,
        analysis_window_ns=list(res.analysis_window),
        final_population=res.final_population,
        static_alignment=res.static_alignment,
        dynamic_amplitude=res.dynamic_amplitude,
        max_norm_error=res.metadata.get("max_norm_error"),
    )
    return write_csv(out / "trace.csv", TRACE_COLUMNS, rows, meta)


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(cfg: RunConfig, out: Path, workers: int | None = None) -> tuple:
    """Result table in plan order; returns (path, number of failed points)."""
    plan = SweepPlan.from_config(cfg, workers)
    keep = cfg["output.point_traces"]
    result = run_sweep(plan, keep_traces=keep)
    _echo(cfg, out)
    cols = result.columns
    rows = [[r[c] for c in cols] for r in result.rows]
    meta = _metadata(
        cfg,
        "sweep",
        points=plan.n_points,
        failed=result.n_failed,
        method="composed single-pulse propagator" if plan.composed else "direct",
        alignment="conditional <cos^2 theta> of the target manifold; static = population-weighted average, "
        "dynamic = half peak-to-peak, both over whole rotational periods after the last pulse",
    )
    path = write_csv(out / "sweep.csv", cols, rows, meta)
    if keep:
        for i, (row, res) in enumerate(zip(result.rows, result.traces)):
            if res is None:
                continue
            c = res.columns()
            write_csv(
                out / "points" / f"point_{i:05d}.csv",
                TRACE_COLUMNS,
                zip(*(c[k] for k in TRACE_COLUMNS)),
                {"tool": f"photoalign {__version__}", "config_hash": row["config_hash"]},
            )
    return path, result.n_failed


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photoalign", description="Pulsed photoassociation with rotational alignment.")
    p.add_argument("--version", action="version", version=f"photoalign {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("eigen", "bound-level report per channel"),
        ("propagate", "time traces for one pulse or train"),
        ("sweep", "parameter scan table"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, type=Path, help="TOML configuration file")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--workers", type=int, default=None, help="process count for sweeps")
        s.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = load_config(args.config)
        if args.command == "eigen":
            path = cmd_eigen(cfg, args.out)
        elif args.command == "propagate":
            path = cmd_propagate(cfg, args.out)
        else:
            path, failed = cmd_sweep(cfg, args.out, args.workers)
            if failed:
                log.error("%d sweep point(s) failed; see the error_code and message columns of %s", failed, path)
                return EXIT["partial"]
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT["config"]
    except _NUMERICAL as exc:
        log.error("numerical failure: %s", exc)
        return EXIT["numerical"]
    except ValueError as exc:
        log.error("invalid setup: %s", exc)
        return EXIT["config"]
    log.info("wrote %s", path)
    return EXIT["ok"]


if __name__ == "__main__":
    sys.exit(main())
