"""Deterministic parameter scans over a base run configuration.

Grid points are independent jobs with no warm start, so the table depends
only on the plan.  Points run in a process pool when ``workers > 1``; rows
are assembled in plan order.  Delay and pulse-count scans may use the
composed single-pulse propagator (``propagation.method = "composed"``),
which is built once per group of points sharing everything else.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import SWEEP_OUTPUTS, Axis, ConfigError, RunConfig
from .ensemble import EnsembleResult, run_ensemble
from .propagate import PropagationError
from .radial import CalibrationError, ConvergenceError
from .train import TrainPropagator

__all__ = [
    "SweepPlan",
    "SweepResult",
    "run_sweep",
    "run_point",
    "nslit_reference",
    "ERROR_CONFIG",
    "ERROR_NUMERICAL",
]

log = logging.getLogger(__name__)

ERROR_CONFIG = 2
ERROR_NUMERICAL = 3

_COMPOSABLE = {"train.delay", "train.n_pulses"}


@dataclass(frozen=True)
class SweepPlan:
    """Axes (outer to inner), base configuration, requested outputs, workers."""

    base: RunConfig
    axes: tuple
    outputs: tuple = SWEEP_OUTPUTS
    workers: int = 1

    def __post_init__(self):
        if not self.axes:
            raise ConfigError("a sweep needs at least one axis")
        for ax in self.axes:
            if not isinstance(ax, Axis):
                raise ConfigError(f"axis {ax!r} is not an Axis")
        if not self.outputs or not set(self.outputs) <= set(SWEEP_OUTPUTS):
            raise ConfigError(f"outputs must be a non-empty subset of {list(SWEEP_OUTPUTS)}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @classmethod
    def from_config(cls, cfg: RunConfig, workers: int | None = None) -> "SweepPlan":
        if not cfg.axes:
            raise ConfigError("configuration has no [sweep] section")
        return cls(cfg, cfg.axes, cfg.outputs, workers or cfg.workers)

    @property
    def n_points(self) -> int:
        return math.prod(len(ax.values) for ax in self.axes)

    def points(self) -> list:
        """Assignments {"section.key": value} in plan order (last axis fastest)."""
        names = [ax.name for ax in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(ax.values for ax in self.axes))]

    @property
    def composed(self) -> bool:
        return self.base["propagation.method"] == "composed" and {ax.name for ax in self.axes} <= _COMPOSABLE


@dataclass(frozen=True, eq=False)
class SweepResult:
    plan: SweepPlan
    rows: list  # dicts in plan order
    traces: list | None = None  # EnsembleResult per row (None for failed rows)

    @property
    def columns(self) -> list:
        return [ax.short for ax in self.plan.axes] + list(self.plan.outputs) + ["max_norm_error", "error_code", "config_hash", "message"]

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r["error_code"] != 0)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


def nslit_reference(n: int, delay_ns, binding_mhz: float):
    """|sum_k exp(i 2 pi binding delay k)|^2 / n^2 for k = 0..n-1."""
    if n < 2:
        raise ValueError("n-slit reference needs n >= 2")
    phase = 2e-3 * np.pi * binding_mhz * np.asarray(delay_ns, dtype=float)
    k = np.arange(n)
    amp = np.exp(1j * np.multiply.outer(phase, k)).sum(axis=-1)
    return np.abs(amp) ** 2 / n**2


def _scalars(res: EnsembleResult) -> dict:
    return {
        "final_population": res.final_population,
        "static_alignment": res.static_alignment,
        "dynamic_amplitude": res.dynamic_amplitude,
        "max_norm_error": float(res.metadata.get("max_norm_error", float("nan"))),
    }


def run_point(cfg: RunConfig, record_pulse: bool | None = None) -> EnsembleResult:
    """One direct ensemble run of a resolved configuration."""
    prop = cfg.values["propagation"]
    return run_ensemble(
        cfg.pulses(),
        model_spec=cfg.model_spec(),
        ensemble=cfg.ensemble_spec(),
        mu0_debye=cfg.mu0_debye,
        controls=cfg.controls(),
        tail_periods=prop["tail_periods"],
        stride_ns=prop["stride"],
        record_pulse=prop["record_pulse"] if record_pulse is None else record_pulse,
        floor=cfg["ensemble.alignment_floor"],
    )


def _error_code(exc: Exception) -> int:
    if isinstance(exc, (PropagationError, ConvergenceError, CalibrationError, FloatingPointError, np.linalg.LinAlgError)):
        return ERROR_NUMERICAL
    return ERROR_CONFIG


def _row(assignment, cfg, res=None, exc=None) -> dict:
    row = {name.split(".", 1)[1]: value for name, value in assignment.items()}
    row["config_hash"] = cfg.hash
    if exc is None:
        row.update(_scalars(res))
        row["error_code"] = 0
        row["message"] = ""
    else:
        row.update({k: float("nan") for k in (*SWEEP_OUTPUTS, "max_norm_error")})
        row["error_code"] = _error_code(exc)
        row["message"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _direct_job(args):
    assignment, base, keep = args
    cfg = base.point(assignment)
    try:
        res = run_point(cfg, record_pulse=None if keep else False)
    except Exception as exc:  # recorded in-row, the sweep goes on
        return _row(assignment, cfg, exc=exc), None
    return _row(assignment, cfg, res), (res if keep else None)


def _composed_job(args):
    """All points of one group share a single-pulse propagator."""
    group, base, keep = args
    out = []
    try:
        first = base.point(group[0])
        tp = TrainPropagator(
            first.pulse(),
            model_spec=first.model_spec(),
            ensemble=first.ensemble_spec(),
            mu0_debye=first.mu0_debye,
            controls=first.controls(),
        )
    except Exception as exc:
        return [_row(a, base.point(a), exc=exc) for a in group], [None] * len(group)
    prop = base.values["propagation"]
    traces = []
    for assignment in group:
        cfg = base.point(assignment)
        try:
            res = tp.result(
                cfg["train.n_pulses"],
                cfg["train.delay"],
                tail_periods=prop["tail_periods"],
                stride_ns=prop["stride"],
                floor=cfg["ensemble.alignment_floor"],
            )
        except Exception as exc:
            out.append(_row(assignment, cfg, exc=exc))
            traces.append(None)
            continue
        out.append(_row(assignment, cfg, res))
        traces.append(res if keep else None)
    return out, traces


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs, chunksize=1))


def run_sweep(plan: SweepPlan, keep_traces: bool = False) -> SweepResult:
    """Evaluate every grid point; failures become rows with a nonzero error code."""
    points = plan.points()
    log.info("sweep: %d points over %s", len(points), ", ".join(ax.short for ax in plan.axes))
    if plan.composed:
        # one group per distinct pulse shape: only delay and n_pulses vary here
        groups = [points]
        results = _map(_composed_job, [(g, plan.base, keep_traces) for g in groups], plan.workers)
        rows = [r for rs, _ in results for r in rs]
        traces = [t for _, ts in results for t in ts]
    else:
        results = _map(_direct_job, [(a, plan.base, keep_traces) for a in points], plan.workers)
        rows = [r for r, _ in results]
        traces = [t for _, t in results]
    return SweepResult(plan, rows, traces if keep_traces else None)
