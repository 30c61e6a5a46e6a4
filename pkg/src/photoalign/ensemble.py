"""Thermal ensembles, nuclear-spin weighting and alignment observables.

Each initial state is one scattering box level |n J M> of one parity family.
Members are propagated independently and averaged incoherently.  Alignment
is reported for the target manifold, conditional on being bound:
``<cos^2>(t) = sum_i w_i psi_i^+ cos^2 psi_i / sum_i w_i P_i(t)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import units
from .basis import HamiltonianModel, assemble_hamiltonian, build_basis, fc_table
from .model import ModelSpec, build_radial_model
from .propagate import PropagationControls, StateVector, Trajectory, propagate_batch, sample_times
from .pulse import DEFAULT_MU0_DEBYE, MIN_GAP_SIGMAS, PulseSpec

__all__ = [
    "EnsembleSpec",
    "EnsembleResult",
    "WeightedState",
    "parity_fractions",
    "thermal_initial_states",
    "alignment_trace",
    "static_alignment",
    "dynamic_alignment_amplitude",
    "average_ensemble",
    "Member",
    "run_ensemble",
    "family_hamiltonian",
    "ALIGNMENT_FLOOR",
    "analysis_times",
    "TruncationWarning",
]

#: Below this target population the conditional alignment is undefined (NaN).
ALIGNMENT_FLOOR = 1e-10


class TruncationWarning(UserWarning):
    pass


def parity_fractions(nuclear_spin: float = 1.5) -> dict:
    """Statistical weights of the odd-J and even-J families, ratio (I+1)/I."""
    if nuclear_spin <= 0:
        raise ValueError("nuclear spin must be positive")
    odd = (nuclear_spin + 1) / (2 * nuclear_spin + 1)
    return {"odd": odd, "even": 1.0 - odd}


@dataclass(frozen=True)
class EnsembleSpec:
    temperature_uk: float = 100.0
    n_box: int | None = None  # None: every box state of the basis
    nuclear_spin: float = 1.5
    parities: tuple = ("even", "odd")
    weight_cutoff: float = 1e-6  # drop members below this fraction of the largest weight

    def __post_init__(self):
        if not self.temperature_uk >= 0:
            raise ValueError("temperature must be non-negative")
        bad = set(self.parities) - {"even", "odd"}
        if bad or not self.parities:
            raise ValueError(f"parities must be a non-empty subset of even/odd, got {self.parities}")
        if not 0 <= self.weight_cutoff < 1:
            raise ValueError("weight_cutoff must lie in [0, 1)")

    @property
    def kt_mhz(self) -> float:
        return self.temperature_uk * units.KB_MHZ_PER_UK

    @property
    def parity_weights(self) -> dict:
        return parity_fractions(self.nuclear_spin)


@dataclass(frozen=True)
class WeightedState:
    weight: float
    index: int  # position in the family's level list
    level: object

    def state(self, n: int, t_ns: float = 0.0) -> StateVector:
        return StateVector.basis_state(n, self.index, t_ns)


def thermal_initial_states(levels, spec: EnsembleSpec = EnsembleSpec()) -> list:
    """Boltzmann-weighted scattering box levels of one parity family.

    Every M sublevel of a (n, J) level carries the same weight (isotropic
    ensemble) and the weights sum to 1.  At T = 0 only the lowest box state
    of each J survives, and among those the lowest in energy.  A
    :class:`TruncationWarning` reports thermal weight lost to the box cap
    (states past ``n_box``) when it exceeds 1 %.
    """
    scat = [(i, lv) for i, lv in enumerate(levels) if lv.manifold == "scattering"]
    if not scat:
        raise ValueError("basis has no scattering levels")
    by_channel = {}
    for i, lv in scat:
        by_channel.setdefault((lv.angular.J, lv.angular.Omega), set()).add(lv.index)
    rank = {ch: {n: k for k, n in enumerate(sorted(ns))} for ch, ns in by_channel.items()}
    energies = np.array([lv.energy_mhz for _, lv in scat])
    n_rank = np.array([rank[(lv.angular.J, lv.angular.Omega)][lv.index] for _, lv in scat])
    keep = np.ones(len(scat), dtype=bool) if spec.n_box is None else n_rank < spec.n_box
    kt = spec.kt_mhz
    if kt == 0:
        w = (energies == energies[keep].min()).astype(float) * keep
    else:
        w = np.exp(-(energies - energies.min()) / kt)
        lost = _box_tail_weight(scat, n_rank, energies, kt, spec.n_box)
        total = w.sum() + lost
        dropped = w[~keep].sum() + lost
        if dropped > 0.01 * total:
            warnings.warn(
                f"box cap truncates {dropped / total:.2%} of the thermal weight at {spec.temperature_uk} uK",
                TruncationWarning,
                stacklevel=2,
            )
        w = w * keep
    w = np.where(w >= spec.weight_cutoff * w.max(), w, 0.0)
    w /= w.sum()
    return [WeightedState(float(wi), i, lv) for (i, lv), wi in zip(scat, w) if wi > 0]


def _box_tail_weight(scat, n_rank, energies, kt, n_box):
    # Boltzmann weight of box states beyond the basis, from E_n ~ a (n+1)^2 per channel
    chans = {}
    for (i, lv), k, e in zip(scat, n_rank, energies):
        chans.setdefault((lv.angular.J, lv.angular.Omega, lv.angular.M), []).append((k, e))
    e0 = energies.min()
    tail = 0.0
    for vals in chans.values():
        k, e = map(np.array, zip(*sorted(vals)))
        a = e[-1] / (k[-1] + 1) ** 2 if e[-1] > 0 else 0.0
        if a <= 0:
            continue
        more = np.arange(k[-1] + 1, k[-1] + 1 + 100000)
        tail += np.exp(-(a * (more + 1) ** 2 - e0) / kt).sum()
    return tail


def alignment_trace(traj: Trajectory, manifold: str = "target", floor: float = ALIGNMENT_FLOOR, column=None):
    """Conditional <cos^2 theta>(t) of one manifold; NaN where its population < floor."""
    pop = traj.observables[f"pop_{manifold}"]
    num = traj.observables[f"cos2_{manifold}"]
    if column is not None:
        pop, num = pop[:, column], num[:, column]
    return _ratio(num, pop, floor)


def _ratio(num, pop, floor):
    out = np.full(np.shape(pop), np.nan)
    ok = pop >= floor
    out[ok] = num[ok] / pop[ok]
    return np.clip(out, 0.0, 1.0)


def analysis_times(start: float, period: float, n_periods: float, stride_ns: float) -> np.ndarray:
    """Samples from ``start`` with a whole number of samples per period.

    Period boundaries then fall on samples, so integer-period averages are
    free of edge effects.
    """
    per = max(1, int(np.ceil(period / stride_ns - 1e-9)))
    count = int(np.floor(n_periods * per + 1e-9))
    grid = start + period * np.arange(count + 1) / per
    end = start + n_periods * period
    if grid[-1] < end - 1e-9:
        grid = np.append(grid, end)
    return grid


def _period_window(times, window, period):
    start, end = window
    if period <= 0:
        raise ValueError("period must be positive")
    if end - start < period * (1 - 1e-9):
        raise ValueError(f"window of {end - start:.4g} ns is shorter than one period ({period:.4g} ns)")
    n = int(np.floor((end - start) / period + 1e-9))
    stop = start + n * period
    sel = (times >= start - 1e-9) & (times <= stop + 1e-9)
    if sel.sum() < 2:
        raise ValueError("window contains fewer than two samples")
    return sel


def static_alignment(times, trace, window, period, population=None) -> float:
    """Population-weighted time average over an integer number of periods in ``window``."""
    times = np.asarray(times, float)
    trace = np.asarray(trace, float)
    sel = _period_window(times, window, period)
    t, y = times[sel], trace[sel]
    w = np.ones_like(y) if population is None else np.asarray(population, float)[sel]
    ok = np.isfinite(y)
    if not ok.any():
        return float("nan")
    t, y, w = t[ok], y[ok], w[ok]
    # trapezoid over an integer number of periods, last point excluded (periodic)
    num = np.trapezoid(w * y, t)
    den = np.trapezoid(w, t)
    return float(num / den) if den > 0 else float("nan")


def dynamic_alignment_amplitude(times, trace, window, period) -> float:
    """Half peak-to-peak of the trace over the same window as static_alignment."""
    times = np.asarray(times, float)
    trace = np.asarray(trace, float)
    sel = _period_window(times, window, period)
    y = trace[sel]
    y = y[np.isfinite(y)]
    if not len(y):
        return float("nan")
    return float(0.5 * (y.max() - y.min()))


@dataclass(frozen=True, eq=False)
class Member:
    """Observables of one (or a batch of identical-grid) ensemble member(s)."""

    weight: float
    parity: str
    pop: np.ndarray  # target population P(t)
    cos2: np.ndarray  # population-weighted cos^2, psi^+ cos^2 psi


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    times: np.ndarray
    population: dict  # even / odd / total
    alignment: dict  # even / odd / total (conditional, NaN where undefined)
    final_population: float
    static_alignment: float
    dynamic_amplitude: float
    period_ns: float
    analysis_window: tuple
    metadata: dict = field(default_factory=dict)

    def columns(self) -> dict:
        return {
            "time_ns": self.times,
            "pop_even": self.population["even"],
            "pop_odd": self.population["odd"],
            "pop_total": self.population["total"],
            "align_even": self.alignment["even"],
            "align_odd": self.alignment["odd"],
            "align_total": self.alignment["total"],
        }


def average_ensemble(
    times,
    members,
    parity_weights: dict | None = None,
    period_ns: float | None = None,
    analysis_window: tuple | None = None,
    floor: float = ALIGNMENT_FLOOR,
    metadata: dict | None = None,
) -> EnsembleResult:
    """Incoherent average of ``members`` (weights sum to 1 within each parity).

    Alignments combine as sum w P <cos^2> / sum w P.  Sums run over members in
    sorted (parity, weight, data) order so any permutation of the input gives
    a bit-identical result.  Families absent from ``members`` contribute a
    zero population; the total is ``sum_p f_p * family_p``.
    """
    times = np.asarray(times, float)
    parity_weights = parity_weights or parity_fractions()
    for m in members:
        if np.shape(m.pop) != times.shape or np.shape(m.cos2) != times.shape:
            raise ValueError("all members must share the ensemble time grid")
    order = sorted(range(len(members)), key=lambda i: (members[i].parity, members[i].weight, members[i].pop.tobytes(), members[i].cos2.tobytes()))
    pop, num = {}, {}
    for parity in ("even", "odd"):
        pop[parity] = np.zeros_like(times)
        num[parity] = np.zeros_like(times)
    for i in order:
        m = members[i]
        pop[m.parity] = pop[m.parity] + m.weight * m.pop
        num[m.parity] = num[m.parity] + m.weight * m.cos2
    present = sorted({m.parity for m in members})
    fsum = sum(parity_weights[p] for p in present) or 1.0
    frac = {p: (parity_weights[p] / fsum if p in present else 0.0) for p in ("even", "odd")}
    pop["total"] = frac["odd"] * pop["odd"] + frac["even"] * pop["even"]
    num["total"] = frac["odd"] * num["odd"] + frac["even"] * num["even"]
    align = {k: _ratio(num[k], pop[k], floor) for k in ("even", "odd", "total")}
    static = dynamic = float("nan")
    if period_ns is not None and analysis_window is not None:
        static = static_alignment(times, align["total"], analysis_window, period_ns, pop["total"])
        dynamic = dynamic_alignment_amplitude(times, align["total"], analysis_window, period_ns)
    return EnsembleResult(
        times=times,
        population=pop,
        alignment=align,
        final_population=float(pop["total"][-1]),
        static_alignment=static,
        dynamic_amplitude=dynamic,
        period_ns=period_ns if period_ns is not None else float("nan"),
        analysis_window=analysis_window,
        metadata=dict(metadata or {}),
    )


@lru_cache(maxsize=16)
def _family(model_spec: ModelSpec, parity: str):
    rm = build_radial_model(model_spec)
    levels = build_basis(rm, model_spec.j_max, parity)
    return rm, levels, fc_table(rm, levels)


def family_hamiltonian(model_spec: ModelSpec, parity: str, pulses, mu0_debye: float = DEFAULT_MU0_DEBYE) -> HamiltonianModel:
    _, levels, fcs = _family(model_spec, parity)
    return assemble_hamiltonian(levels, tuple(pulses), fcs, mu0_debye)


def run_ensemble(
    pulses,
    *,
    model_spec: ModelSpec = ModelSpec(),
    ensemble: EnsembleSpec = EnsembleSpec(),
    mu0_debye: float = DEFAULT_MU0_DEBYE,
    controls: PropagationControls = PropagationControls(),
    tail_periods: float = 2.0,
    stride_ns: float | None = None,
    manifold: str = "target",
    record_pulse: bool = True,
    floor: float = ALIGNMENT_FLOOR,
) -> EnsembleResult:
    """Propagate the thermal ensemble through ``pulses`` and average.

    Time runs from the first pulse center minus 5 sigma to the last center
    plus 5 sigma plus ``tail_periods`` rotational periods 1/(2B) of the
    target level.  Only M >= 0 blocks are propagated: with Omega = 0 and
    Z polarization the M and -M blocks are mirror images, so the M > 0
    members carry the weight of both.  With ``record_pulse=False`` the traces
    hold only the start time and the post-pulse window, which is all that
    scans need.
    """
    if isinstance(pulses, PulseSpec):
        pulses = (pulses,)
    pulses = tuple(sorted(pulses, key=lambda p: p.center_ns))
    if not pulses:
        raise ValueError("at least one pulse is required")
    rm = build_radial_model(model_spec)
    bv = rm.target_bv_mhz if manifold == "target" else rm.intermediate_bv_mhz
    period = 1e3 / (2.0 * bv)
    first, last = pulses[0], pulses[-1]
    t_start = first.center_ns - MIN_GAP_SIGMAS * first.sigma_ns
    t_pulse_end = max(p.center_ns + MIN_GAP_SIGMAS * p.sigma_ns for p in pulses)
    t_end = t_pulse_end + tail_periods * period
    jobs, labels = [], []
    stride = stride_ns or controls.stride_ns
    for parity in ensemble.parities:
        model = family_hamiltonian(model_spec, parity, pulses, mu0_debye)
        if stride is None:
            stride = 1e3 / (8.0 * model.fastest_frequency_mhz())
        initial = thermal_initial_states(model.levels, ensemble)
        for M in sorted({ws.level.angular.M for ws in initial if ws.level.angular.M >= 0}):
            block = model.block(M)
            pos = {lv: k for k, lv in enumerate(block.levels)}
            chosen = [ws for ws in initial if ws.level.angular.M == M]
            jobs.append((StateVector.basis_state(block.n, [pos[ws.level] for ws in chosen], t_start), block))
            labels.append((parity, 1.0 if M == 0 else 2.0, chosen))
    tail = analysis_times(t_pulse_end, period, tail_periods, stride)
    if record_pulse:
        times = np.concatenate((sample_times(t_start, t_pulse_end, stride)[:-1], tail))
    else:
        # only the start and the field-free analysis window
        times = np.concatenate(([t_start], tail))
    trajs = propagate_batch(
        jobs,
        t_start,
        t_end,
        PropagationControls(rtol=controls.rtol, atol=controls.atol, norm_drift_per_ns=controls.norm_drift_per_ns),
        times=times,
    )
    members = []
    for (parity, factor, chosen), traj in zip(labels, trajs):
        p = traj.observables[f"pop_{manifold}"]
        c = traj.observables[f"cos2_{manifold}"]
        for k, ws in enumerate(chosen):
            members.append(Member(factor * ws.weight, parity, p[:, k], c[:, k]))
    meta = {
        "alignment": f"conditional <cos^2 theta> of the {manifold} manifold, population-weighted incoherent sum",
        "temperature_uK": ensemble.temperature_uk,
        "parity_weights": ensemble.parity_weights,
        "members": len(members),
        "max_norm_error": max(traj.max_norm_error for traj in trajs),
    }
    return average_ensemble(
        times,
        members,
        ensemble.parity_weights,
        period_ns=period,
        analysis_window=(t_pulse_end, t_end),
        floor=floor,
        metadata=meta,
    )
