"""Time-dependent Schroedinger equation for one or several initial columns.

The equation is integrated in the interaction picture of the static
diagonal, ``c = exp(+i 2 pi E t) psi``, so field-free stretches leave ``c``
constant and are propagated exactly.  Inside the field window the explicit
8th-order Dormand-Prince scheme of scipy runs with a relative tolerance of
1e-10 by default.  Several initial states of one M block are carried as the
columns of a single matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import DOP853

from .basis import HamiltonianModel
from .units import TWO_PI_MHZ_NS

__all__ = [
    "StateVector",
    "Trajectory",
    "PropagationControls",
    "PropagationError",
    "NormDriftError",
    "propagate",
    "propagate_batch",
    "free_evolve",
    "field_window",
    "sample_times",
]

#: Pulses are treated as zero beyond this many widths from their center
#: (envelope below exp(-42) ~ 6e-19 of the peak).
FIELD_CUTOFF_SIGMAS = 6.5


class PropagationError(RuntimeError):
    pass


class NormDriftError(PropagationError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes per ChannelLevel at time ``t_ns`` (Schroedinger picture).

    ``amplitudes`` may be 2-D (levels x columns) to carry a batch of
    independent states.
    """

    amplitudes: np.ndarray
    t_ns: float = 0.0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self):
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=0))

    @classmethod
    def basis_state(cls, n: int, index, t_ns: float = 0.0) -> "StateVector":
        """Unit vector(s); a sequence of indices gives one column each."""
        idx = np.atleast_1d(index)
        a = np.zeros((n, len(idx)), dtype=complex)
        a[idx, np.arange(len(idx))] = 1.0
        return cls(a[:, 0] if np.ndim(index) == 0 else a, t_ns)


@dataclass(frozen=True)
class PropagationControls:
    rtol: float = 1e-10
    atol: float = 1e-12
    stride_ns: float | None = None  # default: 8 samples per fastest period
    store_states: bool = False
    norm_drift_per_ns: float = 1e-8
    allow_backward: bool = False


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled propagation result.

    ``observables`` maps names to arrays of shape (samples,) or
    (samples, columns):

    * ``pop_<manifold>``  population of each manifold;
    * ``cos2_<manifold>`` population-weighted <cos^2 theta> of the manifold's
      component, i.e. psi_m^+ cos^2 psi_m (divide by the population for the
      conditional alignment);
    * ``norm``.
    """

    times: np.ndarray
    observables: dict
    final: StateVector
    states: np.ndarray | None = None
    max_norm_error: float = 0.0
    n_steps: int = 0
    extra: dict = field(default_factory=dict)


def field_window(model: HamiltonianModel) -> tuple | None:
    """(start, end) outside of which every pulse envelope is negligible."""
    active = [p for p in model.pulses if p.intensity_wcm2 > 0]
    if not active or not np.any(model.coupling):
        return None
    start = min(p.center_ns - FIELD_CUTOFF_SIGMAS * p.sigma_ns for p in active)
    end = max(p.center_ns + FIELD_CUTOFF_SIGMAS * p.sigma_ns for p in active)
    return start, end


def sample_times(t0: float, t1: float, stride_ns: float) -> np.ndarray:
    """Evenly spaced samples including both ends, spacing <= stride."""
    if stride_ns <= 0:
        raise ValueError("stride must be positive")
    n = max(1, int(np.ceil((t1 - t0) / stride_ns - 1e-9)))
    return t0 + (t1 - t0) * np.arange(n + 1) / n


def default_stride(model: HamiltonianModel) -> float:
    f = model.fastest_frequency_mhz()
    return 1e3 / (8.0 * f) if f > 0 else 1.0


class _Observer:
    """Row indices and cos^2 matrices of the observed manifolds."""

    def __init__(self, model: HamiltonianModel):
        self.rows = {m: model.indices(m) for m in ("scattering", "intermediate", "target")}
        self.cos2 = {m: model.cos2_matrix(m) for m in ("intermediate", "target")}


def _phases(model, t):
    return np.exp(1j * TWO_PI_MHZ_NS * model.energies * t)


def _to_schroedinger(model, c, t):
    ph = np.exp(-1j * TWO_PI_MHZ_NS * np.multiply.outer(np.atleast_1d(t), model.energies))
    if c.ndim == 3:
        return ph[:, :, None] * c
    return ph * c


def propagate(
    initial: StateVector,
    model: HamiltonianModel,
    t0: float,
    t1: float,
    controls: PropagationControls = PropagationControls(),
) -> Trajectory:
    """Propagate ``initial`` (given at t0) to t1 under ``model``.

    Raises
    ------
    ValueError
        Unnormalized initial state, t1 <= t0 (unless ``allow_backward``),
        or a state of the wrong size.
    PropagationError
        When the integrator fails, e.g. step-size underflow; the message
        carries the time reached.
    NormDriftError
        When the norm drifts by more than ``norm_drift_per_ns`` times the
        elapsed time.
    """
    return propagate_batch([(initial, model)], t0, t1, controls)[0]


def propagate_batch(
    items, t0: float, t1: float, controls: PropagationControls = PropagationControls(), times=None
) -> list:
    """Propagate several (StateVector, HamiltonianModel) pairs in one integration.

    All models must share the pulse sequence and dipole; typically they are
    the M blocks of one ensemble.  The blocks are padded to a common size and
    advanced together, which saves the per-step overhead of separate runs.
    Returns one Trajectory per item, on a common time grid: ``times`` when
    given (inside [t0, t1], ordered in the direction of propagation), else
    evenly spaced samples at the control stride.
    """
    items = list(items)
    if not items:
        return []
    if not (t1 > t0 or (controls.allow_backward and t1 != t0)):
        raise ValueError(f"need t1 > t0, got t0={t0}, t1={t1}")
    ref = items[0][1]
    for state, model in items:
        if model.pulses != ref.pulses or model.mu0_debye != ref.mu0_debye:
            raise ValueError("batched models must share pulses and dipole")
        if state.amplitudes.shape[0] != model.n:
            raise ValueError(f"state has {state.amplitudes.shape[0]} amplitudes, model has {model.n} levels")
        nrm = state.norm
        if np.any(np.abs(nrm - 1.0) > 1e-10):
            raise ValueError(f"initial state is not normalized (norm {np.ravel(nrm)[0]:.12g})")
    if times is None:
        stride = controls.stride_ns or min(default_stride(m) for _, m in items)
        times = sample_times(min(t0, t1), max(t0, t1), stride)
        if t1 < t0:
            times = times[::-1]
    else:
        times = np.asarray(times, dtype=float)
        if len(times) == 0 or np.any(np.diff(times) * np.sign(t1 - t0) <= 0):
            raise ValueError("sample times must be non-empty and strictly ordered along the propagation")
        if min(times[0], times[-1]) < min(t0, t1) - 1e-9 or max(times[0], times[-1]) > max(t0, t1) + 1e-9:
            raise ValueError("sample times must lie inside the propagation interval")

    packed = _Packed(items, t0)
    window = field_window(ref)
    lo, hi = min(t0, t1), max(t0, t1)
    n_steps = 0
    c0 = packed.c0
    chunks = []
    keep_states = controls.store_states
    if window is None or window[1] <= lo or window[0] >= hi:
        chunks.append(packed.observe(times, np.broadcast_to(c0, (len(times),) + c0.shape), keep_states))
        c_end = c0
    else:
        a, b = max(window[0], lo), min(window[1], hi)
        d = 1.0
        if t1 < t0:
            a, b, d = b, a, -1.0
        # samples at or before a keep c0, at or after b get the final value
        before = (times - a) * d <= 0
        after = (times - b) * d >= 0
        if before.any():
            chunks.append(packed.observe(times[before], np.broadcast_to(c0, (int(before.sum()),) + c0.shape), keep_states))
        pending = times[~before & ~after]
        solver = DOP853(packed.rhs(ref), a, c0.reshape(-1), b, rtol=controls.rtol, atol=controls.atol)
        while solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                raise PropagationError(f"integration failed at t = {solver.t:.6g} ns: {msg}")
            if len(pending):
                n_in = int(np.sum((pending - solver.t) * d <= 0))
                if n_in:
                    dense = solver.dense_output()
                    ts = pending[:n_in]
                    ys = dense(ts).T.reshape((n_in,) + c0.shape)
                    chunks.append(packed.observe(ts, ys, keep_states))
                    pending = pending[n_in:]
        n_steps = int(solver.nfev)
        c_end = solver.y.reshape(c0.shape)
        if after.any():
            chunks.append(packed.observe(times[after], np.broadcast_to(c_end, (int(after.sum()),) + c0.shape), keep_states))

    elapsed = abs(t1 - t0)
    limit = controls.norm_drift_per_ns * max(elapsed, 1.0)
    out = []
    for k, (state, model) in enumerate(items):
        obs = {key: np.concatenate([ch[k][key] for ch in chunks]) for key in chunks[0][k]}
        psi = obs.pop("_states", None)
        batch = state.amplitudes.ndim == 2
        if not batch:
            obs = {key: v[:, 0] for key, v in obs.items()}
            psi = None if psi is None else psi[:, :, 0]
        norm_err = float(np.max(np.abs(obs["norm"] - 1.0)))
        if norm_err > limit:
            raise NormDriftError(f"norm drift {norm_err:.3g} exceeds {limit:.3g} over {elapsed:.4g} ns")
        final = _to_schroedinger(model, packed.unpack(k, c_end[None]), t1)[0]
        out.append(
            Trajectory(
                times=times,
                observables=obs,
                final=StateVector(final if batch else final[:, 0], t1),
                states=psi,
                max_norm_error=norm_err,
                n_steps=n_steps,
            )
        )
    return out


class _Packed:
    """All items flattened into one vector of (level, column) amplitudes.

    The dipole coupling becomes one sparse matrix ``A`` (upper <- lower
    entries); the Hamiltonian action is ``F A + F^* A^T`` plus the diagonal,
    which the interaction picture removes.
    """

    def __init__(self, items, t0):
        self.models = [m for _, m in items]
        self.shapes, self.offsets = [], []
        rows_e, erow, a_rows, a_cols, a_data, c0 = [], [], [], [], [], []
        off = row_off = 0
        for state, model in items:
            amps = state.amplitudes if state.amplitudes.ndim == 2 else state.amplitudes[:, None]
            n, k = amps.shape
            self.shapes.append((n, k))
            self.offsets.append(off)
            rows_e.append(model.energies)
            erow.append(np.repeat(row_off + np.arange(n), k))
            c0.append((_phases(model, t0)[:, None] * amps).reshape(-1))
            iu, il = np.nonzero(model.coupling)
            u, lo = model.upper[iu], model.lower[il]
            cols = np.arange(k)
            a_rows.append((off + u[:, None] * k + cols).reshape(-1))
            a_cols.append((off + lo[:, None] * k + cols).reshape(-1))
            a_data.append(np.repeat(model.coupling[iu, il], k))
            off += n * k
            row_off += n
        self.size = off
        self.row_energies = np.concatenate(rows_e)
        self.erow = np.concatenate(erow)
        self.c0 = np.concatenate(c0)
        self.a = sparse.csr_matrix(
            (np.concatenate(a_data), (np.concatenate(a_rows), np.concatenate(a_cols))), shape=(off, off)
        )
        # complex storage avoids an upcast of the matrix at every product
        self.a = self.a.astype(complex)
        self.at = self.a.T.tocsr()
        self.observers = [_Observer(m) for m in self.models]

    def rhs(self, model: HamiltonianModel):
        e = TWO_PI_MHZ_NS * self.row_energies
        erow = self.erow
        a, at = self.a, self.at
        k = TWO_PI_MHZ_NS

        def rhs(t, y):
            ph = np.exp(1j * e * t)[erow]
            psi = y / ph
            f = complex(model.field(t))
            return (-1j * k) * ph * (f * (a @ psi) + np.conj(f) * (at @ psi))

        return rhs

    def unpack(self, k, c):
        # c: (samples, flat) -> (samples, model levels, columns), interaction picture
        n, cols = self.shapes[k]
        off = self.offsets[k]
        return c[:, off : off + n * cols].reshape(c.shape[0], n, cols)

    def observe(self, times, c, keep_states=False) -> list:
        """Per-item observables at ``times`` from flat interaction-picture data."""
        out = []
        for k, (model, observer) in enumerate(zip(self.models, self.observers)):
            ck = self.unpack(k, c)
            obs = {}
            for m, rows in observer.rows.items():
                e = model.energies[rows]
                part = ck[:, rows] * np.exp(-1j * TWO_PI_MHZ_NS * np.multiply.outer(times, e))[:, :, None]
                obs[f"pop_{m}"] = np.sum(np.abs(part) ** 2, axis=1)
                if m in observer.cos2:
                    cpart = np.einsum("ij,sjk->sik", observer.cos2[m], part)
                    obs[f"cos2_{m}"] = np.real(np.sum(part.conj() * cpart, axis=1))
            obs["norm"] = np.sqrt(np.sum(np.abs(ck) ** 2, axis=1))
            if keep_states:
                obs["_states"] = _to_schroedinger(model, ck, times)
            out.append(obs)
        return out


def free_evolve(
    state: StateVector,
    model: HamiltonianModel,
    duration_ns: float,
    stride_ns: float | None = None,
    store_states: bool = False,
) -> Trajectory:
    """Field-free evolution: each amplitude picks up exp(-i 2 pi E t).  Exact."""
    if duration_ns < 0:
        raise ValueError("duration must be non-negative")
    psi0 = state.amplitudes
    batch = psi0.ndim == 2
    t0 = state.t_ns
    if duration_ns == 0:
        times = np.array([t0])
    else:
        times = sample_times(t0, t0 + duration_ns, stride_ns or default_stride(model))
    packed = _Packed([(state, model)], t0)
    obs = packed.observe(times, np.broadcast_to(packed.c0, (len(times),) + packed.c0.shape), store_states)[0]
    psi = obs.pop("_states", None)
    if not batch:
        obs = {k: v[:, 0] for k, v in obs.items()}
        psi = None if psi is None else psi[:, :, 0]
    final = _to_schroedinger(model, packed.unpack(0, packed.c0[None]), t0 + duration_ns)[0]
    final = StateVector(final if batch else final[:, 0], t0 + duration_ns)
    return Trajectory(times, obs, final, psi, float(np.max(np.abs(obs["norm"] - 1.0))))
