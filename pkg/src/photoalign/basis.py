"""Three-manifold ro-vibronic basis and the rotating-wave Hamiltonian.

Manifolds:

* ``scattering``  -- box-discretized ground-state continuum, one radial
  channel per (J, Omega), energies include the centrifugal barrier;
* ``intermediate`` -- one excited vibrational level, rigid-rotor ladder;
* ``target``       -- one weakly bound ground-state level, rigid-rotor ladder.

The Hamiltonian lives in the frame rotating with the optical carrier at the
rotationless intermediate resonance.  In that frame the intermediate levels
sit at their rotational offsets and the (possibly chirped) carrier phase is
carried by the coupling.  :meth:`HamiltonianModel.diagonal` gives the
equivalent picture with the chirp moved onto the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import pulse as _pulse
from .angmom import AngularState, cos2theta_element, dipole_rotational_factor
from .radial import RadialSolution, franck_condon

__all__ = [
    "MANIFOLDS",
    "ChannelLevel",
    "RadialModel",
    "build_basis",
    "fc_table",
    "assemble_hamiltonian",
    "HamiltonianModel",
    "MissingChannelError",
]

MANIFOLDS = ("scattering", "intermediate", "target")


class MissingChannelError(KeyError):
    pass


@dataclass(frozen=True)
class ChannelLevel:
    manifold: str
    index: int
    angular: AngularState
    energy_mhz: float
    bv_mhz: float = 0.0

    @property
    def key(self) -> tuple:
        """Radial identity of the level (M dropped)."""
        return (self.manifold, self.index, self.angular.J, self.angular.Omega)


@dataclass(frozen=True, eq=False)
class RadialModel:
    """Radial solutions feeding the basis.

    ``scattering`` maps (J, Omega) to the channel solution whose box states
    (E >= 0) form the continuum.  The bound manifolds are single vibrational
    levels of rotationless solutions; their rotational ladder uses B_v.
    """

    scattering: dict
    intermediate: RadialSolution
    intermediate_level: int
    target: RadialSolution
    target_level: int
    n_box: int
    omegas: dict = field(default_factory=lambda: {m: (0,) for m in MANIFOLDS})

    def box_indices(self, J: int, Omega: int = 0) -> np.ndarray:
        sol = self._scattering(J, Omega)
        idx = sol.continuum_indices
        if len(idx) < self.n_box:
            raise MissingChannelError(
                f"scattering channel J={J} Omega={Omega} has only {len(idx)} box states below its cap; "
                f"{self.n_box} requested"
            )
        return idx[: self.n_box]

    def _scattering(self, J, Omega):
        try:
            return self.scattering[(J, Omega)]
        except KeyError:
            raise MissingChannelError(f"no radial solution for channel (scattering, J={J}, Omega={Omega})") from None

    @property
    def intermediate_energy_mhz(self) -> float:
        return float(self.intermediate.energies_mhz[self.intermediate_level])

    @property
    def intermediate_bv_mhz(self) -> float:
        return float(self.intermediate.bv_mhz[self.intermediate_level])

    @property
    def target_energy_mhz(self) -> float:
        return float(self.target.energies_mhz[self.target_level])

    @property
    def target_bv_mhz(self) -> float:
        return float(self.target.bv_mhz[self.target_level])

    @property
    def binding_mhz(self) -> float:
        return -self.target_energy_mhz


def _parity_js(parity: str, j_max: int):
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    start = 0 if parity == "even" else 1
    return list(range(start, j_max + 1, 2))


def build_basis(model: RadialModel, j_max: int, parity: str) -> list:
    """All ChannelLevels of one nuclear-spin parity family, every M included.

    Scattering and target levels carry J of the family's parity up to
    ``j_max``; intermediate levels carry the opposite parity up to
    ``j_max + 1`` so every dipole step out of the scattering manifold is
    represented.  Duplicate channels collapse to a single entry.
    """
    if j_max < 0:
        raise ValueError("j_max must be non-negative")
    lower_js = _parity_js(parity, j_max)
    upper_js = _parity_js("odd" if parity == "even" else "even", j_max + 1)
    seen = set()
    levels = []

    def add(level):
        ident = (level.manifold, level.index, level.angular)
        if ident not in seen:
            seen.add(ident)
            levels.append(level)

    e_i, b_i = model.intermediate_energy_mhz, model.intermediate_bv_mhz
    e_t, b_t = model.target_energy_mhz, model.target_bv_mhz
    for J in lower_js:
        for Om in model.omegas["scattering"]:
            if abs(Om) > J:
                continue
            sol = model._scattering(J, Om)
            for n in model.box_indices(J, Om):
                for M in range(-J, J + 1):
                    add(ChannelLevel("scattering", int(n), AngularState(J, M, Om), float(sol.energies_mhz[n])))
    for J in upper_js:
        for Om in model.omegas["intermediate"]:
            if abs(Om) > J:
                continue
            rot = b_i * (J * (J + 1) - Om * Om)
            for M in range(-J, J + 1):
                add(ChannelLevel("intermediate", model.intermediate_level, AngularState(J, M, Om), rot, b_i))
    for J in lower_js:
        for Om in model.omegas["target"]:
            if abs(Om) > J:
                continue
            energy = e_t + b_t * (J * (J + 1) - Om * Om)
            for M in range(-J, J + 1):
                add(ChannelLevel("target", model.target_level, AngularState(J, M, Om), energy, b_t))
    return levels


def fc_table(model: RadialModel, levels) -> dict:
    """Franck-Condon factors keyed by (lower key, upper key), mu0 = 1."""
    table = {}
    uppers = {lv.key for lv in levels if lv.manifold == "intermediate"}
    lowers = {lv.key for lv in levels if lv.manifold != "intermediate"}
    fc_bound = franck_condon(model.intermediate, model.intermediate_level, model.target, model.target_level)
    cache = {}
    for lk in sorted(lowers):
        manifold, index, J, Om = lk
        if manifold == "target":
            value = fc_bound
        else:
            ck = (J, Om, index)
            if ck not in cache:
                cache[ck] = franck_condon(model._scattering(J, Om), index, model.intermediate, model.intermediate_level)
            value = cache[ck]
        for uk in uppers:
            table[(lk, uk)] = value
    return table


def assemble_hamiltonian(levels, pulses, fcs: dict, mu0_debye: float = _pulse.DEFAULT_MU0_DEBYE) -> "HamiltonianModel":
    """Collect energies and dipole couplings of ``levels`` under ``pulses``.

    Couplings connect intermediate levels to scattering and target levels
    only (two-photon Lambda scheme) and conserve M.  The body-frame
    component q is fixed by the Omega values of the pair.
    """
    if isinstance(pulses, _pulse.PulseSpec):
        pulses = (pulses,)
    levels = tuple(levels)
    manifold = np.array([MANIFOLDS.index(lv.manifold) for lv in levels])
    upper = np.flatnonzero(manifold == 1)
    lower = np.flatnonzero(manifold != 1)
    coupling = np.zeros((len(upper), len(lower)))
    for a, iu in enumerate(upper):
        up = levels[iu]
        for b, il in enumerate(lower):
            lo = levels[il]
            if up.angular.M != lo.angular.M or abs(up.angular.J - lo.angular.J) != 1:
                continue
            q = up.angular.Omega - lo.angular.Omega
            if abs(q) > 1:
                continue
            rot = dipole_rotational_factor(up.angular, lo.angular, q)
            if rot == 0.0:
                continue
            try:
                fc = fcs[(lo.key, up.key)]
            except KeyError:
                raise MissingChannelError(f"no Franck-Condon factor for {lo.key} -> {up.key}") from None
            coupling[a, b] = rot * fc
    energies = np.array([lv.energy_mhz for lv in levels])
    return HamiltonianModel(levels, energies, upper, lower, coupling, tuple(pulses), float(mu0_debye))


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    """H(t) = diag(E) + F(t) C + F(t)^* C^T with C the (upper x lower) couplings.

    ``F(t) = sum_k Omega_k(t)/2 exp(-i Phi_k(t))`` (MHz) is the RWA field
    amplitude.  All energies are E/h in MHz.
    """

    levels: tuple
    energies: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    coupling: np.ndarray
    pulses: tuple
    mu0_debye: float

    def __post_init__(self):
        for arr in (self.energies, self.upper, self.lower, self.coupling):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.levels)

    @cached_property
    def manifold_index(self) -> np.ndarray:
        return np.array([MANIFOLDS.index(lv.manifold) for lv in self.levels])

    def indices(self, manifold: str) -> np.ndarray:
        return np.flatnonzero(self.manifold_index == MANIFOLDS.index(manifold))

    @cached_property
    def m_values(self) -> tuple:
        return tuple(sorted({lv.angular.M for lv in self.levels}))

    @cached_property
    def coupling_table(self) -> list:
        """Sparse (upper index, lower index, coefficient) triples."""
        a, b = np.nonzero(self.coupling)
        return [(int(self.upper[i]), int(self.lower[j]), float(self.coupling[i, j])) for i, j in zip(a, b)]

    @cached_property
    def _rabi0(self) -> np.ndarray:
        return np.array([_pulse.intensity_to_rabi(p.intensity_wcm2, self.mu0_debye) for p in self.pulses])

    def field(self, t) -> np.ndarray:
        """Complex RWA field amplitude F(t) in MHz."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for p, om in zip(self.pulses, self._rabi0):
            if om == 0.0:
                continue
            u = (t - p.center_ns) / p.sigma_ns
            out += 0.5 * om * np.exp(-u * u - 1j * _pulse.carrier_phase(p, t))
        return out

    def envelope(self, t) -> np.ndarray:
        """Sum of real pulse envelopes (MHz), without the RWA factor 1/2."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for p, om in zip(self.pulses, self._rabi0):
            u = (t - p.center_ns) / p.sigma_ns
            out += om * np.exp(-u * u)
        return out

    def detuning(self, t) -> float:
        """Instantaneous detuning of the pulse with the largest envelope at t."""
        if not self.pulses:
            return 0.0
        k = int(np.argmin([abs(t - p.center_ns) / p.sigma_ns for p in self.pulses]))
        return float(_pulse.instantaneous_detuning(self.pulses[k], t))

    def diagonal(self, t) -> np.ndarray:
        """Rotating-frame diagonal with the chirp on the intermediate levels."""
        d = self.energies.copy()
        d[self.upper] -= self.detuning(t)
        return d

    def couplings(self, t) -> np.ndarray:
        """Real rotating-frame coupling matrix (upper x lower) at time t, MHz."""
        return 0.5 * float(self.envelope(t)) * self.coupling

    def matrix(self, t, frame: str = "carrier") -> np.ndarray:
        """Dense Hermitian H(t) in MHz.

        ``frame="carrier"`` keeps the carrier phase in the couplings (exact for
        any train); ``frame="rotating"`` moves the chirp onto the diagonal,
        which is the same physics for a single pulse.
        """
        h = np.zeros((self.n, self.n), dtype=complex)
        if frame == "carrier":
            h[np.diag_indices(self.n)] = self.energies
            f = complex(self.field(t))
            block = f * self.coupling
        elif frame == "rotating":
            h[np.diag_indices(self.n)] = self.diagonal(t)
            block = self.couplings(t).astype(complex)
        else:
            raise ValueError(f"unknown frame {frame!r}")
        h[np.ix_(self.upper, self.lower)] = block
        h[np.ix_(self.lower, self.upper)] = block.conj().T
        return h

    def block(self, M: int) -> "HamiltonianModel":
        """Sub-model of the levels with projection M (H is block diagonal in M)."""
        keep = np.array([lv.angular.M == M for lv in self.levels])
        new_index = -np.ones(self.n, dtype=int)
        new_index[keep] = np.arange(keep.sum())
        up_keep = keep[self.upper]
        lo_keep = keep[self.lower]
        return HamiltonianModel(
            tuple(lv for lv, k in zip(self.levels, keep) if k),
            self.energies[keep].copy(),
            new_index[self.upper[up_keep]],
            new_index[self.lower[lo_keep]],
            self.coupling[np.ix_(up_keep, lo_keep)].copy(),
            self.pulses,
            self.mu0_debye,
        )

    def cos2_matrix(self, manifold: str = "target") -> np.ndarray:
        """<i|cos^2 theta|j> over the levels of one manifold (same radial level)."""
        idx = self.indices(manifold)
        states = [self.levels[i] for i in idx]
        out = np.zeros((len(idx), len(idx)))
        for a, la in enumerate(states):
            for b, lb in enumerate(states):
                if la.key[:2] == lb.key[:2]:
                    out[a, b] = cos2theta_element(la.angular, lb.angular)
        return out

    def with_pulses(self, pulses) -> "HamiltonianModel":
        if isinstance(pulses, _pulse.PulseSpec):
            pulses = (pulses,)
        return HamiltonianModel(self.levels, self.energies, self.upper, self.lower, self.coupling, tuple(pulses), self.mu0_debye)

    def fastest_frequency_mhz(self) -> float:
        """Upper bound on |E_i - E_j| plus the largest detuning excursion."""
        e = self.energies
        span = float(e.max() - e.min()) if len(e) else 0.0
        det = 0.0
        for p in self.pulses:
            det = max(det, abs(p.detuning_mhz) + abs(p.chirp_mhz_per_ns) * 5 * p.sigma_ns)
        return span + det
