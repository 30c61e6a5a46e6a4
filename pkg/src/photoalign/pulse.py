"""Linearly Z-polarized Gaussian pulses, linear chirps and phase-locked trains.

The field of one pulse is ``E0 exp(-(t-tc)^2/sigma^2) exp(-i Phi(t))`` with
instantaneous detuning ``delta(t) = delta + r (t - tc)`` relative to the
rotationless intermediate resonance.  The carrier reference is shared by
every pulse of a train, so ``Phi`` uses the absolute time for the constant
detuning part.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import units

__all__ = [
    "PulseSpec",
    "DEFAULT_MU0_DEBYE",
    "MIN_GAP_SIGMAS",
    "intensity_to_rabi",
    "envelope",
    "instantaneous_detuning",
    "carrier_phase",
    "quadratic_phase_coefficient",
    "make_train",
    "train_window",
]

#: Default molecular transition dipole (debye) used to turn intensity into coupling.
DEFAULT_MU0_DEBYE = 10.0
#: Minimum center-to-center spacing of train pulses, in units of sigma.
MIN_GAP_SIGMAS = 5.0


@dataclass(frozen=True)
class PulseSpec:
    """One Gaussian pulse.

    Attributes
    ----------
    intensity_wcm2 : peak intensity I0 in W/cm^2
    sigma_ns : width in exp(-t^2/sigma^2)
    chirp_mhz_per_ns : linear sweep rate r; positive sweeps to the blue
    center_ns : time of the envelope peak
    detuning_mhz : detuning at the peak from the rotationless intermediate line
    """

    intensity_wcm2: float
    sigma_ns: float
    chirp_mhz_per_ns: float = 0.0
    center_ns: float = 0.0
    detuning_mhz: float = 0.0

    def __post_init__(self):
        if not self.sigma_ns > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma_ns}")
        if self.intensity_wcm2 < 0:
            raise ValueError(f"intensity must be non-negative, got {self.intensity_wcm2}")

    def shifted(self, dt_ns: float) -> "PulseSpec":
        return replace(self, center_ns=self.center_ns + dt_ns)


def intensity_to_rabi(intensity_wcm2: float, mu0_debye: float = DEFAULT_MU0_DEBYE) -> float:
    """Peak coupling mu0 * E0 / h in MHz, with E0 = sqrt(2 I0 / (eps0 c)).

    This is a cyclic frequency: the angular Rabi frequency is 2*pi times it.
    """
    if intensity_wcm2 < 0 or mu0_debye < 0:
        raise ValueError("intensity and dipole must be non-negative")
    return units.dipole_field_mhz(mu0_debye, units.field_amplitude_vm(intensity_wcm2))


def envelope(spec: PulseSpec, t, mu0_debye: float = DEFAULT_MU0_DEBYE):
    """Real envelope Omega0 * exp(-(t - tc)^2 / sigma^2) in MHz."""
    t = np.asarray(t, dtype=float)
    u = (t - spec.center_ns) / spec.sigma_ns
    return intensity_to_rabi(spec.intensity_wcm2, mu0_debye) * np.exp(-u * u)


def instantaneous_detuning(spec: PulseSpec, t):
    """delta(t) = delta + r (t - tc) in MHz."""
    t = np.asarray(t, dtype=float)
    return spec.detuning_mhz + spec.chirp_mhz_per_ns * (t - spec.center_ns)


def carrier_phase(spec: PulseSpec, t):
    """Phi(t) in radians, with dPhi/dt = 2 pi delta(t)."""
    t = np.asarray(t, dtype=float)
    dt = t - spec.center_ns
    return units.TWO_PI_MHZ_NS * (spec.detuning_mhz * t + 0.5 * spec.chirp_mhz_per_ns * dt * dt)


def quadratic_phase_coefficient(spec: PulseSpec) -> float:
    """chi in exp(-i chi t^2), in rad/ns^2; chi = pi * r."""
    return np.pi * spec.chirp_mhz_per_ns * 1e-3


def make_train(base: PulseSpec, n: int, delay_ns: float, allow_overlap: bool = False) -> tuple:
    """``n`` copies of ``base`` centered at ``base.center_ns + k * delay_ns``.

    Delays shorter than ``MIN_GAP_SIGMAS * sigma`` are rejected unless
    ``allow_overlap`` is set.
    """
    if n < 1:
        raise ValueError(f"a train needs at least one pulse, got n={n}")
    if n > 1 and delay_ns < MIN_GAP_SIGMAS * base.sigma_ns * (1 - 1e-12) and not allow_overlap:
        raise ValueError(
            f"delay {delay_ns} ns is shorter than {MIN_GAP_SIGMAS:g} sigma = "
            f"{MIN_GAP_SIGMAS * base.sigma_ns} ns; pass allow_overlap=True to override"
        )
    return tuple(base.shifted(k * delay_ns) for k in range(n))


def train_window(pulses, sigmas: float = MIN_GAP_SIGMAS) -> tuple:
    """(start, end) covering every pulse center +- ``sigmas`` widths."""
    start = min(p.center_ns - sigmas * p.sigma_ns for p in pulses)
    end = max(p.center_ns + sigmas * p.sigma_ns for p in pulses)
    return start, end
