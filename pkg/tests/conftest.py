"""Shared small models for the test-suite."""

from __future__ import annotations

import numpy as np
import pytest

from photoalign.angmom import AngularState
from photoalign.basis import ChannelLevel, HamiltonianModel
from photoalign.pulse import intensity_to_rabi


def toy_model(manifolds, energies, upper, lower, coupling, pulses, mu0_debye=10.0) -> HamiltonianModel:
    """Hand-built model; every level has J = 0 or 1 and M = 0 only for bookkeeping."""
    levels = tuple(
        ChannelLevel(m, k, AngularState(1 if m == "intermediate" else 0, 0, 0), float(e))
        for k, (m, e) in enumerate(zip(manifolds, energies))
    )
    return HamiltonianModel(
        levels,
        np.array(energies, dtype=float),
        np.array(upper, dtype=int),
        np.array(lower, dtype=int),
        np.array(coupling, dtype=float),
        tuple(pulses),
        float(mu0_debye),
    )


def intensity_for_rabi(rabi_mhz: float, mu0_debye: float = 10.0) -> float:
    """Peak intensity giving ``rabi_mhz`` (coupling scales as sqrt(I))."""
    return (rabi_mhz / intensity_to_rabi(1.0, mu0_debye)) ** 2


@pytest.fixture
def two_level():
    def make(pulses, coupling=1.0, detuning=0.0):
        return toy_model(("scattering", "intermediate"), (0.0, detuning), [1], [0], [[coupling]], pulses)

    return make


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
