import math

import numpy as np
import pytest
from scipy.linalg import expm

from photoalign.propagate import (
    NormDriftError,
    PropagationControls,
    StateVector,
    field_window,
    free_evolve,
    propagate,
    propagate_batch,
)
from photoalign.pulse import PulseSpec, intensity_to_rabi

from .conftest import intensity_for_rabi, toy_model


def magnus4(model, psi0, t0, t1, n_steps):
    """Independent oracle: fourth-order Magnus propagator on a uniform grid."""
    h = (t1 - t0) / n_steps
    g = 0.5 / math.sqrt(3.0)
    psi = np.array(psi0, dtype=complex)
    k = 2e-3 * np.pi
    for i in range(n_steps):
        ta = t0 + (i + 0.5 - g) * h
        tb = t0 + (i + 0.5 + g) * h
        a1, a2 = -1j * k * model.matrix(ta), -1j * k * model.matrix(tb)
        omega = 0.5 * h * (a1 + a2) + (math.sqrt(3.0) / 12.0) * h * h * (a2 @ a1 - a1 @ a2)
        psi = expm(omega) @ psi
    return psi


def area_pulse(area, sigma=5.0, coupling=0.8, **kw):
    # two-level area 2 pi c Omega0 sigma sqrt(pi), with MHz x ns = 1e-3
    omega0 = area / (2e-3 * np.pi * coupling * sigma * math.sqrt(math.pi))
    return PulseSpec(intensity_for_rabi(omega0), sigma, **kw)


def test_resonant_pi_pulse_transfers_population(two_level):
    p = area_pulse(np.pi)
    m = two_level((p,), coupling=0.8)
    traj = propagate(StateVector.basis_state(2, 0, -40.0), m, -40.0, 40.0)
    assert traj.observables["pop_intermediate"][-1] == pytest.approx(1.0, abs=1e-6)
    assert traj.observables["pop_scattering"][-1] == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("area", [0.3 * np.pi, 0.5 * np.pi, 1.7 * np.pi, 2.0 * np.pi, 3.1 * np.pi])
def test_pulse_area_theorem(two_level, area):
    m = two_level((area_pulse(area),), coupling=0.8)
    traj = propagate(StateVector.basis_state(2, 0, -40.0), m, -40.0, 40.0)
    assert traj.observables["pop_intermediate"][-1] == pytest.approx(math.sin(area / 2) ** 2, abs=1e-8)


@pytest.mark.parametrize("detuning", [0.0, 20.0, -35.0, 60.0])
def test_weak_detuned_pulse_matches_first_order_theory(two_level, detuning):
    sigma, coupling, omega0 = 4.0, 1.0, 2.0
    m = two_level((PulseSpec(intensity_for_rabi(omega0), sigma),), coupling=coupling, detuning=detuning)
    traj = propagate(StateVector.basis_state(2, 0, -40.0), m, -40.0, 40.0)
    w = 2e-3 * np.pi * detuning
    # |2 pi int (Omega(t) c / 2) e^{i w t} dt|^2, MHz x ns = 1e-3
    pt = (1e-3 * np.pi * coupling * omega0 * sigma * math.sqrt(math.pi)) ** 2 * math.exp(-((w * sigma) ** 2) / 2)
    got = traj.observables["pop_intermediate"][-1]
    assert got == pytest.approx(pt, rel=5e-3, abs=1e-14)


def lambda_model(chirp=80.0, intensity_scale=1.0):
    # scattering (0) -> intermediate (1) -> target (2) with a chirped pulse
    p = PulseSpec(intensity_for_rabi(300.0) * intensity_scale, 3.0, chirp_mhz_per_ns=chirp, detuning_mhz=15.0)
    return toy_model(
        ("scattering", "scattering", "intermediate", "target"),
        (0.4, 2.0, 10.0, -150.0),
        [2],
        [0, 1, 3],
        [[0.3, -0.2, 0.5]],
        (p,),
    )


def test_lambda_system_matches_magnus_oracle():
    m = lambda_model()
    t0, t1 = -20.0, 20.0
    psi0 = np.array([0.8, 0.6j, 0.0, 0.0])
    traj = propagate(StateVector(psi0, t0), m, t0, t1)
    ref = magnus4(m, psi0, t0, t1, 4000)
    np.testing.assert_allclose(traj.final.amplitudes, ref, atol=2e-7)


def test_forward_backward_reversal():
    m = lambda_model()
    psi0 = StateVector(np.array([0.6, 0.0, 0.0, 0.8]), -20.0)
    fwd = propagate(psi0, m, -20.0, 20.0)
    back = propagate(fwd.final, m, 20.0, -20.0, PropagationControls(allow_backward=True))
    overlap = abs(np.vdot(psi0.amplitudes, back.final.amplitudes))
    assert 1 - overlap < 1e-6
    np.testing.assert_allclose(back.final.amplitudes, psi0.amplitudes, atol=1e-8)


def test_unitarity_drift_below_contract():
    m = lambda_model(intensity_scale=20.0)
    traj = propagate(StateVector.basis_state(4, 0, -20.0), m, -20.0, 20.0)
    assert traj.max_norm_error / 40.0 < 1e-8


def test_norm_drift_error_is_raised():
    m = lambda_model(intensity_scale=20.0)
    loose = PropagationControls(rtol=1e-3, atol=1e-3, norm_drift_per_ns=1e-14)
    with pytest.raises(NormDriftError):
        propagate(StateVector.basis_state(4, 0, -20.0), m, -20.0, 20.0, loose)


def test_batch_equals_separate_runs():
    m = lambda_model()
    cols = StateVector(np.eye(4)[:, [0, 3]], -20.0)
    batch = propagate_batch([(cols, m)], -20.0, 20.0)[0]
    for k, i in enumerate((0, 3)):
        single = propagate(StateVector.basis_state(4, i, -20.0), m, -20.0, 20.0)
        np.testing.assert_allclose(batch.final.amplitudes[:, k], single.final.amplitudes, atol=1e-9)


def test_field_free_stretches_are_exact():
    m = lambda_model()
    psi0 = np.array([0.6, 0.0, 0.0, 0.8])
    free = free_evolve(StateVector(psi0, 0.0), m.with_pulses(()), 12.5)
    np.testing.assert_allclose(free.final.amplitudes, np.exp(-2e-3j * np.pi * m.energies * 12.5) * psi0, rtol=1e-13)
    # outside the field window the propagated state only picks up phases
    a, b = field_window(m)
    traj = propagate(StateVector(psi0, b), m, b, b + 100.0, PropagationControls(store_states=True))
    np.testing.assert_allclose(traj.final.amplitudes, np.exp(-2e-3j * np.pi * m.energies * 100.0) * psi0, rtol=1e-12)
    assert traj.n_steps == 0


def test_input_validation():
    m = lambda_model()
    with pytest.raises(ValueError, match="normalized"):
        propagate(StateVector(np.array([1.0, 1.0, 0.0, 0.0]), 0.0), m, 0.0, 1.0)
    with pytest.raises(ValueError, match="t1 > t0"):
        propagate(StateVector.basis_state(4, 0), m, 1.0, 0.0)
    with pytest.raises(ValueError, match="amplitudes"):
        propagate(StateVector.basis_state(3, 0), m, 0.0, 1.0)


def test_carrier_and_rotating_frames_agree_for_one_pulse():
    # moving the chirp onto the diagonal is a diagonal gauge transform
    m = lambda_model()
    t = 1.7
    phase = np.ones(m.n, dtype=complex)
    phase[m.upper] = np.exp(1j * float(np.angle(m.field(t))))
    hc = m.matrix(t, "carrier")
    hr = m.matrix(t, "rotating")
    rotated = np.conj(phase)[:, None] * hc * phase[None, :]
    np.testing.assert_allclose(rotated[~np.eye(m.n, dtype=bool)], hr[~np.eye(m.n, dtype=bool)], atol=1e-12)
    assert intensity_to_rabi(m.pulses[0].intensity_wcm2) == pytest.approx(300.0)
