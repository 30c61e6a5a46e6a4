import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as c

from photoalign.ensemble import (
    EnsembleSpec,
    Member,
    TruncationWarning,
    analysis_times,
    average_ensemble,
    dynamic_alignment_amplitude,
    family_hamiltonian,
    parity_fractions,
    run_ensemble,
    static_alignment,
    thermal_initial_states,
)
from photoalign.model import ModelSpec
from photoalign.propagate import StateVector, propagate
from photoalign.pulse import PulseSpec

SMALL = ModelSpec(j_max=2, n_box=6)
CHIRPED = PulseSpec(2000.0, 2.0, chirp_mhz_per_ns=200.0)


def test_parity_fractions():
    f = parity_fractions(1.5)
    assert f["odd"] == pytest.approx(5 / 8) and f["even"] == pytest.approx(3 / 8)
    assert f["odd"] / f["even"] == pytest.approx((1.5 + 1) / 1.5)
    with pytest.raises(ValueError):
        parity_fractions(0.0)


@pytest.fixture(scope="module", params=["even", "odd"])
def model(request):
    return family_hamiltonian(SMALL, request.param, ())


@pytest.fixture(scope="module")
def levels(model):
    return model.levels


def test_thermal_weights_are_boltzmann_and_isotropic(levels):
    spec = EnsembleSpec(temperature_uk=50.0, weight_cutoff=0.0)
    states = thermal_initial_states(levels, spec)
    assert sum(s.weight for s in states) == pytest.approx(1.0, abs=1e-14)
    kt = c.k * 50e-6 / c.h * 1e-6  # MHz
    ref = states[0]
    for s in states:
        ratio = s.weight / ref.weight
        assert ratio == pytest.approx(math.exp(-(s.level.energy_mhz - ref.level.energy_mhz) / kt), rel=1e-12)
    # every M sublevel of one (n, J) level shares the weight
    by_level = {}
    for s in states:
        by_level.setdefault((s.level.index, s.level.angular.J), set()).add(s.weight)
    assert all(len(w) == 1 for w in by_level.values())


def test_zero_temperature_keeps_lowest_state(levels):
    states = thermal_initial_states(levels, EnsembleSpec(temperature_uk=0.0))
    e = {s.level.energy_mhz for s in states}
    assert len(e) == 1
    assert e.pop() == min(lv.energy_mhz for lv in levels if lv.manifold == "scattering")


def test_weight_cutoff_and_truncation_warning(levels):
    full = thermal_initial_states(levels, EnsembleSpec(weight_cutoff=0.0))
    cut = thermal_initial_states(levels, EnsembleSpec(weight_cutoff=1e-2))
    assert len(cut) < len(full)
    with pytest.warns(TruncationWarning):
        thermal_initial_states(levels, EnsembleSpec(temperature_uk=5000.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        thermal_initial_states(levels, EnsembleSpec(temperature_uk=1.0))


@pytest.mark.filterwarnings("ignore::photoalign.ensemble.TruncationWarning")
def test_pre_pulse_alignment_of_isotropic_ensemble(model, levels):
    # incoherent sum over thermal members of <cos^2> of the scattering manifold
    c2 = model.cos2_matrix("scattering")
    pos = {i: k for k, i in enumerate(model.indices("scattering"))}
    for t in (1.0, 100.0, 1000.0):
        states = thermal_initial_states(levels, EnsembleSpec(temperature_uk=t, weight_cutoff=0.0))
        avg = sum(s.weight * c2[pos[s.index], pos[s.index]] for s in states)
        assert avg == pytest.approx(1 / 3, abs=1e-10)


def test_analysis_times_put_period_boundaries_on_samples():
    t = analysis_times(5.0, 30.7, 2.0, 0.05)
    assert t[0] == 5.0 and t[-1] == pytest.approx(5.0 + 61.4)
    per = int(np.ceil(30.7 / 0.05))
    assert t[per] == pytest.approx(5.0 + 30.7, abs=1e-12)


@pytest.mark.parametrize("phase", [0.0, 0.7, 2.0])
def test_static_and_dynamic_of_periodic_trace(phase):
    period, start = 30.7, 3.0
    t = analysis_times(start, period, 2.0, 0.01)
    y = 0.4 + 0.1 * np.cos(2 * np.pi * (t - start) / period + phase) + 0.03 * np.cos(6 * np.pi * (t - start) / period)
    assert static_alignment(t, y, (start, t[-1]), period) == pytest.approx(0.4, abs=1e-12)
    amp = dynamic_alignment_amplitude(t, y, (start, t[-1]), period)
    dense = 0.1 * np.cos(np.linspace(0, 2 * np.pi, 200001) + phase) + 0.03 * np.cos(3 * np.linspace(0, 2 * np.pi, 200001))
    assert amp == pytest.approx(0.5 * np.ptp(dense), abs=1e-4)
    with pytest.raises(ValueError, match="shorter than one period"):
        static_alignment(t, y, (start, start + 10.0), period)


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(6))))
def test_average_is_order_independent(perm):
    rng = np.random.default_rng(7)
    t = np.linspace(0, 10, 11)
    members = [
        Member(float(rng.random()), "even" if k % 2 else "odd", rng.random(11) * 1e-3, rng.random(11) * 3e-4)
        for k in range(6)
    ]
    a = average_ensemble(t, members)
    b = average_ensemble(t, [members[i] for i in perm])
    for key in ("even", "odd", "total"):
        assert a.population[key].tobytes() == b.population[key].tobytes()
        assert a.alignment[key].tobytes() == b.alignment[key].tobytes()


def test_alignment_undefined_below_floor():
    t = np.linspace(0, 1, 5)
    m = Member(1.0, "odd", np.array([0, 1e-12, 1e-9, 1e-3, 1e-3]), np.array([0, 4e-13, 4e-10, 5e-4, 2e-4]))
    res = average_ensemble(t, [m], {"odd": 1.0, "even": 0.0}, floor=1e-10)
    got = res.alignment["odd"]
    assert np.isnan(got[:2]).all()
    np.testing.assert_allclose(got[2:], [0.4, 0.5, 0.2])


@pytest.fixture(scope="module")
def chirped():
    return run_ensemble((CHIRPED,), model_spec=SMALL, stride_ns=0.1)


def test_run_ensemble_observables(chirped):
    r = chirped
    assert r.final_population > 1e-6
    assert np.all(r.population["total"] >= 0)
    ok = np.isfinite(r.alignment["total"])
    assert np.all((r.alignment["total"][ok] >= 0) & (r.alignment["total"][ok] <= 1))
    total = 5 / 8 * r.population["odd"] + 3 / 8 * r.population["even"]
    np.testing.assert_allclose(r.population["total"], total, rtol=1e-14)
    assert r.period_ns == pytest.approx(30.7, rel=1e-3)
    assert r.analysis_window[1] - r.analysis_window[0] == pytest.approx(2 * r.period_ns)
    assert r.metadata["max_norm_error"] < 1e-8 * (r.times[-1] - r.times[0])
    # pre-pulse: nothing bound, alignment undefined
    assert r.population["total"][0] == 0.0 and np.isnan(r.alignment["total"][0])


def test_field_free_population_constant_after_pulse(chirped):
    r = chirped
    post = r.times >= r.analysis_window[0]
    np.testing.assert_allclose(r.population["total"][post], r.final_population, rtol=1e-9)


def test_zero_intensity_gives_no_molecules():
    r = run_ensemble((PulseSpec(0.0, 2.0),), model_spec=SMALL, stride_ns=0.5, record_pulse=False)
    assert r.final_population == 0.0
    assert math.isnan(r.static_alignment) and math.isnan(r.dynamic_amplitude)


def test_mirror_m_blocks_evolve_identically():
    # the ensemble propagates M >= 0 only and doubles M > 0
    model = family_hamiltonian(SMALL, "even", (CHIRPED,))
    for M in (1, 2):
        a, b = model.block(M), model.block(-M)
        i = int(a.indices("scattering")[0])
        ta = propagate(StateVector.basis_state(a.n, i, -10.0), a, -10.0, 10.0)
        tb = propagate(StateVector.basis_state(b.n, i, -10.0), b, -10.0, 10.0)
        np.testing.assert_allclose(ta.observables["pop_target"], tb.observables["pop_target"], rtol=1e-8, atol=1e-18)
        np.testing.assert_allclose(ta.observables["cos2_target"], tb.observables["cos2_target"], rtol=1e-8, atol=1e-18)


def test_record_pulse_off_keeps_post_pulse_results(chirped):
    r = run_ensemble((CHIRPED,), model_spec=SMALL, stride_ns=0.1, record_pulse=False)
    assert r.final_population == pytest.approx(chirped.final_population, rel=1e-8)
    assert r.static_alignment == pytest.approx(chirped.static_alignment, rel=1e-8)
    assert len(r.times) < len(chirped.times)
