import numpy as np
import pytest

from photoalign.angmom import AngularState, cos2theta_element
from photoalign.basis import MissingChannelError, assemble_hamiltonian, build_basis, fc_table
from photoalign.model import ModelSpec, build_radial_model
from photoalign.pulse import PulseSpec
from photoalign.radial import franck_condon

SMALL = ModelSpec(j_max=3, n_box=6)


@pytest.fixture(scope="module")
def radial():
    return build_radial_model(SMALL)


@pytest.fixture(scope="module", params=["even", "odd"])
def family(request, radial):
    levels = build_basis(radial, SMALL.j_max, request.param)
    return request.param, levels, fc_table(radial, levels)


def count(levels, manifold):
    return sum(1 for lv in levels if lv.manifold == manifold)


def test_basis_sizes_and_parities(family, radial):
    parity, levels, _ = family
    lower = [0, 2] if parity == "even" else [1, 3]
    upper = [1, 3] if parity == "even" else [0, 2, 4]
    assert count(levels, "scattering") == radial.n_box * sum(2 * j + 1 for j in lower)
    assert count(levels, "target") == sum(2 * j + 1 for j in lower)
    assert count(levels, "intermediate") == sum(2 * j + 1 for j in upper)
    assert {lv.angular.J for lv in levels if lv.manifold != "intermediate"} == set(lower)
    assert len(set(levels)) == len(levels)


def test_level_energies(family, radial):
    _, levels, _ = family
    e_t, b_t, b_i = radial.target_energy_mhz, radial.target_bv_mhz, radial.intermediate_bv_mhz
    for lv in levels:
        J = lv.angular.J
        if lv.manifold == "target":
            assert lv.energy_mhz == pytest.approx(e_t + b_t * J * (J + 1), rel=1e-14)
        elif lv.manifold == "intermediate":
            assert lv.energy_mhz == pytest.approx(b_i * J * (J + 1), abs=1e-12)
        else:
            assert lv.energy_mhz > 0


def test_fc_table_values(family, radial):
    _, levels, fcs = family
    bound = franck_condon(radial.intermediate, radial.intermediate_level, radial.target, radial.target_level)
    for (lk, _), value in fcs.items():
        if lk[0] == "target":
            assert value == bound
        else:
            _, n, J, Om = lk
            assert value == franck_condon(radial.scattering[(J, Om)], n, radial.intermediate, radial.intermediate_level)


def test_couplings_follow_selection_rules(family):
    _, levels, fcs = family
    m = assemble_hamiltonian(levels, (PulseSpec(100.0, 5.0),), fcs)
    for u, l, c in m.coupling_table:
        up, lo = levels[u].angular, levels[l].angular
        assert levels[u].manifold == "intermediate" and levels[l].manifold != "intermediate"
        assert up.M == lo.M and abs(up.J - lo.J) == 1
        assert c != 0.0


def test_coupling_sum_rule(family):
    # for each lower |J M>: sum over upper J' of <J'M|cos|JM>^2 = <JM|cos^2|JM>,
    # provided every J' = J +- 1 is present (true for lower J <= j_max)
    _, levels, fcs = family
    m = assemble_hamiltonian(levels, (PulseSpec(100.0, 5.0),), fcs)
    for b, il in enumerate(m.lower):
        lv = levels[il]
        fc = fcs[(lv.key, levels[m.upper[0]].key)]
        total = np.sum(m.coupling[:, b] ** 2)
        a = lv.angular
        assert total == pytest.approx(fc**2 * cos2theta_element(a, a), rel=1e-12, abs=1e-30)


def test_hamiltonian_is_hermitian_and_block_diagonal(family):
    _, levels, fcs = family
    m = assemble_hamiltonian(levels, (PulseSpec(300.0, 5.0, chirp_mhz_per_ns=50.0),), fcs)
    for t in (-3.0, 0.0, 2.5):
        h = m.matrix(t)
        np.testing.assert_allclose(h, h.conj().T, atol=0)
        ms = np.array([lv.angular.M for lv in levels])
        assert not np.any(h[ms[:, None] != ms[None, :]])
        for M in m.m_values:
            blk = m.block(M)
            idx = np.flatnonzero(ms == M)
            np.testing.assert_array_equal(blk.matrix(t), h[np.ix_(idx, idx)])


def test_mirror_blocks_have_equal_spectra(family):
    # Omega = 0 and Z polarization: M and -M blocks are related by a sign change
    _, levels, fcs = family
    m = assemble_hamiltonian(levels, (PulseSpec(300.0, 5.0),), fcs)
    for M in m.m_values:
        if M <= 0:
            continue
        a, b = m.block(M), m.block(-M)
        np.testing.assert_array_equal(a.energies, b.energies)
        np.testing.assert_allclose(np.abs(a.coupling), np.abs(b.coupling), rtol=1e-14)


def test_cos2_matrix_is_isotropic_per_multiplet(family):
    _, levels, fcs = family
    m = assemble_hamiltonian(levels, (), fcs)
    c = m.cos2_matrix("target")
    states = [levels[i] for i in m.indices("target")]
    for J in {s.angular.J for s in states}:
        idx = [k for k, s in enumerate(states) if s.angular.J == J]
        assert np.mean(np.diag(c)[idx]) == pytest.approx(1 / 3, abs=1e-14)
    np.testing.assert_allclose(c, c.T, atol=0)


def test_missing_channel(radial):
    with pytest.raises(MissingChannelError, match="J=4"):
        build_basis(radial, 9, "even")
    with pytest.raises(ValueError):
        build_basis(radial, 2, "both")


def test_two_photon_zero_for_unrelated_radial_levels(family):
    _, levels, fcs = family
    m = assemble_hamiltonian(levels, (), fcs)
    c = m.cos2_matrix("scattering")
    scat = [levels[i] for i in m.indices("scattering")]
    for a in range(0, len(scat), 7):
        for b in range(0, len(scat), 5):
            if scat[a].index != scat[b].index:
                assert c[a, b] == 0.0
    assert cos2theta_element(AngularState(0, 0), AngularState(0, 0)) == pytest.approx(1 / 3)
