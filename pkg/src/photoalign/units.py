"""Physical constants and unit conversions.

Everything numerical inside the package is in atomic units (hartree, bohr,
electron mass) for the radial problem and in frequency units (MHz, ns) for the
time-dependent problem.  Energies quoted as frequencies are E/h.
"""

from scipy import constants as _c

#: Hartree energy divided by h, in MHz.
HARTREE_MHZ = _c.physical_constants["hartree-hertz relationship"][0] * 1e-6
#: Hartree energy divided by h, in GHz.
HARTREE_GHZ = HARTREE_MHZ * 1e-3
#: Unified atomic mass unit in electron masses.
AMU_ME = _c.m_u / _c.m_e
BOHR_M = _c.physical_constants["Bohr radius"][0]
DEBYE_CM = 1e-21 / _c.c

#: Mass of 87Rb in amu.
RB87_MASS_AMU = 86.909180531
#: Reduced mass of an 87Rb pair in amu.
RB87_REDUCED_MASS_AMU = RB87_MASS_AMU / 2

#: Phase accumulated per (MHz * ns): 2*pi * 1e6 * 1e-9.
TWO_PI_MHZ_NS = 2e-3 * _c.pi

#: Boltzmann constant over h, in MHz per microkelvin.
KB_MHZ_PER_UK = _c.k / _c.h * 1e-12


def mhz_to_hartree(e_mhz):
    return e_mhz / HARTREE_MHZ


def hartree_to_mhz(e_h):
    return e_h * HARTREE_MHZ


def ghz_to_hartree(e_ghz):
    return e_ghz / HARTREE_GHZ


def hartree_to_ghz(e_h):
    return e_h * HARTREE_GHZ


def amu_to_me(m_amu):
    return m_amu * AMU_ME


def centrifugal_unit_mhz(mass_amu):
    """hbar^2 / (2 m a0^2) expressed in MHz for a reduced mass in amu."""
    return HARTREE_MHZ / (2.0 * amu_to_me(mass_amu))


def field_amplitude_vm(intensity_wcm2):
    """Peak field E0 = sqrt(2 I / (eps0 c)) in V/m for an intensity in W/cm^2."""
    i_wm2 = intensity_wcm2 * 1e4
    return (2.0 * i_wm2 / (_c.epsilon_0 * _c.c)) ** 0.5


def dipole_field_mhz(mu_debye, field_vm):
    """Coupling mu*E/h in MHz."""
    return mu_debye * DEBYE_CM * field_vm / _c.h * 1e-6
