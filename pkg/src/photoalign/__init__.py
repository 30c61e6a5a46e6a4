"""Pulsed photoassociation of ultracold atom pairs with rotational alignment.

Modules: ``angmom`` (3-j algebra), ``radial`` (mapped-grid eigensolver),
``pulse`` (Gaussian pulses and trains), ``basis`` (ro-vibronic basis and RWA
Hamiltonian), ``propagate`` (time-dependent Schroedinger solver),
``ensemble`` (thermal averaging and alignment), ``train`` (pulse trains from
one propagator), ``sweep`` (parameter scans), ``config`` and ``cli``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # source tree without an install
    __version__ = "0.1.0"
