"""Radial channels: potential curves, mapped Fourier grid, bound and box states.

Energies at the interface are GHz for potential curves and MHz for levels;
the Hamiltonian itself is built in atomic units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import linalg, optimize
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from . import units

__all__ = [
    "PotentialCurve",
    "RadialGrid",
    "RadialSolution",
    "ConvergenceError",
    "CalibrationError",
    "model_ground",
    "model_excited",
    "harmonic_curve",
    "morse_curve",
    "flat_curve",
    "load_tabulated",
    "effective_potential",
    "mapped_grid",
    "uniform_grid",
    "solve_channel",
    "franck_condon",
    "overlap_matrix",
    "rotational_constant",
    "calibrate_model_potential",
    "outer_turning_point",
]


class ConvergenceError(RuntimeError):
    """Grid doubling moved a bound level by more than the tolerance."""


class CalibrationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# potential curves

MODEL_KINDS = ("model-ground", "model-excited")
TEST_KINDS = ("harmonic", "morse", "flat")


@dataclass(frozen=True)
class PotentialCurve:
    """Born-Oppenheimer curve V(R), R in bohr, V in GHz relative to its asymptote.

    Model curves are generalized Lennard-Jones wells

        V = D [ n/(p-n) (Re/R)^p - p/(p-n) (Re/R)^n ]

    with ``n = 6`` (ground-like, -C6/R^6 tail) or ``n = 3`` (excited-like,
    -C3/R^3 tail) and wall stiffness ``p``.  The long-range coefficient is
    fixed by the other three parameters.
    """

    kind: str
    depth_ghz: float = 0.0
    r_eq_bohr: float = 0.0
    stiffness: float = 12.0
    # harmonic: force constant in GHz/bohr^2; morse: range parameter in 1/bohr
    shape: float = 0.0
    table_r: tuple = field(default=(), repr=False)
    table_v: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS + TEST_KINDS + ("tabulated",):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind in MODEL_KINDS:
            if self.depth_ghz <= 0 or self.r_eq_bohr <= 0:
                raise ValueError("model curves need positive depth and equilibrium radius")
            if self.stiffness <= self.power:
                raise ValueError("wall stiffness must exceed the long-range power")

    @property
    def power(self) -> int:
        return 3 if self.kind == "model-excited" else 6

    @property
    def c_long(self) -> float:
        """C6 (GHz bohr^6) or C3 (GHz bohr^3) of a model curve."""
        p, n = self.stiffness, self.power
        return self.depth_ghz * p / (p - n) * self.r_eq_bohr**n

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        kind = self.kind
        if kind in MODEL_KINDS:
            p, n, d = self.stiffness, self.power, self.depth_ghz
            x = self.r_eq_bohr / r
            return d * (n / (p - n) * x**p - p / (p - n) * x**n)
        if kind == "harmonic":
            return 0.5 * self.shape * (r - self.r_eq_bohr) ** 2
        if kind == "morse":
            e = np.exp(-self.shape * (r - self.r_eq_bohr))
            return self.depth_ghz * ((1 - e) ** 2 - 1)
        if kind == "flat":
            return np.zeros_like(r)
        return self._tabulated(r)

    def _tabulated(self, r):
        rt = np.asarray(self.table_r)
        vt = np.asarray(self.table_v)
        spline = _table_spline(self.table_r, self.table_v)
        out = np.empty_like(r)
        inner = r < rt[0]
        outer = r > rt[-1]
        mid = ~(inner | outer)
        out[mid] = spline(r[mid])
        slope = spline(rt[0], 1)
        out[inner] = vt[0] + slope * (r[inner] - rt[0])
        out[outer] = vt[-1] * (rt[-1] / r[outer]) ** 6
        return out

    def mapping_profile(self, r) -> np.ndarray:
        """Smooth lower envelope of V (GHz) that sets the local grid density.

        Built from the well depth and the long-range tail only, so that the
        grid mapping is analytic even where V has a kink or a sharp wall.
        """
        r = np.asarray(r, dtype=float)
        if self.kind == "harmonic":
            return np.zeros_like(r)
        if self.kind == "flat":
            return np.zeros_like(r)
        if self.kind == "morse":
            d = 1.1 * self.depth_ghz
            return -d / np.sqrt(1.0 + np.exp(2 * self.shape * (r - self.r_eq_bohr - 1.0 / self.shape)))
        depth, c_long, n = self._envelope_params()
        d = 1.1 * depth
        rs = (c_long / d) ** (1.0 / n)
        return -d / np.sqrt(1.0 + (r / rs) ** (2 * n))

    def _envelope_params(self):
        if self.kind in MODEL_KINDS:
            return self.depth_ghz, self.c_long, self.power
        rt = np.asarray(self.table_r)
        vt = np.asarray(self.table_v)
        depth = max(-vt.min(), 1e-9)
        c6 = max(-vt[-1] * rt[-1] ** 6, depth * rt[np.argmin(vt)] ** 6)
        return depth, c6, 6

    def wall_radius(self, height_ghz: float) -> float:
        """Innermost R where V falls to ``height_ghz`` (on the repulsive wall)."""
        if self.kind in ("harmonic", "flat"):
            raise ValueError(f"{self.kind} curve has no repulsive wall")
        if self.kind == "tabulated":
            rt = np.asarray(self.table_r)
            lo, hi = rt[0] * 0.5, rt[np.argmin(self.table_v)]
        else:
            hi = self.r_eq_bohr
            lo = hi * 0.05
        if self(lo) < height_ghz:
            return lo
        return optimize.brentq(lambda x: self(x) - height_ghz, lo, hi, xtol=1e-10)


_SPLINES: dict = {}


def _table_spline(rt, vt):
    key = (rt, vt)
    if key not in _SPLINES:
        _SPLINES[key] = CubicSpline(np.asarray(rt), np.asarray(vt))
    return _SPLINES[key]


def model_ground(depth_ghz, r_eq_bohr, stiffness=12.0) -> PotentialCurve:
    return PotentialCurve("model-ground", depth_ghz, r_eq_bohr, stiffness)


def model_excited(depth_ghz, r_eq_bohr, stiffness=12.0) -> PotentialCurve:
    return PotentialCurve("model-excited", depth_ghz, r_eq_bohr, stiffness)


def harmonic_curve(force_ghz_bohr2, r0_bohr) -> PotentialCurve:
    return PotentialCurve("harmonic", r_eq_bohr=r0_bohr, shape=force_ghz_bohr2)


def morse_curve(depth_ghz, r_eq_bohr, a_inv_bohr) -> PotentialCurve:
    return PotentialCurve("morse", depth_ghz=depth_ghz, r_eq_bohr=r_eq_bohr, shape=a_inv_bohr)


def flat_curve() -> PotentialCurve:
    return PotentialCurve("flat")


def load_tabulated(path) -> PotentialCurve:
    """Read a two-column ``R_bohr V_GHz`` table; '#' starts a comment.

    R must be strictly increasing and the curve must approach its asymptote
    (zero) from below at the outer end.
    """
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
        rows.append((float(parts[0]), float(parts[1])))
    if len(rows) < 4:
        raise ValueError(f"{path}: need at least 4 samples")
    r, v = np.array(rows).T
    if np.any(np.diff(r) <= 0):
        bad = int(np.argmax(np.diff(r) <= 0)) + 1
        raise ValueError(f"{path}: R must be strictly increasing (row {bad + 1}: {r[bad]} after {r[bad - 1]})")
    if r[0] <= 0:
        raise ValueError(f"{path}: R must be positive")
    if v[-1] > 0 or v[-2] > v[-1]:
        raise ValueError(f"{path}: curve must approach its asymptote (0) from below at large R")
    if abs(v[-1]) > 1e-2 * max(abs(v.min()), 1e-12):
        raise ValueError(f"{path}: last sample {v[-1]} GHz is not close to the asymptote")
    return PotentialCurve("tabulated", table_r=tuple(r), table_v=tuple(v))


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Sine-DVR grid in a mapped coordinate x with R = R(x), dR/dx = jac.

    Vectors on this grid hold psi(R_i) * sqrt(jac_i * dx), so the
    quadrature of a product is a plain dot product.
    """

    r: np.ndarray
    jac: np.ndarray
    jac_ends: tuple
    dx: float
    mass_amu: float
    beta: float
    r_min: float
    r_max: float

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def weights(self) -> np.ndarray:
        return self.jac * self.dx

    def spacing_ok(self, e_max_mhz: float, profile=None) -> bool:
        """Check that local spacing gives >= beta points per half wavelength."""
        if profile is None:
            return True
        k = _local_k(profile(self.r), e_max_mhz * 1e-3, self.mass_amu)
        return bool(np.all(self.jac * self.dx <= np.pi / (self.beta * k) * (1 + 1e-9)))

    def kinetic(self) -> np.ndarray:
        return _kinetic_matrix(self)

    def refined(self, factor: float = 2.0) -> "RadialGrid":
        """Same mapping with ``factor`` times more points."""
        n = int(round((self.n + 1) * factor)) - 1
        return _build_grid(self._rho, self.r_min, self.r_max, self.mass_amu, self.beta * factor, n=n)

    def x_of_r(self, r) -> np.ndarray:
        """Mapped coordinate x(R) = int_{r_min}^R rho, in units where x_i = i dx."""
        r = np.clip(np.asarray(r, dtype=float), self.r_min, self.r_max)
        rf, xf = self._table
        k = np.clip(np.searchsorted(rf, r) - 1, 0, len(rf) - 2)
        gx, gw = np.polynomial.legendre.leggauss(12)
        mid, half = 0.5 * (rf[k] + r), 0.5 * (r - rf[k])
        seg = (self._rho(mid[..., None] + half[..., None] * gx) * gw).sum(axis=-1) * half
        return xf[k] + seg

    def basis_values(self, r) -> np.ndarray:
        """Matrix B with psi(r) = B @ vec for a vector stored on this grid.

        Uses the sine-DVR interpolant in x, so it is exact for any function
        the grid represents; zero outside [r_min, r_max].
        """
        r = np.asarray(r, dtype=float)
        n = self.n
        length = self.dx * (n + 1)
        k = np.arange(1, n + 1)
        s = np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(k, k) / (n + 1))
        x = self.x_of_r(r)
        phi = np.sqrt(2.0 / length) * np.sin(np.pi * np.outer(x, k) / length)
        b = (np.sqrt(self._rho(np.clip(r, self.r_min, self.r_max)))[:, None] * phi) @ s
        b[(r < self.r_min) | (r > self.r_max)] = 0.0
        return b

    # set by the builder; kept out of the dataclass fields to stay hashable
    _rho = None
    _table = None


def _local_k(v_ghz, e_ghz, mass_amu):
    # local wavenumber (1/bohr) for kinetic energy e - v
    kin = units.ghz_to_hartree(e_ghz - v_ghz)
    return np.sqrt(2.0 * units.amu_to_me(mass_amu) * np.maximum(kin, 0.0))


def _build_grid(rho, r_min, r_max, mass_amu, beta, n=None, n_fine=100001) -> RadialGrid:
    rf = np.linspace(r_min, r_max, n_fine)
    xf = cumulative_simpson(rho(rf), x=rf, initial=0.0)
    total = xf[-1]
    if n is None:
        n = int(np.ceil(total))
    dx = total / (n + 1)
    xi = dx * np.arange(1, n + 1)
    ri = np.interp(xi, xf, rf)
    k = np.clip(np.searchsorted(xf, xi) - 1, 0, n_fine - 2)
    gx, gw = np.polynomial.legendre.leggauss(12)
    for _ in range(4):
        a, b = rf[k], ri
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        seg = (rho(mid[:, None] + half[:, None] * gx[None, :]) * gw).sum(axis=1) * half
        ri = ri - (xf[k] + seg - xi) / rho(ri)
    grid = RadialGrid(
        r=ri,
        jac=1.0 / rho(ri),
        jac_ends=tuple(1.0 / rho(np.array([r_min, r_max]))),
        dx=dx,
        mass_amu=mass_amu,
        beta=beta,
        r_min=r_min,
        r_max=r_max,
    )
    object.__setattr__(grid, "_rho", rho)
    object.__setattr__(grid, "_table", (rf, xf))
    return grid


def mapped_grid(curves, mass_amu, r_max=1000.0, e_max_mhz=2000.0, beta=3.0, r_min=None, wall_factor=2.0) -> RadialGrid:
    """Mapped grid whose density follows the local de Broglie wavelength.

    The density is beta/pi times the local wavenumber at kinetic energy
    ``e_max_mhz`` above a smooth envelope of all ``curves``, so every curve
    is sampled with at least ``beta`` points per half wavelength up to that
    energy.  ``r_min`` defaults to the radius where the innermost wall
    reaches ``wall_factor`` times the largest well depth.
    """
    if isinstance(curves, PotentialCurve):
        curves = [curves]
    if beta < 2:
        raise ValueError("beta must be >= 2")
    if r_min is None:
        depth = max(c._envelope_params()[0] if c.kind not in TEST_KINDS else c.depth_ghz for c in curves)
        r_min = min(c.wall_radius(wall_factor * depth) for c in curves)
    profile = _combined_profile(curves)
    e_ghz = e_max_mhz * 1e-3
    m = units.amu_to_me(mass_amu)

    def rho(r):
        kin = units.ghz_to_hartree(e_ghz - profile(r))
        return beta / np.pi * np.sqrt(2.0 * m * kin)

    return _build_grid(rho, r_min, r_max, mass_amu, beta)


def _combined_profile(curves):
    profiles = [c.mapping_profile for c in curves]
    if len(profiles) == 1:
        return profiles[0]

    def profile(r):
        # smooth maximum of the envelope depths; avoids kinks where curves cross
        s = sum(np.abs(p(r)) ** 4 for p in profiles)
        return -(s**0.25)

    return profile


def uniform_grid(r_min, r_max, n, mass_amu) -> RadialGrid:
    """Evenly spaced sine-DVR grid with hard walls at r_min and r_max."""
    density = (n + 1) / (r_max - r_min)
    return _build_grid(lambda r: np.full_like(np.asarray(r, dtype=float), density), r_min, r_max, mass_amu, 2.0, n=n, n_fine=5)


_KINETIC_CACHE: dict = {}


def _kinetic_matrix(grid: RadialGrid) -> np.ndarray:
    key = id(grid)
    hit = _KINETIC_CACHE.get(key)
    if hit is not None and hit[0] is grid:
        return hit[1]
    n, dx = grid.n, grid.dx
    length = dx * (n + 1)
    kk = np.arange(1, n + 1)
    i_in = np.arange(1, n + 1)
    i_ext = np.arange(0, n + 2)
    sine = np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(i_in, kk) / (n + 1))
    # derivative of the sine interpolant, evaluated on the grid plus both walls
    dcos = np.sqrt(2.0 / length) * np.cos(np.pi * np.outer(i_ext, kk) / (n + 1)) * (kk * np.pi / length)
    g = (dcos @ sine.T) * (grid.jac ** -0.5)[None, :]
    w = np.full(n + 2, dx)
    w[0] = w[-1] = 0.5 * dx
    jac_all = np.concatenate(([grid.jac_ends[0]], grid.jac, [grid.jac_ends[1]]))
    m = units.amu_to_me(grid.mass_amu)
    t = (g.T * (w / jac_all)) @ g / (2.0 * m)
    t = 0.5 * (t + t.T)
    if len(_KINETIC_CACHE) > 16:
        _KINETIC_CACHE.clear()
    _KINETIC_CACHE[key] = (grid, t)
    return t


# ---------------------------------------------------------------------------
# channel solutions


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Eigenstates of one (manifold, J, Omega) channel on a shared grid."""

    manifold: str
    J: int
    Omega: int
    energies_mhz: np.ndarray
    vectors: np.ndarray
    grid: RadialGrid
    curve: PotentialCurve | None = None

    def __post_init__(self):
        self.energies_mhz.setflags(write=False)
        self.vectors.setflags(write=False)

    @property
    def n_bound(self) -> int:
        return int(np.sum(self.energies_mhz < 0))

    @property
    def bound_indices(self) -> np.ndarray:
        return np.flatnonzero(self.energies_mhz < 0)

    @property
    def continuum_indices(self) -> np.ndarray:
        return np.flatnonzero(self.energies_mhz >= 0)

    @property
    def r2(self) -> np.ndarray:
        """<R^2> per level in bohr^2."""
        return (self.vectors**2 * (self.grid.r**2)[:, None]).sum(axis=0)

    @property
    def bv_mhz(self) -> np.ndarray:
        return units.centrifugal_unit_mhz(self.grid.mass_amu) / self.r2

    def wavefunction(self, level: int) -> np.ndarray:
        """psi(R) on the grid points, normalized so that int psi^2 dR = 1."""
        return self.vectors[:, level] / np.sqrt(self.grid.weights)

    def level_from_top(self, k: int) -> int:
        """Index of the k-th bound level counted down from threshold (0 = last)."""
        nb = self.n_bound
        if k >= nb:
            raise IndexError(f"channel has only {nb} bound levels")
        return nb - 1 - k


def effective_potential(curve: PotentialCurve, J: int, Omega: int, grid) -> np.ndarray:
    """V(R) + hbar^2 (J(J+1) - Omega^2) / (2 m R^2), in GHz on the grid points."""
    if abs(Omega) > J:
        raise ValueError(f"|Omega| must not exceed J (J={J}, Omega={Omega})")
    if J < 0:
        raise ValueError("J must be non-negative")
    r = grid.r if isinstance(grid, RadialGrid) else np.asarray(grid, dtype=float)
    mass = grid.mass_amu if isinstance(grid, RadialGrid) else None
    v = curve(r)
    rot = J * (J + 1) - Omega**2
    if rot:
        if mass is None:
            raise ValueError("a RadialGrid is needed to know the reduced mass")
        v = v + rot * units.centrifugal_unit_mhz(mass) * 1e-3 / r**2
    return v


def _diagonalize(curve, J, Omega, grid, e_cap_mhz):
    v_h = units.ghz_to_hartree(effective_potential(curve, J, Omega, grid))
    h = grid.kinetic() + np.diag(v_h)
    cap = units.mhz_to_hartree(e_cap_mhz)
    e, vec = linalg.eigh(h, subset_by_value=(-np.inf, cap), driver="evr")
    # fixed sign convention: positive outermost lobe
    r = grid.r
    for k in range(vec.shape[1]):
        w = np.abs(vec[:, k])
        i = np.flatnonzero(w > 1e-3 * w.max())[-1]
        if vec[i, k] < 0:
            vec[:, k] *= -1
    return units.hartree_to_mhz(e), vec


def solve_channel(
    curve: PotentialCurve,
    J: int,
    Omega: int,
    grid: RadialGrid,
    *,
    manifold: str = "",
    e_cap_mhz: float = 0.0,
    check_convergence: bool = True,
    tol_mhz: float = 1e-3,
    max_levels_checked: int | None = None,
    check_indices=None,
) -> RadialSolution:
    """Diagonalize T + V_eff on ``grid``.

    Returns every level with energy below ``e_cap_mhz``: all bound levels plus
    the box-discretized continuum up to the cap.  With ``check_convergence``
    the bound spectrum is recomputed on a grid with twice the density and a
    :class:`ConvergenceError` is raised if any level moves by more than
    ``tol_mhz``.  ``max_levels_checked`` restricts the check to the highest
    levels, ``check_indices`` to an explicit set (levels near threshold of a
    long-range tail depend on the box and may be excluded this way).
    """
    if abs(Omega) > J:
        raise ValueError(f"|Omega| must not exceed J (J={J}, Omega={Omega})")
    e, vec = _diagonalize(curve, J, Omega, grid, e_cap_mhz)
    if check_convergence:
        fine = grid.refined(2.0)
        e2, _ = _diagonalize(curve, J, Omega, fine, 0.0)
        nb = int(np.sum(e < 0))
        if len(e2) != nb:
            raise ConvergenceError(
                f"bound level count changed from {nb} to {len(e2)} on grid doubling "
                f"(channel {manifold or curve.kind} J={J} Omega={Omega}); increase beta"
            )
        if check_indices is not None:
            idx = np.asarray(check_indices, dtype=int)
            idx = idx[idx < nb]
        elif max_levels_checked is not None:
            idx = slice(-max_levels_checked, None)
        else:
            idx = slice(None)
        diff = np.abs(e[:nb][idx] - e2[idx])
        shift = diff.max() if diff.size else 0.0
        if shift > tol_mhz:
            raise ConvergenceError(
                f"grid doubling shifted a bound level by {shift:.3g} MHz > {tol_mhz} MHz "
                f"(channel {manifold or curve.kind} J={J} Omega={Omega}); increase beta or r_max"
            )
    return RadialSolution(manifold or curve.kind, int(J), int(Omega), e, vec, grid, curve)


def _same_grid(ga, gb) -> bool:
    return ga is gb or (ga.n == gb.n and np.array_equal(ga.r, gb.r) and np.array_equal(ga.jac, gb.jac))


_OVERLAP_CACHE: dict = {}


def overlap_matrix(ga: RadialGrid, gb: RadialGrid, order: int = 8) -> np.ndarray:
    """O with <psi_a|psi_b> = va @ O @ vb for vectors stored on two grids.

    Composite Gauss-Legendre quadrature over the common R range, with break
    points at the nodes of both grids and exact sine-DVR interpolants.
    """
    key = (id(ga), id(gb))
    hit = _OVERLAP_CACHE.get(key)
    if hit is not None and hit[0] is ga and hit[1] is gb:
        return hit[2]
    lo, hi = max(ga.r_min, gb.r_min), min(ga.r_max, gb.r_max)
    if hi <= lo:
        out = np.zeros((ga.n, gb.n))
    else:
        pts = np.concatenate(([lo, hi], ga.r, gb.r))
        pts = np.unique(pts[(pts >= lo) & (pts <= hi)])
        gx, gw = np.polynomial.legendre.leggauss(order)
        mid, half = 0.5 * (pts[1:] + pts[:-1]), 0.5 * (pts[1:] - pts[:-1])
        r = (mid[:, None] + half[:, None] * gx).ravel()
        w = (half[:, None] * gw).ravel()
        out = ga.basis_values(r).T @ (w[:, None] * gb.basis_values(r))
    if len(_OVERLAP_CACHE) > 16:
        _OVERLAP_CACHE.clear()
    _OVERLAP_CACHE[key] = (ga, gb, out)
    return out


def franck_condon(sol_a: RadialSolution, level_a: int, sol_b: RadialSolution, level_b: int, mu0: float = 1.0) -> float:
    """mu0 * <psi_a | psi_b> with a constant transition dipole.

    On a shared grid this is the DVR dot product; across grids both
    wavefunctions are evaluated exactly from their sine-DVR expansions and
    integrated over the common range (outside its grid a wavefunction is 0).
    """
    va, vb = sol_a.vectors[:, level_a], sol_b.vectors[:, level_b]
    if _same_grid(sol_a.grid, sol_b.grid):
        return mu0 * float(va @ vb)
    return mu0 * float(va @ overlap_matrix(sol_a.grid, sol_b.grid) @ vb)


def rotational_constant(sol: RadialSolution, level: int) -> float:
    """B_v = hbar^2 / (2 m <R^2>) in MHz."""
    if sol.energies_mhz[level] >= 0:
        raise ValueError(f"level {level} is not bound (E = {sol.energies_mhz[level]:.4g} MHz)")
    return float(sol.bv_mhz[level])


def outer_turning_point(curve: PotentialCurve, energy_mhz: float, J=0, Omega=0, mass_amu=units.RB87_REDUCED_MASS_AMU, r_hi=5000.0) -> float:
    """Largest R where V_eff(R) equals the level energy."""
    e = energy_mhz * 1e-3
    cu = units.centrifugal_unit_mhz(mass_amu) * 1e-3 * (J * (J + 1) - Omega**2)

    def f(r):
        return curve(r) + cu / r**2 - e

    rs = np.geomspace(1.0, r_hi, 20000)
    fv = f(rs)
    idx = np.flatnonzero((fv[:-1] < 0) & (fv[1:] >= 0))
    if not len(idx):
        raise ValueError("no outer turning point below r_hi")
    i = idx[-1]
    return optimize.brentq(f, rs[i], rs[i + 1], xtol=1e-10)


# ---------------------------------------------------------------------------
# calibration


def _level_props(curve, mass_amu, r_max, beta, level, from_top):
    grid = mapped_grid(curve, mass_amu, r_max=r_max, e_max_mhz=10.0, beta=beta)
    e, vec = _diagonalize(curve, 0, 0, grid, 0.0)
    if from_top:
        idx = len(e) - 1 - level
    else:
        idx = level
    if idx < 0 or idx >= len(e):
        return None
    r2 = float((vec[:, idx] ** 2 * grid.r**2).sum())
    return -e[idx], units.centrifugal_unit_mhz(grid.mass_amu) / r2


def calibrate_model_potential(
    binding_mhz: float,
    bv_mhz: float,
    *,
    initial: PotentialCurve,
    level: int = 1,
    from_top: bool = True,
    mass_amu: float = units.RB87_REDUCED_MASS_AMU,
    binding_tol_mhz: float = 1e-3,
    bv_tol_mhz: float = 1e-4,
    grid_r_max: float = 600.0,
    beta: float = 3.0,
) -> PotentialCurve:
    """Adjust well depth and wall position so one level hits two targets.

    The designated level is ``level`` counted down from threshold when
    ``from_top`` (so ``level=1`` is the next-to-last bound level), otherwise
    counted up from the bottom.  The long-range coefficient is free to move
    with the depth.

    Raises
    ------
    CalibrationError
        For an infeasible target pair or when the root search fails.
    """
    if initial.kind not in MODEL_KINDS:
        raise CalibrationError("only model curves can be calibrated")
    if binding_mhz <= 0 or bv_mhz <= 0:
        raise CalibrationError("binding energy and rotational constant must be positive")
    # <R^2> of a level cannot be smaller than the square of the inner wall radius
    r_wall = initial.wall_radius(initial.depth_ghz)
    bv_max = units.centrifugal_unit_mhz(mass_amu) / r_wall**2
    if bv_mhz >= bv_max:
        raise CalibrationError(
            f"B_v = {bv_mhz} MHz exceeds the rigid-rotor bound {bv_max:.4g} MHz at the potential wall"
        )
    def residual(params):
        curve = replace(initial, depth_ghz=initial.depth_ghz * np.exp(params[0]), r_eq_bohr=initial.r_eq_bohr * np.exp(params[1]))
        props = _level_props(curve, mass_amu, grid_r_max, beta, level, from_top)
        if props is None or props[0] <= 0:
            return np.array([10.0, 10.0])
        return np.array([np.log(props[0] / binding_mhz), np.log(props[1] / bv_mhz)])

    res0 = residual(np.zeros(2))
    if abs(res0[0]) * binding_mhz < binding_tol_mhz and abs(res0[1]) * bv_mhz < bv_tol_mhz:
        return initial
    sol = optimize.root(residual, np.zeros(2), method="hybr", options={"xtol": 1e-13})
    final = replace(initial, depth_ghz=initial.depth_ghz * np.exp(sol.x[0]), r_eq_bohr=initial.r_eq_bohr * np.exp(sol.x[1]))
    props = _level_props(final, mass_amu, grid_r_max, beta, level, from_top)
    if props is None or abs(props[0] - binding_mhz) > binding_tol_mhz or abs(props[1] - bv_mhz) > bv_tol_mhz:
        got = "no such level" if props is None else f"binding {props[0]:.6g} MHz, B_v {props[1]:.6g} MHz"
        raise CalibrationError(
            f"calibration did not converge for binding {binding_mhz} MHz, B_v {bv_mhz} MHz ({got}): {sol.message}"
        )
    return final
