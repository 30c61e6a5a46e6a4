"""Angular-momentum algebra on the Hund's case (c) basis |J M Omega>.

The Wigner 3-j symbols are evaluated with the Racah sum in exact rational
arithmetic, so the only rounding happens in the final square root.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

__all__ = [
    "AngularState",
    "wigner3j",
    "dipole_rotational_factor",
    "cos2theta_element",
    "rotational_matrix_element",
    "MAX_J",
]

#: Largest angular momentum the 3-j evaluator accepts.
MAX_J = 40


@dataclass(frozen=True, order=True)
class AngularState:
    """Rotational state |J M Omega> with integer quantum numbers."""

    J: int
    M: int
    Omega: int = 0

    def __post_init__(self):
        for name in ("J", "M", "Omega"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"{name} must be an integer, got {getattr(self, name)!r}")
        if self.J < 0:
            raise ValueError(f"J must be non-negative, got {self.J}")
        if abs(self.M) > self.J:
            raise ValueError(f"|M| <= J violated: J={self.J}, M={self.M}")
        if abs(self.Omega) > self.J:
            raise ValueError(f"|Omega| <= J violated: J={self.J}, Omega={self.Omega}")


def _check_args(js, ms):
    for j, m in zip(js, ms):
        if int(j) != j or int(m) != m:
            raise ValueError("only integer angular momenta are supported")
        if j < 0:
            raise ValueError(f"negative angular momentum j={j}")
        if abs(m) > j:
            raise ValueError(f"|m| > j for j={j}, m={m}")
        if j > MAX_J:
            raise ValueError(f"j={j} exceeds the supported range j <= {MAX_J}")


@lru_cache(maxsize=65536)
def _wigner3j_exact(j1, j2, j3, m1, m2, m3):
    # Returns (sign, value squared) as an exact Fraction.
    delta = Fraction(
        factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3),
        factorial(j1 + j2 + j3 + 1),
    )
    prod = (
        factorial(j1 + m1) * factorial(j1 - m1)
        * factorial(j2 + m2) * factorial(j2 - m2)
        * factorial(j3 + m3) * factorial(j3 - m3)
    )
    kmin = max(0, j2 - j3 - m1, j1 - j3 + m2)
    kmax = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            factorial(k)
            * factorial(j3 - j2 + k + m1)
            * factorial(j3 - j1 + k - m2)
            * factorial(j1 + j2 - j3 - k)
            * factorial(j1 - k - m1)
            * factorial(j2 - k + m2)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    sign = 1 if total > 0 else -1
    if (j1 - j2 - m3) % 2:
        sign = -sign
    return sign, delta * prod * total * total


def wigner3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    """Wigner 3-j symbol (j1 j2 j3; m1 m2 m3) for integer arguments.

    Raises
    ------
    ValueError
        For negative j, |m| > j, non-integer arguments or j above ``MAX_J``.
    """
    _check_args((j1, j2, j3), (m1, m2, m3))
    if m1 + m2 + m3 != 0:
        return 0.0
    if j3 > j1 + j2 or j3 < abs(j1 - j2):
        return 0.0
    sign, sq = _wigner3j_exact(int(j1), int(j2), int(j3), int(m1), int(m2), int(m3))
    if sign == 0:
        return 0.0
    return sign * sqrt(sq)


def rotational_matrix_element(bra: AngularState, rank: int, q: int, s: int, ket: AngularState) -> float:
    """<J'M'W'| D^rank_{q s}(rotation)^* |J M W> for symmetric-top functions.

    Standard result ``(-1)^(M'-W') sqrt((2J+1)(2J'+1))
    (J' k J; -M' q M)(J' k J; -W' s W)``.
    """
    if bra.M != ket.M + q or bra.Omega != ket.Omega + s:
        return 0.0
    a = wigner3j(bra.J, rank, ket.J, -bra.M, q, ket.M)
    if a == 0.0:
        return 0.0
    b = wigner3j(bra.J, rank, ket.J, -bra.Omega, s, ket.Omega)
    phase = -1.0 if (bra.M - bra.Omega) % 2 else 1.0
    return phase * sqrt((2 * ket.J + 1) * (2 * bra.J + 1)) * a * b


def dipole_rotational_factor(upper: AngularState, lower: AngularState, q: int) -> float:
    """Rotational part of <upper| mu . Z |lower> for lab-Z polarization.

    ``q`` is the body-frame spherical component, so the factor vanishes
    unless ``upper.Omega == lower.Omega + q`` and ``upper.M == lower.M``.
    The radial Franck-Condon factor multiplies this value.
    """
    if q not in (-1, 0, 1):
        raise ValueError(f"q must be -1, 0 or +1, got {q}")
    if upper.M != lower.M or abs(upper.J - lower.J) > 1:
        return 0.0
    return rotational_matrix_element(upper, 1, 0, q, lower)


def cos2theta_element(bra: AngularState, ket: AngularState) -> float:
    """<bra| cos^2(theta) |ket> using cos^2 = 1/3 + (2/3) D^2_00."""
    if bra.M != ket.M or bra.Omega != ket.Omega or abs(bra.J - ket.J) > 2:
        return 0.0
    value = (2.0 / 3.0) * rotational_matrix_element(bra, 2, 0, 0, ket)
    if bra.J == ket.J:
        value += 1.0 / 3.0
    return value
