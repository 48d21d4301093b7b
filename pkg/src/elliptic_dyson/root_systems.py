"""Affine root-system families, their theta-function bases and determinant factorizations.

Each family ``R`` comes with an integer ``cal_n`` (the multiplier of the nome),
a shift ``J(j)`` of the basis index, and the entire functions ``f_j(z; tau)``
whose ``N x N`` determinant factorizes into the Macdonald denominator.
Basis labels ``j`` follow the mathematical convention (``j = 1..N`` for the
determinant) while particle positions are indexed from zero.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable

import numpy as np

from .special_fn import _as_tau, log_dedekind_eta, theta, theta_scaled

__all__ = [
    "FamilyTag",
    "Family",
    "Config",
    "KFactors",
    "basis_f",
    "basis_f_normalized",
    "row_log_scale",
    "k_factors",
    "macdonald_det",
    "factorized_det",
    "log_c0",
    "random_config",
]


class FamilyTag(str, Enum):
    A = "A"
    B = "B"
    BVEE = "Bvee"
    C = "C"
    CVEE = "Cvee"
    BC = "BC"
    D = "D"

    @classmethod
    def parse(cls, text) -> "FamilyTag":
        if isinstance(text, cls):
            return text
        for tag in cls:
            if tag.value.lower() == str(text).strip().lower():
                return tag
        raise ValueError(f"unknown family {text!r}; expected one of {[t.value for t in cls]}")


# family -> (alpha shift inside theta1, sign of the reflected term); None for A
_BASIS_SHAPE = {
    FamilyTag.B: (0.0, -1.0),
    FamilyTag.BVEE: (0.0, -1.0),
    FamilyTag.C: (0.5, -1.0),
    FamilyTag.CVEE: (0.5, -1.0),
    FamilyTag.BC: (0.5, -1.0),
    FamilyTag.D: (0.5, 1.0),
}

# (c1, c2) in theta1(c1 x / 2 pi r; c2 tau) for the single-particle factor
_C12 = {
    FamilyTag.B: (Fraction(1), Fraction(1)),
    FamilyTag.BVEE: (Fraction(2), Fraction(2)),
    FamilyTag.C: (Fraction(2), Fraction(1)),
    FamilyTag.CVEE: (Fraction(1), Fraction(1, 2)),
}


@dataclass(frozen=True)
class Family:
    """A family tag together with the particle number ``n``."""

    tag: FamilyTag
    n: int

    def __post_init__(self):
        object.__setattr__(self, "tag", FamilyTag.parse(self.tag))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"particle number must be a positive integer, got {self.n}")
        if self.tag is FamilyTag.D and self.n < 2:
            raise ValueError("family D needs at least two particles")
        object.__setattr__(self, "n", int(self.n))

    @property
    def cal_n(self) -> int:
        n = self.n
        return {
            FamilyTag.A: n,
            FamilyTag.B: 2 * n - 1,
            FamilyTag.BVEE: 2 * n,
            FamilyTag.C: 2 * (n + 1),
            FamilyTag.CVEE: 2 * n,
            FamilyTag.BC: 2 * n + 1,
            FamilyTag.D: 2 * (n - 1),
        }[self.tag]

    def j_shift(self, j: int) -> Fraction:
        """``J(j)`` as an exact rational."""
        if self.tag in (FamilyTag.A, FamilyTag.B, FamilyTag.BVEE, FamilyTag.D):
            return Fraction(j - 1)
        if self.tag in (FamilyTag.C, FamilyTag.BC):
            return Fraction(j)
        return Fraction(2 * j - 1, 2)

    @property
    def c12(self):
        return _C12.get(self.tag)

    def kappa(self, r: float = 1.0) -> float:
        """Centre-of-mass offset used by type A."""
        n = self.n
        return math.pi * r * (n - 1 if n % 2 == 0 else n - 2)

    def on_circle(self) -> bool:
        return self.tag is FamilyTag.A

    def pin_targets(self, r: float = 1.0) -> np.ndarray:
        """Positions approached as ``t -> t_star``."""
        n = self.n
        j = np.arange(1, n + 1)
        if self.tag is FamilyTag.A:
            if n % 2 == 0:
                return math.pi * r * (2 * j - 1) / n
            return 2 * math.pi * r * (j - 1) / n
        if self.tag is FamilyTag.B:
            return (2 * j - 1) * math.pi * r / (2 * n - 1)
        if self.tag is FamilyTag.C:
            return j * math.pi * r / (n + 1)
        if self.tag is FamilyTag.D:
            return (j - 1) * math.pi * r / (n - 1)
        raise ValueError(f"no pinning targets recorded for family {self.tag.value}")

    @property
    def default_bc(self) -> str | None:
        """Boundary conditions (at 0, at pi r) of the companion Brownian motions."""
        return {FamilyTag.B: "ar", FamilyTag.C: "aa", FamilyTag.D: "rr"}.get(self.tag)


@dataclass(frozen=True)
class Config:
    """Strictly ordered particle positions; interval families live in ``(0, pi r)``."""

    family: Family
    u: tuple
    r: float = 1.0

    def __post_init__(self):
        u = tuple(float(x) for x in self.u)
        if len(u) != self.family.n:
            raise ValueError(f"expected {self.family.n} positions, got {len(u)}")
        if not all(math.isfinite(x) for x in u):
            raise ValueError("positions must be finite")
        if any(b <= a for a, b in zip(u, u[1:])):
            raise ValueError("positions must be strictly increasing")
        if not self.family.on_circle() and not (u[0] > 0.0 and u[-1] < math.pi * self.r):
            raise ValueError("positions must lie strictly inside (0, pi r)")
        object.__setattr__(self, "u", u)

    def as_array(self) -> np.ndarray:
        return np.array(self.u)


def _family(fam, n=None) -> Family:
    if isinstance(fam, Family):
        return fam
    if n is None:
        raise ValueError("particle number required when passing a bare tag")
    return Family(FamilyTag.parse(fam), n)


def _theta1_pair(fam: Family, j: int, z, tau: complex, r: float):
    """Mantissas and log scales of the two theta1 terms of ``f_j``."""
    cal_n = fam.cal_n
    jj = float(fam.j_shift(j))
    big = cal_n * tau
    lin = cal_n * z / (2.0 * math.pi * r)
    if fam.tag is FamilyTag.A:
        alpha = (1 - (-1) ** fam.n) / 4.0
        m1, l1 = theta_scaled(1, jj * tau + lin + alpha, big)
        return jj, (m1, l1), None, None
    alpha, sign = _BASIS_SHAPE[fam.tag]
    m1, l1 = theta_scaled(1, jj * tau + lin + alpha, big)
    m2, l2 = theta_scaled(1, jj * tau - lin + alpha, big)
    return jj, (m1, l1), (m2, l2), sign


def row_log_scale(fam, j: int, tau, r: float = 1.0) -> float:
    """Log of the largest series term of ``f_j`` on the real axis.

    Used to normalise rows of the interpolation matrix; independent of the
    real evaluation point.
    """
    fam = _family(fam)
    tau = _as_tau(tau)
    jj = float(fam.j_shift(j))
    big_im = fam.cal_n * tau.imag
    # exponent of the n-th term: -pi Im(cal_n tau)(n-1/2)^2 - pi (2n-1) J Im(tau)
    centre = 0.5 - jj * tau.imag / big_im
    best = -math.inf
    for n in (math.floor(centre), math.ceil(centre)):
        m = n - 0.5
        best = max(best, -math.pi * big_im * m * m - 2.0 * math.pi * m * jj * tau.imag)
    return best


def basis_f_normalized(fam, j: int, z, tau, r: float = 1.0):
    """``f_j(z; tau) * exp(-row_log_scale(j))``, vectorised over ``z``."""
    fam = _family(fam)
    tau = _as_tau(tau)
    z = np.asarray(z, dtype=complex)
    s = row_log_scale(fam, j, tau, r)
    jj, (m1, l1), second, sign = _theta1_pair(fam, j, z, tau, r)
    value = np.exp(1j * jj * z / r + l1 - s) * m1
    if second is not None:
        m2, l2 = second
        value = value + sign * np.exp(-1j * jj * z / r + l2 - s) * m2
    return value


def basis_f(fam, j: int, z, tau, r: float = 1.0):
    """Entire function ``f_j(z; tau)`` of the family (basis label ``j`` in Z)."""
    fam = _family(fam)
    tau_c = _as_tau(tau)
    out = basis_f_normalized(fam, j, z, tau_c, r) * math.exp(row_log_scale(fam, j, tau_c, r))
    return out[()] if np.ndim(z) == 0 else out


def _q0(tau: complex) -> complex:
    """``prod_n (1 - q^(2n))`` via the eta function."""
    return cmath.exp(log_dedekind_eta(tau) - 1j * math.pi * tau / 12.0)


@dataclass(frozen=True)
class KFactors:
    """The four factors of the determinant evaluation at fixed ``tau``."""

    family: Family
    tau: complex
    r: float
    k0: complex
    k_sym: Callable
    k1: Callable
    k2: Callable


def k_factors(fam, tau, r: float = 1.0) -> KFactors:
    """Constant, symmetric, one-body and two-body factors of ``det[f_j(u_k)]``."""
    fam = _family(fam)
    tau = _as_tau(tau)
    n = fam.n
    tag = fam.tag
    two_pi_r = 2.0 * math.pi * r

    def qpow(a):
        return cmath.exp(1j * math.pi * tau * a)

    q0 = _q0(tau)
    if tag is FamilyTag.A:
        k0 = (
            1j ** (-((n - 1) * (3 * n + 1 - (-1) ** n) // 2))
            * qpow(-(n - 1) * (3 * n - 2) / 8.0)
            * q0 ** (-((n - 1) * (n - 2)) / 2.0)
        )
    elif tag is FamilyTag.B:
        k0 = 2.0 * qpow(-n * (n - 1) / 4.0) * q0 ** (-n * (n - 1))
    elif tag is FamilyTag.BVEE:
        k0 = 2.0 * qpow(-n * (n - 1) / 4.0) * q0 ** (-((n - 1) ** 2)) * _q0(2 * tau) ** (-(n - 1))
    elif tag is FamilyTag.C:
        k0 = 1j ** (-n) * qpow(-n * n / 4.0) * q0 ** (-n * (n - 1))
    elif tag is FamilyTag.CVEE:
        k0 = (
            1j ** (-n)
            * qpow(-n * (2 * n - 1) / 8.0)
            * q0 ** (-((n - 1) ** 2))
            * _q0(tau / 2) ** (-(n - 1))
        )
    elif tag is FamilyTag.BC:
        k0 = 1j ** (-n) * qpow(-n * (n + 1) / 4.0) * q0 ** (-n * (n - 1)) * _q0(2 * tau) ** (-n)
    else:
        k0 = 4.0 * qpow(-n * (n - 1) / 4.0) * q0 ** (-n * (n - 2))

    if tag is FamilyTag.A:
        kappa = fam.kappa(r)

        def k_sym(u):
            u = np.asarray(u, dtype=complex)
            return theta(1, (u.sum(axis=-1) - kappa) / two_pi_r, tau)

    else:

        def k_sym(u):
            u = np.asarray(u, dtype=complex)
            return np.ones(u.shape[:-1], dtype=complex)[()]

    def k1(u):
        u = np.asarray(u, dtype=complex)
        if tag in (FamilyTag.A, FamilyTag.D):
            return np.ones(u.shape, dtype=complex)[()]
        if tag is FamilyTag.BC:
            return theta(1, u / two_pi_r, tau) * theta(0, u / (math.pi * r), 2 * tau)
        c1, c2 = fam.c12
        return theta(1, float(c1) * u / two_pi_r, float(c2) * tau)

    def k2(u, v):
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        out = theta(1, (u - v) / two_pi_r, tau)
        if tag is not FamilyTag.A:
            out = out * theta(1, (u + v) / two_pi_r, tau)
        return out

    return KFactors(fam, tau, r, complex(k0), k_sym, k1, k2)


def macdonald_det(fam, u, tau, r: float = 1.0) -> complex:
    """``det_{j,k}[f_j(u_k; tau)]`` by LU decomposition with partial pivoting."""
    fam = _family(fam)
    u = np.asarray(u.u if isinstance(u, Config) else u, dtype=complex)
    if u.shape != (fam.n,):
        raise ValueError(f"expected {fam.n} positions")
    mat = np.array([basis_f(fam, j, u, tau, r) for j in range(1, fam.n + 1)])
    return complex(np.linalg.det(mat))


def factorized_det(fam, u, tau, r: float = 1.0) -> complex:
    """Right-hand side of the product formula for :func:`macdonald_det`."""
    fam = _family(fam)
    u = np.asarray(u.u if isinstance(u, Config) else u, dtype=complex)
    k = k_factors(fam, tau, r)
    value = k.k0 * complex(k.k_sym(u)) * complex(np.prod(k.k1(u)))
    for a in range(fam.n):
        for b in range(a + 1, fam.n):
            value *= complex(k.k2(u[b], u[a]))
    return value


def log_c0(fam, tau) -> complex:
    """Logarithm of the eta-product prefactor ``c0(tau)`` of the martingale function."""
    fam = _family(fam)
    tau = _as_tau(tau)
    n = fam.n
    le = log_dedekind_eta(tau)
    tag = fam.tag
    if tag is FamilyTag.A:
        return -((n - 1) * (n - 2) / 2.0) * le
    if tag in (FamilyTag.B, FamilyTag.C):
        return -n * (n - 1) * le
    if tag is FamilyTag.BVEE:
        return -((n - 1) ** 2) * le - (n - 1) * log_dedekind_eta(2 * tau)
    if tag is FamilyTag.CVEE:
        return -((n - 1) ** 2) * le - (n - 1) * log_dedekind_eta(tau / 2)
    if tag is FamilyTag.BC:
        return -n * (n - 1) * le - n * log_dedekind_eta(2 * tau)
    return -n * (n - 2) * le


def random_config(fam, rng: np.random.Generator, r: float = 1.0, min_gap: float | None = None) -> Config:
    """Sorted uniform positions with a minimum spacing (also to the walls).

    Interval families draw from ``(0, pi r)``; type A draws from ``(0, 2 pi r)``.
    The default spacing is ``0.02 pi r``.
    """
    fam = _family(fam)
    if min_gap is None:
        min_gap = 0.02 * math.pi * r
    length = (2.0 if fam.on_circle() else 1.0) * math.pi * r
    slack = length - (fam.n + 1) * min_gap
    if slack <= 0:
        raise ValueError("minimum gap too large for the number of particles")
    # spacing trick: sorted uniforms on the reduced interval, then re-inflate
    base = np.sort(rng.uniform(0.0, slack, size=fam.n))
    u = base + min_gap * np.arange(1, fam.n + 1)
    return Config(fam, tuple(u), r)
