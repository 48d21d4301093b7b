"""Interpolation functions, the time-evolved basis and the determinantal martingale function.

For a configuration ``u`` and the nome ``tau0 = tau(0)`` the interpolation
functions ``Phi_j(z) = sum_k phi[j, k] f_k(z; tau0)`` satisfy
``Phi_j(u_m) = delta_{jm}``. Replacing each ``f_k`` by its heat-flow image
``f_hat_k(t, x) = exp(J_k^2 t / 2r^2) f_k(x; tau(t))`` gives the
martingale functions ``M_j(t, x)``, and ``D(t, x) = det[M_j(t, x_k)]``.

The coefficient matrix is stored with each basis row divided by
``exp(row_log_scale)``, so the construction stays finite even for very large
``t_star`` where the raw basis functions under- or overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalConditioningError, OverflowWindowError
from .root_systems import (
    Config,
    Family,
    _family,
    basis_f,
    basis_f_normalized,
    k_factors,
    log_c0,
    row_log_scale,
)
from .special_fn import ModularParam, ProcessClock, log_theta

__all__ = [
    "InterpCoeffs",
    "MartingaleCtx",
    "phi_coeffs",
    "phi_interp",
    "phi_interp_det",
    "log_weight",
]

COND_LIMIT = 1e12
F_HAT_LOG_LIMIT = 700.0


@dataclass(frozen=True)
class InterpCoeffs:
    """Normalised inverse of the interpolation matrix.

    ``phi_norm[j, k]`` multiplies the normalised basis row
    ``f_k * exp(-scales[k])``; ``phi`` undoes the normalisation.
    """

    family: Family
    u: np.ndarray
    tau: complex
    r: float
    phi_norm: np.ndarray
    scales: np.ndarray
    condition: float

    @property
    def phi(self) -> np.ndarray:
        return self.phi_norm * np.exp(-self.scales)[None, :]

    def interp(self, j: int, z):
        """``Phi_j(z)`` from the coefficients (``j`` is a 0-based particle index)."""
        z = np.asarray(z, dtype=complex)
        rows = np.array(
            [basis_f_normalized(self.family, k + 1, z, self.tau, self.r) for k in range(self.family.n)]
        )
        return np.tensordot(self.phi_norm[j], rows, axes=1)


def _positions(u) -> np.ndarray:
    return np.asarray(u.u if isinstance(u, Config) else u, dtype=float)


def phi_coeffs(fam, u, tau0, r: float = 1.0) -> InterpCoeffs:
    """Solve ``sum_k phi[j, k] f_k(u_m) = delta_{jm}`` for the coefficients."""
    fam = _family(fam)
    u = _positions(u)
    tau = ModularParam(tau0).tau if not isinstance(tau0, ModularParam) else tau0.tau
    n = fam.n
    scales = np.array([row_log_scale(fam, k + 1, tau, r) for k in range(n)])
    mat = np.array([basis_f_normalized(fam, k + 1, u, tau, r) for k in range(n)])
    cond = float(np.linalg.cond(mat))
    if not math.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalConditioningError(f"interpolation matrix condition number {cond:.3e}")
    # mat[k, m] = f_k(u_m), so phi @ mat = I means phi is the plain inverse
    phi_norm = np.linalg.inv(mat)
    return InterpCoeffs(fam, u, tau, r, phi_norm, scales, cond)


def phi_interp(fam, u, j: int, z, tau0, r: float = 1.0):
    """``Phi_{u, u_j}(z)`` from the product formula (``j`` 0-based)."""
    fam = _family(fam)
    u = _positions(u).astype(complex)
    z = np.asarray(z, dtype=complex)
    k = k_factors(fam, tau0, r)
    uj = u[j]
    others = np.delete(u, j)
    swapped = np.broadcast_to(u, z.shape + u.shape).copy()
    swapped[..., j] = z
    value = k.k_sym(swapped) / k.k_sym(u) * k.k1(z) / k.k1(uj)
    for ul in others:
        value = value * k.k2(z, ul) / k.k2(uj, ul)
    return value[()] if np.ndim(z) == 0 else value


def phi_interp_det(fam, u, j: int, z, tau0, r: float = 1.0):
    """``Phi_{u, u_j}(z)`` as a ratio of determinants (independent oracle)."""
    fam = _family(fam)
    u = _positions(u)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    tau = ModularParam(tau0).tau
    n = fam.n
    base = np.array([basis_f_normalized(fam, k + 1, u, tau, r) for k in range(n)])
    denom = np.linalg.det(base)
    out = np.empty(z.shape, dtype=complex)
    for idx, zz in enumerate(z):
        col = np.array([basis_f_normalized(fam, k + 1, zz, tau, r) for k in range(n)])
        mat = base.copy()
        mat[:, j] = col
        out[idx] = np.linalg.det(mat) / denom
    return out


@dataclass(frozen=True)
class MartingaleCtx:
    """Everything needed to evaluate ``M_j(t, x)`` and ``D(t, x)`` for one start ``u``."""

    family: Family
    clock: ProcessClock
    u: np.ndarray
    coeffs: InterpCoeffs

    @classmethod
    def build(cls, fam, u, t_star: float, r: float = 1.0) -> "MartingaleCtx":
        fam = _family(fam, len(_positions(u)))
        if isinstance(u, Config):
            r = u.r
        u = _positions(u)
        clock = ProcessClock(t_star, r)
        coeffs = phi_coeffs(fam, u, clock.tau(fam.cal_n, 0.0), r)
        return cls(fam, clock, u, coeffs)

    @property
    def r(self) -> float:
        return self.clock.r

    def tau(self, t: float) -> complex:
        return self.clock.tau(self.family.cal_n, t).tau

    def f_hat(self, j: int, t: float, x):
        """``exp(J^2 t / 2r^2) f_j(x; tau(t))`` with basis label ``j``."""
        jj = float(self.family.j_shift(j))
        growth = jj * jj * t / (2.0 * self.r**2)
        if growth > F_HAT_LOG_LIMIT:
            raise OverflowWindowError(f"exp({growth:.1f}) growth factor out of range")
        return math.exp(growth) * basis_f(self.family, j, x, self.tau(t), self.r)

    def m_mart(self, t: float, x, j: int | None = None):
        """``M_j(t, x)`` for particle ``j`` (0-based), or all ``N`` stacked first."""
        fam = self.family
        r = self.r
        tau_t = self.tau(t)
        x = np.asarray(x, dtype=complex)
        rows = []
        for k in range(fam.n):
            jj = float(fam.j_shift(k + 1))
            log_gain = (
                jj * jj * t / (2.0 * r * r)
                - self.coeffs.scales[k]
                + row_log_scale(fam, k + 1, tau_t, r)
            )
            rows.append(math.exp(log_gain) * basis_f_normalized(fam, k + 1, x, tau_t, r))
        rows = np.array(rows)
        mat = self.coeffs.phi_norm if j is None else self.coeffs.phi_norm[j]
        return np.tensordot(mat, rows, axes=1)

    def d_mart_det(self, t: float, x) -> np.ndarray:
        """``det[M_j(t, x_k)]`` over the last axis of ``x`` (oracle for :meth:`d_mart`)."""
        x = np.asarray(x, dtype=float)
        vals = self.m_mart(t, x)  # (N, ..., N): j, batch, k
        mats = np.moveaxis(vals, 0, -2)  # (..., j, k)
        return np.linalg.det(mats).real

    def log_d_terms(self, t: float, x) -> np.ndarray:
        """Complex log of ``D(t, x)`` from the product formula, batched over ``x[..., N]``."""
        x = np.asarray(x, dtype=float)
        fam, r = self.family, self.r
        return log_weight(fam, self.tau(t), x, r) - log_weight(fam, self.tau(0.0), self.u, r)

    def d_mart(self, t: float, x):
        """Determinantal martingale function ``D(t, x)`` (real), batched over ``x[..., N]``."""
        with np.errstate(over="ignore", invalid="ignore"):
            value = np.exp(self.log_d_terms(t, x)).real
        value = np.where(np.isnan(value), 0.0, value)
        return value[()] if np.ndim(value) == 0 else value


def log_weight(fam, tau, x, r: float = 1.0):
    """``log[c0(tau) k_sym(x) prod k1(x_l) prod_{j<k} k2(x_k, x_j)]`` over ``x[..., N]``.

    Differences of this weight between two space-time points give both the
    martingale function and the transition density of the interacting system.
    """
    fam = _family(fam)
    two_pi_r = 2.0 * math.pi * r
    x = np.asarray(x, dtype=float)
    total = np.full(x.shape[:-1], log_c0(fam, tau), dtype=complex)
    total = total + _log_k_sym(fam, x, tau, r) + _log_k1(fam, x, tau, r).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(fam.n):
            for b in range(a + 1, fam.n):
                total = total + log_theta(1, (x[..., b] - x[..., a]) / two_pi_r, tau)
                if not fam.on_circle():
                    total = total + log_theta(1, (x[..., b] + x[..., a]) / two_pi_r, tau)
    return total


def _log_k_sym(fam: Family, x, tau, r):
    x = np.asarray(x, dtype=float)
    if not fam.on_circle():
        return np.zeros(x.shape[:-1], dtype=complex)[()]
    return log_theta(1, (x.sum(axis=-1) - fam.kappa(r)) / (2.0 * math.pi * r), tau)


def _log_k1(fam: Family, x, tau, r):
    from .root_systems import FamilyTag

    x = np.asarray(x, dtype=float)
    tag = fam.tag
    if tag in (FamilyTag.A, FamilyTag.D):
        return np.zeros(x.shape, dtype=complex)
    with np.errstate(divide="ignore"):
        if tag is FamilyTag.BC:
            return log_theta(1, x / (2.0 * math.pi * r), tau) + log_theta(0, x / (math.pi * r), 2 * tau)
        c1, c2 = fam.c12
        return log_theta(1, float(c1) * x / (2.0 * math.pi * r), float(c2) * tau)
