"""Jacobi theta functions and the elliptic building blocks derived from them.

Conventions (nome ``q = exp(i pi tau)``, ``z = exp(i pi v)``)::

    theta0(v; tau) = sum_n (-1)^n q^(n^2) z^(2n)
    theta1(v; tau) = i sum_n (-1)^n q^((n-1/2)^2) z^(2n-1)
    theta2(v; tau) = sum_n q^((n-1/2)^2) z^(2n-1)
    theta3(v; tau) = sum_n q^(n^2) z^(2n)

All four are written as one characteristic series

    sign * sum_n exp(i pi tau (n+a)^2 + 2 pi i (n+a)(v+b))

and evaluated over an a-priori window of ``n`` centred on the dominant term.
When ``Im tau`` is small the imaginary modular transformation
``tau -> -1/tau`` is applied first, so the number of terms stays bounded.
Values are returned as a mantissa times ``exp(log_scale)`` so that callers
can form ratios and products of very large or very small thetas safely.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import PoleProximityError, SeriesConvergenceError

__all__ = [
    "ThetaKind",
    "ModularParam",
    "ProcessClock",
    "theta",
    "theta_scaled",
    "theta_derivative",
    "theta1_dv",
    "theta1_dv2",
    "log_theta",
    "a_func",
    "dedekind_eta",
    "log_dedekind_eta",
    "eisenstein_e2",
    "eta1",
    "weierstrass_p",
    "weierstrass_zeta",
]

# Below this imaginary part the modular transformation is considered.
DIRECT_MIN_IM = 0.5
# Terms smaller than exp(-LOG_WINDOW) times the largest term are dropped.
LOG_WINDOW = 40.0
MAX_HALF_WIDTH = 10_000
DEFAULT_POLE_GUARD = 1e-12


class ThetaKind(IntEnum):
    THETA0 = 0
    THETA1 = 1
    THETA2 = 2
    THETA3 = 3


# kind -> (a, b, sign) of the characteristic series
_CHAR = {
    0: (0.0, 0.5, 1.0),
    1: (0.5, 0.5, -1.0),
    2: (0.5, 0.0, 1.0),
    3: (0.0, 0.0, 1.0),
}
# kind -> (kind evaluated at -1/tau, constant phase)
_SWAP = {
    0: (2, cmath.exp(0.25j * math.pi)),
    1: (1, cmath.exp(0.75j * math.pi)),
    2: (0, cmath.exp(0.25j * math.pi)),
    3: (3, cmath.exp(0.25j * math.pi)),
}


@dataclass(frozen=True)
class ModularParam:
    """A point ``tau`` of the upper half plane together with its nome."""

    tau: complex
    im_tau: float = field(init=False, repr=False)
    nome_q: complex = field(init=False, repr=False)

    def __post_init__(self):
        tau = complex(self.tau)
        if not (math.isfinite(tau.real) and math.isfinite(tau.imag)):
            raise ValueError(f"tau must be finite, got {tau!r}")
        if tau.imag <= 0.0:
            raise ValueError(f"tau must lie in the upper half plane, got {tau!r}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "im_tau", tau.imag)
        object.__setattr__(self, "nome_q", cmath.exp(1j * math.pi * tau))

    @classmethod
    def from_time(cls, cal_n: float, t_rem: float, r: float = 1.0) -> "ModularParam":
        """``tau = i * cal_n * t_rem / (2 pi r^2)``, the nome used by the processes."""
        if not t_rem > 0.0:
            raise ValueError(f"remaining time must be positive, got {t_rem}")
        return cls(1j * cal_n * t_rem / (2.0 * math.pi * r * r))


@dataclass(frozen=True)
class ProcessClock:
    """Maps process time ``t`` in ``[0, t_star)`` to modular parameters."""

    t_star: float
    r: float = 1.0

    def __post_init__(self):
        if not self.t_star > 0.0:
            raise ValueError("t_star must be positive")
        if not self.r > 0.0:
            raise ValueError("r must be positive")

    def remaining(self, t: float) -> float:
        if not 0.0 <= t < self.t_star:
            raise ValueError(f"time {t} outside [0, {self.t_star})")
        return self.t_star - t

    def tau(self, cal_n: float, t: float = 0.0) -> ModularParam:
        return ModularParam.from_time(cal_n, self.remaining(t), self.r)


def _as_tau(tau) -> complex:
    if isinstance(tau, ModularParam):
        return tau.tau
    return ModularParam(tau).tau


def _use_direct(tau: complex) -> bool:
    return tau.imag >= DIRECT_MIN_IM or (-1.0 / tau).imag <= tau.imag


# theta_k(v; tau + 1) = _T_PHASE[k] * theta_{_T_KIND[k]}(v; tau)
_T_KIND = {0: 3, 1: 1, 2: 2, 3: 0}
_T_PHASE = {0: 1.0 + 0j, 1: cmath.exp(0.25j * math.pi), 2: cmath.exp(0.25j * math.pi), 3: 1.0 + 0j}


def _direct(kind, v, tau, top):
    a, b, sign = _CHAR[kind]
    ite = tau.imag
    half = math.ceil(math.sqrt(LOG_WINDOW / (math.pi * ite)) + 0.5) + 1
    if half > MAX_HALF_WIDTH:
        raise SeriesConvergenceError(f"theta series needs {half} terms each side")
    centre = np.rint(-v.imag / ite - a)
    m = centre[..., None] + np.arange(-half, half + 1) + a
    expo = 1j * math.pi * tau * m * m + 2j * math.pi * m * (v[..., None] + b)
    log_scale = expo.real.max(axis=-1)
    weights = np.exp(expo - log_scale[..., None])
    slope = 2j * math.pi * m
    mants = [sign * weights.sum(axis=-1)]
    for order in range(1, top + 1):
        mants.append(sign * (weights * slope**order).sum(axis=-1))
    return mants, log_scale


def _evaluate(kind, v, tau, top):
    """Mantissas of derivatives ``0..top`` and the shared log scale.

    Reduces ``Re tau`` by integer shifts and applies ``tau -> -1/tau`` until
    ``Im tau`` is comfortable, then sums the series directly.
    """
    if tau.imag >= DIRECT_MIN_IM:
        return _direct(kind, v, tau, top)
    shift = round(tau.real)
    if shift != 0:
        phase = 1.0 + 0j
        k = kind
        if shift > 0:
            for _ in range(shift):
                phase *= _T_PHASE[k]
                k = _T_KIND[k]
        else:
            for _ in range(-shift):
                k = _T_KIND[k]
                phase /= _T_PHASE[k]
        mants, ls = _evaluate(k, v, tau - shift, top)
        return [phase * mt for mt in mants], ls
    if (-1.0 / tau).imag <= tau.imag:
        return _direct(kind, v, tau, top)
    inner, phase = _SWAP[kind]
    gamma = -1j * math.pi / tau
    g, ls = _evaluate(inner, v / tau, -1.0 / tau, top)
    quad = gamma * v * v
    front = phase / cmath.sqrt(tau) * np.exp(1j * quad.imag)
    mants = [front * g[0]]
    if top >= 1:
        mants.append(front * (2.0 * gamma * v * g[0] + g[1] / tau))
    if top >= 2:
        mants.append(
            front
            * (
                (2.0 * gamma + 4.0 * gamma * gamma * v * v) * g[0]
                + 4.0 * gamma * v * g[1] / tau
                + g[2] / (tau * tau)
            )
        )
    return mants, ls + quad.real


def _theta_terms(kind: int, v, tau, orders=(0,)):
    """Mantissas of the requested v-derivatives and their shared log scale.

    ``theta^(d)(v) = mant[d] * exp(log_scale)`` for each requested order.
    """
    kind = int(kind)
    if kind not in _CHAR:
        raise ValueError(f"unknown theta kind {kind}")
    if any(order not in (0, 1, 2) for order in orders):
        raise ValueError("only derivative orders 0, 1, 2 are supported")
    v = np.asarray(v, dtype=complex)
    if not np.all(np.isfinite(v)):
        raise ValueError("theta argument must be finite")
    tau = _as_tau(tau)
    mants, ls = _evaluate(kind, v, tau, max(orders))
    return [mants[order] for order in orders], ls


def _out(x, like):
    if np.ndim(like) == 0:
        return x[()] if isinstance(x, np.ndarray) else x
    return x


def theta_scaled(kind, v, tau, nderiv: int = 0):
    """Return ``(mantissa, log_scale)`` with ``theta^(nderiv) = mantissa * exp(log_scale)``."""
    (mant,), ls = _theta_terms(kind, v, tau, (nderiv,))
    return _out(mant, v), _out(ls, v)


def theta(kind, v, tau):
    """Jacobi theta function ``theta_kind(v; tau)``, vectorised over ``v``."""
    (mant,), ls = _theta_terms(kind, v, tau, (0,))
    return _out(mant * np.exp(ls), v)


def theta_derivative(kind, v, tau, order: int = 1):
    """``d^order/dv^order theta_kind(v; tau)`` for order 1 or 2."""
    (mant,), ls = _theta_terms(kind, v, tau, (order,))
    return _out(mant * np.exp(ls), v)


def theta1_dv(v, tau):
    """``theta1'(v; tau)``, the derivative in ``v``."""
    return theta_derivative(1, v, tau, 1)


def theta1_dv2(v, tau):
    """``theta1''(v; tau)``."""
    return theta_derivative(1, v, tau, 2)


def log_theta(kind, v, tau):
    """Complex logarithm of ``theta_kind(v; tau)`` (any branch; ``-inf`` at zeros)."""
    (mant,), ls = _theta_terms(kind, v, tau, (0,))
    with np.errstate(divide="ignore"):
        return _out(np.log(mant) + ls, v)


def a_func(cal_n: float, t_rem: float, x, r: float = 1.0, guard: float | None = None):
    """Logarithmic derivative ``(1/2 pi r) theta1'/theta1`` at ``x / 2 pi r``.

    The nome is ``tau = i cal_n t_rem / (2 pi r^2)``. The function is odd,
    ``2 pi r``-periodic and has simple poles at multiples of ``2 pi r``;
    arguments closer than ``guard`` (default ``1e-12 * 2 pi r``) to a pole
    raise :class:`PoleProximityError`.
    """
    if not t_rem > 0.0:
        raise ValueError(f"remaining time must be positive, got {t_rem}")
    x_arr = np.asarray(x, dtype=float)
    period = 2.0 * math.pi * r
    if guard is None:
        guard = DEFAULT_POLE_GUARD * period
    dist = np.abs(x_arr - period * np.rint(x_arr / period))
    if np.any(dist < guard):
        raise PoleProximityError("A-function evaluated at a pole")
    tau = 1j * cal_n * t_rem / (2.0 * math.pi * r * r)
    (m0, m1), _ = _theta_terms(1, x_arr / period, tau, (0, 1))
    return _out((m1 / m0).real / period, x)


def log_dedekind_eta(tau) -> complex:
    """Logarithm of ``eta(tau) = q^(1/12) prod_n (1 - q^(2n))``."""
    tau = _as_tau(tau)
    if not _use_direct(tau):
        return -0.5 * cmath.log(-1j * tau) + log_dedekind_eta(-1.0 / tau)
    q2 = cmath.exp(2j * math.pi * tau)
    total = 1j * math.pi * tau / 12.0
    power = q2
    n = 1
    while abs(power) > 1e-18:
        total += np.log1p(-power)
        power *= q2
        n += 1
        if n > 1_000_000:
            raise SeriesConvergenceError("eta product did not converge")
    return complex(total)


def dedekind_eta(tau) -> complex:
    """Dedekind eta function."""
    return cmath.exp(log_dedekind_eta(tau))


def eisenstein_e2(tau) -> complex:
    """Quasi-modular Eisenstein series ``E2 = 1 - 24 sum n q^(2n) / (1 - q^(2n))``."""
    tau = _as_tau(tau)
    if not _use_direct(tau):
        return (eisenstein_e2(-1.0 / tau) + 6j * tau / math.pi) / (tau * tau)
    q2 = cmath.exp(2j * math.pi * tau)
    total = 0j
    power = q2
    n = 1
    while abs(n * power) > 1e-18 or n < 2:
        total += n * power / (1.0 - power)
        n += 1
        power *= q2
        if n > 1_000_000:
            raise SeriesConvergenceError("E2 series did not converge")
    return 1.0 - 24.0 * total


def eta1(cal_n: float, t_rem: float, r: float = 1.0) -> float:
    """Weierstrass quasi-period ``eta^1 = zeta(pi r)`` for half periods ``pi r`` and ``i cal_n t_rem / 2r``."""
    tau = ModularParam.from_time(cal_n, t_rem, r)
    return (math.pi * eisenstein_e2(tau) / (12.0 * r)).real


def _cot_csc2(w):
    """Overflow-free ``cot(w)`` and ``csc(w)^2`` for complex arrays."""
    w = np.asarray(w, dtype=complex)
    upper = w.imag >= 0
    e = np.exp(np.where(upper, 2j * w, -2j * w))
    cot = np.where(upper, 1j * (e + 1.0) / (e - 1.0), 1j * (1.0 + e) / (1.0 - e))
    csc2 = -4.0 * e / (e - 1.0) ** 2
    return cot, csc2


def _lattice(omega1, omega3):
    w1, w3 = complex(omega1), complex(omega3)
    if w1 == 0 or w3 == 0 or (w3 / w1).imag == 0:
        raise ValueError("half periods must be non-zero and linearly independent over R")
    if abs((w3 / w1).imag) >= abs((w1 / w3).imag):
        big, small = 2.0 * w1, 2.0 * w3
    else:
        big, small = 2.0 * w3, 2.0 * w1
    rho = abs((small / big).imag)
    rows = math.ceil((LOG_WINDOW + math.pi * rho) / (2.0 * math.pi * rho)) + 1
    if rows > 40:
        raise SeriesConvergenceError("lattice sum needs more than 40 rows")
    return big, small, rows


def _reduce(z, big, small, omega1):
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("argument must be finite")
    ratio = small / big
    beta = (z / big).imag / ratio.imag
    alpha = (z / big).real - beta * ratio.real
    shift = np.rint(beta)
    z0 = z - shift * small
    nearest = np.full(z0.shape, np.inf)
    for a0 in (np.floor(alpha), np.ceil(alpha)):
        for b0 in (np.floor(beta), np.ceil(beta)):
            nearest = np.minimum(nearest, np.abs(z - a0 * big - b0 * small))
    if np.any(nearest < 1e-12 * abs(omega1)):
        raise PoleProximityError("Weierstrass function evaluated at a lattice point")
    return z0, shift


def weierstrass_p(z, omega1, omega3):
    """Weierstrass ``wp(z)`` for the lattice ``2 m omega1 + 2 n omega3``.

    One lattice direction is summed in closed form through ``csc^2``; the other
    is a short, exponentially convergent row sum.
    """
    big, small, rows = _lattice(omega1, omega3)
    z0, _ = _reduce(z, big, small, omega1)
    k = math.pi / big
    _, c0 = _cot_csc2(k * z0)
    total = c0 - 1.0 / 3.0
    for n in range(1, rows + 1):
        _, cp = _cot_csc2(k * (z0 - n * small))
        _, cm = _cot_csc2(k * (z0 + n * small))
        _, cn = _cot_csc2(k * n * small)
        total = total + cp + cm - 2.0 * cn
    return _out(k * k * total, z)


def _zeta_reduced(z0, big, small, rows):
    k = math.pi / big
    cot0, _ = _cot_csc2(k * z0)
    total = k * cot0 + z0 * k * k / 3.0
    for n in range(1, rows + 1):
        cp, _ = _cot_csc2(k * (z0 - n * small))
        cm, _ = _cot_csc2(k * (z0 + n * small))
        _, cn = _cot_csc2(k * n * small)
        total = total + k * (cp + cm) + 2.0 * z0 * k * k * cn
    return total


def weierstrass_zeta(z, omega1, omega3):
    """Weierstrass ``zeta(z)`` with ``zeta' = -wp``, same lattice as :func:`weierstrass_p`."""
    big, small, rows = _lattice(omega1, omega3)
    z0, shift = _reduce(z, big, small, omega1)
    value = _zeta_reduced(z0, big, small, rows)
    if np.any(shift != 0):
        half = _zeta_reduced(np.asarray(small / 2.0), big, small, rows)
        value = value + 2.0 * shift * half
    return _out(value, z)
