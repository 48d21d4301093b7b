"""Correlation kernels of the interval processes and their trigonometric and rational limits.

Transition densities on ``[0, pi r]`` carry a boundary condition at each wall,
``a`` (absorbing) or ``r`` (reflecting).  They are evaluated from the image
series for short times and from the eigenfunction series for long times.

The spatio-temporal kernel of the elliptic process is

    K(s, x; t, y) = sum_j p(s, x | u_j) M_j(t, y) - 1(s > t) p(s - t, x | y)

where ``M_j`` are the martingale functions of :mod:`interp_martingale`.
Because the first term has rank ``N`` the equal-time Fredholm determinant
reduces to an ``N x N`` determinant of overlap integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .interp_martingale import MartingaleCtx
from .root_systems import Family, FamilyTag, _family

__all__ = [
    "Wall",
    "BoundaryCond",
    "KernelMode",
    "KernelContext",
    "TrigCoeffs",
    "p_bm",
    "p_interval",
    "p_half_line",
    "corr_kernel",
    "density",
    "corr_function",
    "fredholm_gap",
    "fredholm_det_discretized",
    "kernel_eq_trig",
    "rho_eq_trig",
    "kernel_trig",
    "trig_coeffs",
    "trig_det",
    "trig_det_factorized",
    "kernel_bes",
    "kernel_rational",
    "phi_half_line",
    "gauss_legendre",
]

_LOG_TAIL = 40.0


class Wall(str, Enum):
    ABSORB = "a"
    REFLECT = "r"


@dataclass(frozen=True)
class BoundaryCond:
    """Wall types at ``0`` and at ``pi r``."""

    at_zero: Wall
    at_pi_r: Wall

    @classmethod
    def parse(cls, spec) -> "BoundaryCond":
        if isinstance(spec, cls):
            return spec
        text = str(spec).strip().lower()
        if len(text) != 2 or any(c not in "ar" for c in text):
            raise ValueError(f"boundary condition must be two letters from 'a'/'r', got {spec!r}")
        return cls(Wall(text[0]), Wall(text[1]))

    @classmethod
    def for_family(cls, fam) -> "BoundaryCond":
        tag = fam.tag if isinstance(fam, Family) else FamilyTag.parse(fam)
        code = {FamilyTag.B: "ar", FamilyTag.C: "aa", FamilyTag.D: "rr"}.get(tag)
        if code is None:
            raise ValueError(f"no default boundary condition for family {tag.value}; pass one explicitly")
        return cls.parse(code)

    @property
    def code(self) -> str:
        return self.at_zero.value + self.at_pi_r.value


def p_bm(t, y, x):
    """Gaussian heat kernel ``exp(-(y-x)^2 / 2t) / sqrt(2 pi t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Brownian density needs t > 0 (t = 0 is the delta limit)")
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return np.exp(-d * d / (2.0 * t)) / np.sqrt(2.0 * math.pi * t)


def _images(code: str, t: float, y, x, r: float):
    period = 2.0 * math.pi * r
    reach = math.sqrt(2.0 * t * _LOG_TAIL)
    kmax = math.ceil(reach / period) + 2
    mirror = 1.0 if code[0] == "r" else -1.0
    alternate = code[0] != code[1]
    total = 0.0
    for k in range(-kmax, kmax + 1):
        sign = -1.0 if (alternate and k % 2) else 1.0
        shifted = y + period * k
        total = total + sign * (p_bm(t, shifted, x) + mirror * p_bm(t, shifted, -x))
    return total


def _spectral(code: str, t: float, y, x, r: float):
    nmax = math.ceil(math.sqrt(2.0 * r * r * _LOG_TAIL / t)) + 2
    n = np.arange(1, nmax + 1)
    if code in ("aa", "rr"):
        freq = n.astype(float)
    else:
        freq = n - 0.5
    decay = np.exp(-freq * freq * t / (2.0 * r * r))
    yy = np.asarray(y, dtype=float)[..., None] * freq / r
    xx = np.asarray(x, dtype=float)[..., None] * freq / r
    if code[0] == "a":
        modes = np.sin(yy) * np.sin(xx)
    else:
        modes = np.cos(yy) * np.cos(xx)
    series = (decay * modes).sum(axis=-1)
    if code == "rr":
        return (1.0 + 2.0 * series) / (math.pi * r)
    return 2.0 * series / (math.pi * r)


def p_interval(bc, t: float, y, x, r: float = 1.0, method: str = "auto"):
    """Transition density from ``x`` to ``y`` in ``[0, pi r]`` after time ``t``.

    ``method`` is ``"images"``, ``"spectral"`` or ``"auto"`` (images below
    ``t = r^2``).  Vectorised over ``x`` and ``y`` with broadcasting.
    """
    code = BoundaryCond.parse(bc).code
    t = float(t)
    if t < 0:
        raise ValueError("time must be non-negative")
    if t == 0:
        raise ValueError("t = 0 is the delta limit and is not evaluated")
    if method == "auto":
        method = "images" if t < r * r else "spectral"
    if method == "images":
        out = _images(code, t, np.asarray(y, float), np.asarray(x, float), r)
    elif method == "spectral":
        out = _spectral(code, t, y, x, r)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[()] if isinstance(out, np.ndarray) and out.ndim == 0 else out


def p_half_line(bc_zero: str, t: float, y, x):
    """Transition density on ``[0, inf)`` with an absorbing (``a``) or reflecting (``r``) wall."""
    sign = {"a": -1.0, "r": 1.0}[bc_zero]
    return p_bm(t, y, x) + sign * p_bm(t, y, -np.asarray(x, dtype=float))


class KernelMode(str, Enum):
    ELLIPTIC = "elliptic"
    TRIGONOMETRIC = "trigonometric"
    EQUILIBRIUM = "equilibrium"


@dataclass(frozen=True)
class TrigCoeffs:
    """Coefficients of the trigonometric interpolation functions for types C and D."""

    family: Family
    u: np.ndarray
    r: float
    phi: np.ndarray

    def basis(self, k, z):
        return _trig_basis(self.family.tag, k, z, self.r)

    def rate(self, k) -> float:
        return _trig_rate(self.family.tag, k, self.r)

    def m_mart(self, t: float, y):
        """``M_j(t, y)`` for all ``j`` stacked along the first axis."""
        y = np.asarray(y, dtype=float)
        rows = np.array(
            [math.exp(self.rate(k) * t) * self.basis(k, y) for k in range(1, self.family.n + 1)]
        )
        return np.tensordot(self.phi, rows, axes=1)

    def interp(self, j: int, z):
        rows = np.array([self.basis(k, z) for k in range(1, self.family.n + 1)])
        return np.tensordot(self.phi[j], rows, axes=1)


def _trig_basis(tag: FamilyTag, k, z, r):
    z = np.asarray(z)
    if tag is FamilyTag.C:
        return np.sin(k * z / r)
    if tag is FamilyTag.D:
        return np.cos((k - 1) * z / r)
    raise ValueError("trigonometric kernels exist for families C and D only")


def _trig_rate(tag: FamilyTag, k, r):
    m = k if tag is FamilyTag.C else k - 1
    return m * m / (2.0 * r * r)


def _trig_family(fam, n=None) -> Family:
    fam = _family(fam, n)
    if fam.tag not in (FamilyTag.C, FamilyTag.D):
        raise ValueError("trigonometric kernels exist for families C and D only")
    return fam


def trig_coeffs(fam, u, r: float = 1.0) -> TrigCoeffs:
    u = np.asarray(getattr(u, "u", u), dtype=float)
    fam = _trig_family(fam, u.size)
    mat = np.array([_trig_basis(fam.tag, k, u, r) for k in range(1, fam.n + 1)])
    return TrigCoeffs(fam, u, r, np.linalg.inv(mat))


def trig_det(fam, u, r: float = 1.0) -> float:
    """``det[f_j(u_k)]`` for the sine (C) or cosine (D) basis."""
    u = np.asarray(getattr(u, "u", u), dtype=float)
    fam = _trig_family(fam, u.size)
    mat = np.array([_trig_basis(fam.tag, k, u, r) for k in range(1, fam.n + 1)])
    return float(np.linalg.det(mat))


def trig_det_factorized(fam, u, r: float = 1.0) -> float:
    """Sine-product evaluation of :func:`trig_det`."""
    u = np.asarray(getattr(u, "u", u), dtype=float)
    fam = _trig_family(fam, u.size)
    n = fam.n
    sign = (-1.0) ** (n * (n - 1) // 2)
    if fam.tag is FamilyTag.C:
        value = sign * 2.0 ** (n * (n - 1)) * np.prod(np.sin(u / r))
    else:
        value = sign * 2.0 ** ((n - 1) ** 2)
    for a in range(n):
        for b in range(a + 1, n):
            value *= math.sin((u[b] - u[a]) / (2 * r)) * math.sin((u[b] + u[a]) / (2 * r))
    return float(value)


def rho_eq_trig(fam, x, n: int | None = None, r: float = 1.0):
    """Equilibrium one-point density of the trigonometric C or D model."""
    fam = _trig_family(fam, n)
    x = np.asarray(x, dtype=float)
    m = np.arange(1, fam.n + (1 if fam.tag is FamilyTag.C else 0))
    if fam.tag is FamilyTag.C:
        return 2.0 / (math.pi * r) * (np.sin(np.multiply.outer(x, m) / r) ** 2).sum(axis=-1)
    return (1.0 + 2.0 * (np.cos(np.multiply.outer(x, m) / r) ** 2).sum(axis=-1)) / (math.pi * r)


def _dirichlet(width: int, theta):
    """``sin(width theta / 2) / sin(theta / 2)`` with the removable points filled in."""
    theta = np.asarray(theta, dtype=float)
    half = np.sin(theta / 2.0)
    small = np.abs(half) < 1e-7
    safe = np.where(small, 1.0, half)
    closed = np.sin(width * theta / 2.0) / safe
    m = (width - 1) // 2
    k = np.arange(-m, m + 1)
    summed = np.cos(np.multiply.outer(theta, k)).sum(axis=-1)
    return np.where(small, summed, closed)


def kernel_eq_trig(fam, dt: float, x, y, n: int | None = None, r: float = 1.0):
    """Equilibrium spatio-temporal kernel as a function of ``dt = t - s``."""
    fam = _trig_family(fam, n)
    nn = fam.n
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    is_c = fam.tag is FamilyTag.C
    if dt == 0:
        width = 2 * nn + 1 if is_c else 2 * nn - 1
        sign = -1.0 if is_c else 1.0
        return (_dirichlet(width, (y - x) / r) + sign * _dirichlet(width, (y + x) / r)) / (2 * math.pi * r)
    if dt > 0:
        top = nn if is_c else nn - 1
        m = np.arange(-top, top + 1)
        prefactor = 1.0 / (math.pi * r)
    else:
        first = nn + 1 if is_c else nn
        last = math.ceil(math.sqrt(2.0 * r * r * _LOG_TAIL / -dt)) + first + 1
        if last > 1_000_000:
            # far too many modes: use the equivalent image form instead
            code = "aa" if is_c else "rr"
            return _g_eq(fam, dt, x, y, r) - p_interval(code, -dt, x, y, r)
        pos = np.arange(first, last + 1)
        m = np.concatenate([-pos[::-1], pos])
        prefactor = -1.0 / (math.pi * r)
    weights = np.exp(m * m * dt / (2.0 * r * r))
    xm = np.multiply.outer(x, m) / r
    ym = np.multiply.outer(y, m) / r
    modes = np.sin(xm) * np.sin(ym) if is_c else np.cos(xm) * np.cos(ym)
    return prefactor * (weights * modes).sum(axis=-1)


def _g_eq(fam: Family, dt: float, x, y, r: float):
    n = fam.n
    out = 0.0
    if fam.tag is FamilyTag.C:
        for k in range(1, n + 1):
            out = out + 2.0 * math.exp(k * k * dt / (2 * r * r)) * np.sin(k * x / r) * np.sin(k * y / r)
    else:
        out = out + 1.0
        for k in range(2, n + 1):
            m = k - 1
            out = out + 2.0 * math.exp(m * m * dt / (2 * r * r)) * np.cos(m * x / r) * np.cos(m * y / r)
    return out / (math.pi * r)


def kernel_trig(fam, u, s: float, x, t: float, y, r: float = 1.0, method: str = "spectral"):
    """Spatio-temporal kernel of the trigonometric C or D model started from ``u``.

    ``method="spectral"`` splits off the equilibrium part analytically and sums
    the decaying remainder; ``"direct"`` evaluates the defining sum over ``j``,
    which loses accuracy once ``exp(lambda_N t)`` is large.
    """
    coeffs = u if isinstance(u, TrigCoeffs) else trig_coeffs(fam, u, r)
    fam = coeffs.family
    r = coeffs.r
    tag = fam.tag
    code = "aa" if tag is FamilyTag.C else "rr"
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if s <= 0:
        raise ValueError("s must be positive (s = 0 is the delta limit)")
    jump = p_interval(code, s - t, x, y, r) if s > t else 0.0
    if method == "direct":
        mj = coeffs.m_mart(t, y)
        total = 0.0
        for j in range(fam.n):
            total = total + p_interval(code, s, x, coeffs.u[j], r) * mj[j]
        return total - jump
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    n = fam.n
    last = n + math.ceil(math.sqrt(2.0 * r * r * _LOG_TAIL / s)) + 2
    ells = np.arange(n + 1, last + 1)
    # overlap[l, k] = sum_j f_l(u_j) phi[j, k]
    fu = np.array([_trig_basis(tag, l, coeffs.u, r) for l in ells])
    overlap = fu @ coeffs.phi
    rest = 0.0
    for k in range(1, n + 1):
        lam_k = _trig_rate(tag, k, r)
        inner = 0.0
        for idx, l in enumerate(ells):
            gap = _trig_rate(tag, l, r) - lam_k
            if gap * s > _LOG_TAIL:
                continue
            inner = inner + math.exp(-gap * s) * _trig_basis(tag, l, x, r) * overlap[idx, k - 1]
        rest = rest + math.exp(lam_k * (t - s)) * _trig_basis(tag, k, y, r) * inner
    rest = 2.0 / (math.pi * r) * rest
    return _g_eq(fam, t - s, x, y, r) + rest - jump


def _hermite_nodes(order: int):
    nodes, weights = hermegauss(order)
    return nodes, weights / math.sqrt(2.0 * math.pi)


def phi_half_line(u, j: int, z):
    """Rational interpolation ``prod_{l != j} (z^2 - u_l^2) / (u_j^2 - u_l^2)``."""
    u = np.asarray(u, dtype=float)
    z = np.asarray(z)
    out = np.ones(z.shape, dtype=np.result_type(z, float))
    for l, ul in enumerate(u):
        if l != j:
            out = out * (z * z - ul * ul) / (u[j] ** 2 - ul * ul)
    return out


def _rational_m(u, j, t, y, weight):
    """``E[weight(y + iB) Phi_j(y + iB)]`` by exact Gauss-Hermite quadrature."""
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    nodes, w = _hermite_nodes(2 * len(u) + 2)
    z = y[..., None] + 1j * math.sqrt(max(t, 0.0)) * nodes
    vals = weight(z) * phi_half_line(u, j, z)
    return (vals * w).sum(axis=-1).real


def kernel_rational(fam, u, s: float, x, t: float, y):
    """Kernel of the rational (``t_star``, ``r`` to infinity) limit of types C and D."""
    tag = FamilyTag.parse(getattr(fam, "tag", fam))
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if tag is FamilyTag.C:
        wall = "a"
    elif tag is FamilyTag.D:
        wall = "r"
    else:
        raise ValueError("rational kernels exist for families C and D only")
    total = 0.0
    for j, uj in enumerate(u):
        if tag is FamilyTag.C:
            m = _rational_m(u, j, t, y, lambda z, uj=uj: z / uj)
        else:
            m = _rational_m(u, j, t, y, lambda z: np.ones_like(z))
        total = total + p_half_line(wall, s, x, uj) * m
    if s > t:
        total = total - p_half_line(wall, s - t, x, y)
    return total


def kernel_bes(kind: str, u, s: float, x, t: float, y):
    """Kernels of noncolliding Bessel processes of dimension 3 (``"BES3"``) or 1 (``"BES1"``)."""
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    kind = kind.upper()
    if kind == "BES1":
        return kernel_rational("D", u, s, x, t, y)
    if kind != "BES3":
        raise ValueError(f"unknown Bessel kernel {kind!r}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("BES3 kernel needs x, y > 0")
    total = 0.0
    for j, uj in enumerate(u):
        m = _rational_m(u, j, t, y, lambda z: z / y[..., None])
        total = total + (x / uj) * p_half_line("a", s, x, uj) * m
    if s > t:
        total = total - (x / y) * p_half_line("a", s - t, x, y)
    return total


@dataclass(frozen=True)
class KernelContext:
    """Kernel data for one initial configuration: elliptic, trigonometric or equilibrium."""

    family: Family
    bc: BoundaryCond
    mode: KernelMode
    r: float = 1.0
    mart: MartingaleCtx | None = None
    trig: TrigCoeffs | None = None

    @classmethod
    def elliptic(cls, fam, u, t_star: float, r: float = 1.0, bc=None) -> "KernelContext":
        mart = MartingaleCtx.build(_family(fam, len(_as_positions(u))), u, t_star, r)
        bc = BoundaryCond.for_family(mart.family) if bc is None else BoundaryCond.parse(bc)
        return cls(mart.family, bc, KernelMode.ELLIPTIC, r, mart=mart)

    @classmethod
    def trigonometric(cls, fam, u, r: float = 1.0) -> "KernelContext":
        coeffs = trig_coeffs(_trig_family(fam, len(_as_positions(u))), u, r)
        return cls(coeffs.family, BoundaryCond.for_family(coeffs.family), KernelMode.TRIGONOMETRIC, r, trig=coeffs)

    @classmethod
    def equilibrium(cls, fam, n: int | None = None, r: float = 1.0) -> "KernelContext":
        fam = _trig_family(fam, n)
        return cls(fam, BoundaryCond.for_family(fam), KernelMode.EQUILIBRIUM, r)

    @property
    def u(self):
        if self.mart is not None:
            return self.mart.u
        if self.trig is not None:
            return self.trig.u
        return None


def _as_positions(u):
    return u.u if hasattr(u, "u") else tuple(u)


def corr_kernel(ctx: KernelContext, s: float, x, t: float, y):
    """Correlation kernel ``K(s, x; t, y)``, vectorised over ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if ctx.mode is KernelMode.EQUILIBRIUM:
        return kernel_eq_trig(ctx.family, t - s, x, y, r=ctx.r)
    if ctx.mode is KernelMode.TRIGONOMETRIC:
        return kernel_trig(ctx.family, ctx.trig, s, x, t, y)
    if s <= 0:
        raise ValueError("s must be positive (s = 0 is the delta limit)")
    mart = ctx.mart
    mj = mart.m_mart(t, y).real
    total = 0.0
    for j in range(ctx.family.n):
        total = total + p_interval(ctx.bc, s, x, mart.u[j], ctx.r) * mj[j]
    if s > t:
        total = total - p_interval(ctx.bc, s - t, x, y, ctx.r)
    return total


def density(ctx: KernelContext, t: float, x):
    """Equal-time one-point density ``K(t, x; t, x)``."""
    return corr_kernel(ctx, t, x, t, x)


def corr_function(ctx: KernelContext, points) -> float:
    """Determinant of ``[K(t_i, x_i; t_j, x_j)]`` over the given space-time points."""
    pts = [(float(a), float(b)) for a, b in points]
    m = len(pts)
    mat = np.empty((m, m))
    for i, (ti, xi) in enumerate(pts):
        for j, (tj, xj) in enumerate(pts):
            mat[i, j] = corr_kernel(ctx, ti, xi, tj, xj)
    return float(np.linalg.det(mat))


def gauss_legendre(a: float, b: float, order: int):
    nodes, weights = leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def fredholm_det_discretized(kernel, a: float, b: float, order: int = 64) -> float:
    """``det(I - K)`` on ``L^2(a, b)`` by Nystrom discretisation.

    ``kernel(x, y)`` must accept broadcast arrays.
    """
    if order < 4:
        raise ValueError("quadrature order must be at least 4")
    if b <= a:
        return 1.0
    nodes, weights = gauss_legendre(a, b, order)
    root = np.sqrt(weights)
    mat = root[:, None] * kernel(nodes[:, None], nodes[None, :]) * root[None, :]
    return float(np.linalg.det(np.eye(order) - mat))


def _gap_overlaps(ctx: KernelContext, t: float, a: float, b: float, order: int):
    nodes, weights = gauss_legendre(a, b, order)
    n = ctx.family.n
    if ctx.mode is KernelMode.ELLIPTIC:
        mj = ctx.mart.m_mart(t, nodes).real
        code = ctx.bc
        us = ctx.mart.u
    elif ctx.mode is KernelMode.TRIGONOMETRIC:
        mj = ctx.trig.m_mart(t, nodes)
        code = ctx.bc
        us = ctx.trig.u
    else:
        raise ValueError("use fredholm_det_discretized for equilibrium kernels")
    pk = np.array([p_interval(code, t, nodes, us[k], ctx.r) for k in range(n)])
    return (mj * weights) @ pk.T


def fredholm_gap(ctx: KernelContext, t: float, interval, quad_order: int = 64, adaptive: bool = True) -> float:
    """Probability that no particle lies in ``interval`` at time ``t``.

    The equal-time kernel has rank ``N``, so ``det(I - K chi)`` equals the
    ``N x N`` determinant ``det(delta_jk - int_a^b M_j(t, x) p(t, x | u_k) dx)``.
    The quadrature order is doubled until successive values differ by < 1e-8.
    """
    a, b = (float(v) for v in interval)
    if quad_order < 4:
        raise ValueError("quadrature order must be at least 4")
    if b <= a:
        return 1.0
    if ctx.mode is KernelMode.EQUILIBRIUM:
        return fredholm_det_discretized(lambda x, y: corr_kernel(ctx, t, x, t, y), a, b, quad_order)
    n = ctx.family.n
    order = quad_order
    value = float(np.linalg.det(np.eye(n) - _gap_overlaps(ctx, t, a, b, order)))
    while adaptive and order < 1024:
        order *= 2
        refined = float(np.linalg.det(np.eye(n) - _gap_overlaps(ctx, t, a, b, order)))
        if abs(refined - value) < 1e-8:
            return refined
        value = refined
    return value
