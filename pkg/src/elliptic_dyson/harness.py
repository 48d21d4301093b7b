"""Validation suites and machine-readable reports.

Every check returns :class:`Record` objects.  A suite is an ordered list of
checks; :func:`run_suite` runs one and wraps the records in a :class:`Report`
that serialises to JSON (``schema: 1``) or to a flat CSV with one row per
record.  Reports contain no wall-clock data unless ``timings`` is set, so two
runs with the same configuration produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .errors import SeriesConvergenceError
from .interp_martingale import MartingaleCtx, log_weight, phi_coeffs, phi_interp, phi_interp_det
from .kernels import (
    KernelContext,
    corr_kernel,
    density,
    fredholm_det_discretized,
    fredholm_gap,
    gauss_legendre,
    kernel_eq_trig,
    kernel_trig,
    p_interval,
    rho_eq_trig,
)
from .rng import PURPOSE_ENDPOINT, fill_normals
from .root_systems import Family, FamilyTag, basis_f, factorized_det, macdonald_det, random_config
from .sde import Model, SdeSpec, drift, empirical_density, simulate
from .special_fn import ProcessClock, log_dedekind_eta, theta, theta_derivative

__all__ = [
    "Tolerances",
    "RunConfig",
    "Record",
    "Report",
    "SUITES",
    "run_suite",
    "default_config",
    "transition_density",
    "kolmogorov_residual",
    "verify_integral_identity",
]

SCHEMA_VERSION = 1
ALL_TAGS = ("A", "B", "Bvee", "C", "Cvee", "BC", "D")


@dataclass(frozen=True)
class Tolerances:
    factorization: float = 1e-9
    theta_identity: float = 1e-10
    heat_fd: float = 1e-5
    asymptotic: float = 1e-6
    interp_delta: float = 1e-10
    interp_matrix: float = 1e-9
    interp_det: float = 1e-9
    martingale_se: float = 4.0
    kolmogorov: float = 1e-3
    integral_n2: float = 1e-6
    integral_n3: float = 1e-4
    density_se: float = 4.0
    density_min_bins: int = 18
    eq_mass: float = 1e-10
    pin_se: float = 5.0
    gauge: float = 1e-8
    gap_slack: float = 1e-6

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class RunConfig:
    """Which checks to run and with which parameters.

    ``families`` and ``ns`` restrict every check to the listed family tags
    and particle numbers (empty means each check's own default set).
    ``workers`` only affects speed and is not part of the report.
    """

    suite: str = "all"
    families: tuple = ()
    ns: tuple = ()
    t_star: float = 1.0
    r: float = 1.0
    seed: int = 42
    n_paths: int = 100_000
    pinning_paths: int = 10_000
    dt: float = 1e-4
    tolerances: Tolerances = field(default_factory=Tolerances)
    out: str | None = None
    format: str = "json"
    workers: int | None = None
    timings: bool = False

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}; choose from {sorted(SUITES)}")
        fams = tuple(FamilyTag.parse(f).value for f in self.families)
        object.__setattr__(self, "families", fams)
        ns = tuple(int(n) for n in self.ns)
        if any(n < 2 for n in ns):
            raise ValueError("particle numbers must be at least 2")
        object.__setattr__(self, "ns", ns)
        if self.format not in ("json", "csv"):
            raise ValueError("format must be json or csv")
        if not (self.t_star > 0 and self.r > 0 and self.dt > 0):
            raise ValueError("t_star, r and dt must be positive")
        if self.n_paths < 2 or self.pinning_paths < 2:
            raise ValueError("path counts must be at least 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def pick_families(self, default) -> list[str]:
        if not self.families:
            return list(default)
        return [f for f in default if f in self.families]

    def pick_ns(self, default) -> list[int]:
        if not self.ns:
            return list(default)
        return [n for n in default if n in self.ns]

    def describe(self) -> dict:
        """The part of the configuration that determines the report contents."""
        d = asdict(self)
        for key in ("out", "format", "workers", "timings"):
            d.pop(key)
        d["families"] = list(self.families)
        d["ns"] = list(self.ns)
        return d


def default_config(**overrides) -> RunConfig:
    return replace(RunConfig(), **overrides)


@dataclass(frozen=True)
class Record:
    name: str
    paper_anchor: str
    measured: float
    expected: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "paper_anchor": self.paper_anchor,
            "measured": _num(self.measured),
            "expected": _num(self.expected),
            "tolerance": _num(self.tolerance),
            "pass": bool(self.passed),
        }


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _within(name, anchor, measured, expected, tolerance) -> Record:
    ok = bool(abs(measured - expected) < tolerance) if math.isfinite(measured) else False
    return Record(name, anchor, float(measured), float(expected), float(tolerance), ok)


def _below(name, anchor, measured, tolerance) -> Record:
    ok = bool(measured < tolerance) if math.isfinite(measured) else False
    return Record(name, anchor, float(measured), 0.0, float(tolerance), ok)


@dataclass
class Report:
    config: RunConfig
    records: list
    runtime: float = 0.0
    check_times: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        d = {
            "schema": SCHEMA_VERSION,
            "tool": "elliptic-dyson",
            "version": __version__,
            "config": self.config.describe(),
            "environment": environment(),
            "records": [r.as_dict() for r in self.records],
            "summary": {
                "total": len(self.records),
                "passed": sum(r.passed for r in self.records),
                "all_pass": self.all_pass,
            },
        }
        if self.config.timings:
            d["runtime_s"] = self.runtime
            d["check_times_s"] = self.check_times
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "paper_anchor", "measured", "expected", "tolerance", "pass"])
        for r in self.records:
            d = r.as_dict()
            writer.writerow([d["name"], d["paper_anchor"], repr(d["measured"]), repr(d["expected"]), repr(d["tolerance"]), d["pass"]])
        return buf.getvalue()

    def render(self, fmt: str | None = None) -> str:
        fmt = fmt or self.config.format
        return self.to_json() if fmt == "json" else self.to_csv()


def environment() -> dict:
    import numba

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
    }


# ---------------------------------------------------------------------------
# shared helpers


def default_positions(tag: str, n: int, r: float = 1.0) -> tuple:
    """Evenly spread start ``(j - 1/2) pi r / n``; type A uses ``(j - 1/2) 2 pi r / n``."""
    width = 2.0 * math.pi * r if tag == "A" else math.pi * r
    return tuple((j - 0.5) * width / n for j in range(1, n + 1))


def _rng(cfg: RunConfig, salt: int) -> np.random.Generator:
    return np.random.default_rng([int(cfg.seed), salt])


def transition_density(fam, t: float, y, s: float, x, t_star: float = 1.0, r: float = 1.0) -> float:
    """Transition density of the interacting system from ``(s, x)`` to ``(t, y)``.

    The Karlin–McGregor determinant of single-particle interval densities
    multiplied by the ratio of theta-function weights at the two endpoints.
    """
    fam = Family(FamilyTag.parse(fam), len(x)) if not isinstance(fam, Family) else fam
    if not 0 <= s < t < t_star:
        raise ValueError("need 0 <= s < t < t_star")
    bc = fam.default_bc
    if bc is None:
        raise ValueError(f"no interval boundary condition recorded for family {fam.tag.value}")
    clock = ProcessClock(t_star, r)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tau_s = clock.tau(fam.cal_n, s).tau
    tau_t = clock.tau(fam.cal_n, t).tau
    ratio = np.exp(log_weight(fam, tau_t, y, r) - log_weight(fam, tau_s, x, r)).real
    kmlgv = np.linalg.det(p_interval(bc, t - s, y[:, None], x[None, :], r))
    return float(ratio * kmlgv)


def kolmogorov_residual(fam, n: int, sx, ty, h: float = 1e-4, t_star: float = 1.0, r: float = 1.0) -> float:
    """Relative residual of the backward Kolmogorov equation at ``(s, x)``.

    Central differences of step ``h`` in ``s`` and each ``x_j``.  The
    residual is divided by the sum of the magnitudes of the individual terms
    (time derivative, half Laplacian, drift times gradient).
    """
    if not 1e-6 <= h / r <= 1e-2:
        raise ValueError("h must lie in [1e-6, 1e-2] in units of r")
    tag = FamilyTag.parse(fam)
    if tag not in (FamilyTag.B, FamilyTag.C, FamilyTag.D):
        raise ValueError("Kolmogorov equations are known for B, C and D only")
    family = Family(tag, n)
    s, x = sx
    t, y = ty
    x = np.asarray(x, dtype=float)
    if s - h < 0 or s + h >= t:
        raise ValueError("s must be at least h away from 0 and t")
    walls = np.concatenate([x, math.pi * r - x, np.diff(x)])
    if walls.min() < 10 * h:
        raise ValueError("x must stay 10 h away from the walls and the diagonals")

    def p(ss, xx):
        return transition_density(family, t, y, ss, xx, t_star, r)

    p0 = p(s, x)
    dps = (p(s + h, x) - p(s - h, x)) / (2 * h)
    b = drift(Model.for_family("elliptic", tag), s, x, t_star=t_star, r=r)
    lap = 0.0
    adv = 0.0
    scale = abs(dps)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        plus, minus = p(s, x + e), p(s, x - e)
        d1 = (plus - minus) / (2 * h)
        d2 = (plus - 2 * p0 + minus) / (h * h)
        lap += 0.5 * d2
        adv += b[j] * d1
        scale += abs(0.5 * d2) + abs(b[j] * d1)
    residual = -dps - lap - adv
    return abs(residual) / scale if scale > 0 else abs(residual)


def verify_integral_identity(n: int, t: float, t_star: float = 1.0, r: float = 1.0, u=None, quad_order: int | None = None) -> float:
    """Relative residual of the type-D multiple-integral equality.

    The left side integrates the product of reflecting-interval heat kernels
    against the theta-function pair ratios over ``[0, pi r]^n`` with a tensor
    Gauss–Legendre rule; the right side is ``(eta(tau_t) / eta(tau_0))^{n(n-2)}``.
    Raises :class:`SeriesConvergenceError` when halving the rule changes the
    value by more than ``1e-3``.
    """
    if n < 2:
        raise ValueError("need at least two particles")
    if quad_order is None:
        quad_order = 128 if n == 2 else 64
    u = np.asarray(default_positions("D", n, r) if u is None else u, dtype=float)
    fam = Family(FamilyTag.D, n)
    clock = ProcessClock(t_star, r)
    tau0 = clock.tau(fam.cal_n, 0.0).tau
    tau_t = clock.tau(fam.cal_n, t).tau

    def lhs(order):
        nodes, weights = gauss_legendre(0.0, math.pi * r, order)
        grids = np.meshgrid(*([nodes] * n), indexing="ij")
        w = np.ones_like(grids[0])
        for g in np.meshgrid(*([weights] * n), indexing="ij"):
            w = w * g
        f = np.ones_like(w)
        for ell in range(n):
            f = f * p_interval("rr", t, grids[ell], u[ell], r)
        two_pi_r = 2.0 * math.pi * r
        for j in range(n):
            for k in range(j + 1, n):
                for sign in (-1.0, 1.0):
                    num = theta(1, (grids[k] + sign * grids[j]) / two_pi_r, tau_t)
                    den = theta(1, (u[k] + sign * u[j]) / two_pi_r, tau0)
                    f = f * (num / den).real
        return float((f * w).sum())

    value = lhs(quad_order)
    coarse = lhs(quad_order // 2)
    if abs(value - coarse) > 1e-3 * max(1.0, abs(value)):
        raise SeriesConvergenceError("tensor quadrature has not converged")
    rhs = math.exp((n * (n - 2) * (log_dedekind_eta(tau_t) - log_dedekind_eta(tau0))).real)
    return abs(value - rhs) / abs(rhs)


def _fold_images(z: np.ndarray, code: str, width: float):
    """Fold free endpoints into ``[0, width]`` and return the image signs."""
    if code == "rr":
        w = np.mod(z, 2 * width)
        return np.where(w <= width, w, 2 * width - w), np.ones_like(z)
    if code == "aa":
        w = np.mod(z, 2 * width)
        upper = w > width
        return np.where(upper, 2 * width - w, w), np.where(upper, -1.0, 1.0)
    if code == "ar":
        w = np.mod(z, 4 * width)
        y = np.select([w <= width, w <= 2 * width, w <= 3 * width], [w, 2 * width - w, w - 2 * width], 4 * width - w)
        return y, np.where(w <= 2 * width, 1.0, -1.0)
    raise ValueError(f"unsupported boundary code {code}")


# ---------------------------------------------------------------------------
# checks


ANCHOR_FACTOR = "determinant factorization lemma (Rosengren-Schlosser evaluation)"
ANCHOR_QUASI = "theta quasi-periodicity"
ANCHOR_IMAG = "Jacobi imaginary transformations"
ANCHOR_HEAT = "theta heat equation"
ANCHOR_ASYM = "theta asymptotics as Im tau -> infinity"
ANCHOR_INTERP = "elliptic interpolation functions: delta property"
ANCHOR_BIORTH = "interpolation coefficients: biorthogonality with the basis"
ANCHOR_DETRATIO = "interpolation functions as determinant ratios"
ANCHOR_MART = "determinantal martingale normalization"
ANCHOR_KOLM = "backward Kolmogorov equations of types B, C, D"
ANCHOR_INTEGRAL = "multiple-integral equality for type D"
ANCHOR_DENSITY = "correlation kernel vs SDE solution"
ANCHOR_EQ = "trigonometric equilibrium density and relaxation"
ANCHOR_PIN = "pinning configurations at t_star"
ANCHOR_GAUGE = "gauge invariance of the Fredholm determinant"


def check_factorization(cfg: RunConfig) -> list[Record]:
    rng = _rng(cfg, 1)
    out = []
    for tag in cfg.pick_families(ALL_TAGS):
        for n in cfg.pick_ns((2, 3, 4)):
            fam = Family(FamilyTag.parse(tag), n)
            worst = 0.0
            for _ in range(50):
                u = random_config(fam, rng, cfg.r)
                for y in rng.uniform(0.3, 3.0, size=3):
                    tau = 1j * y
                    a = macdonald_det(fam, u, tau, cfg.r)
                    b = factorized_det(fam, u, tau, cfg.r)
                    worst = max(worst, abs(a - b) / abs(b))
            out.append(_below(f"factorization/{tag}/N={n}", ANCHOR_FACTOR, worst, cfg.tolerances.factorization))
    return out


_QUASI_ONE = {0: 1.0, 1: -1.0, 2: -1.0, 3: 1.0}
_QUASI_TAU = {0: -1.0, 1: -1.0, 2: 1.0, 3: 1.0}
_IMAG = {0: (2, np.exp(1j * np.pi / 4)), 1: (1, np.exp(3j * np.pi / 4)), 2: (0, np.exp(1j * np.pi / 4)), 3: (3, np.exp(1j * np.pi / 4))}


def check_theta(cfg: RunConfig) -> list[Record]:
    rng = _rng(cfg, 2)
    tol = cfg.tolerances
    taus = np.array([0.05j, 0.1 + 0.2j, -0.37 + 0.6j, 1.3 + 0.08j, 2.0j, 0.25 + 1.5j])
    v = rng.uniform(-1, 1, 8) + 1j * rng.uniform(-0.3, 0.3, 8)
    out = []
    for kind in range(4):
        worst = 0.0
        for tau in taus:
            base = theta(kind, v, tau)
            shift1 = theta(kind, v + 1, tau)
            shift_tau = theta(kind, v + tau, tau)
            worst = max(worst, np.max(np.abs(shift1 - _QUASI_ONE[kind] * base) / np.abs(base)))
            expect = _QUASI_TAU[kind] * np.exp(-1j * np.pi * (2 * v + tau)) * base
            worst = max(worst, np.max(np.abs(shift_tau - expect) / np.abs(expect)))
        out.append(_below(f"theta/quasi_periodicity/kind={kind}", ANCHOR_QUASI, worst, tol.theta_identity))
    # both sides below are summed directly (Im tau and Im(-1/tau) at least 1/2),
    # so the transformation is not used to evaluate either of them
    direct = [1j, 0.3 + 0.9j, -0.4 + 1.1j, 0.2 + 1.3j]
    for kind in range(4):
        inner, phase = _IMAG[kind]
        worst = 0.0
        for tau in direct:
            lhs = theta(kind, v, tau)
            rhs = phase / np.sqrt(tau) * np.exp(-1j * np.pi * v * v / tau) * theta(inner, v / tau, -1.0 / tau)
            worst = max(worst, np.max(np.abs(lhs - rhs) / np.abs(lhs)))
        out.append(_below(f"theta/imaginary_transformation/kind={kind}", ANCHOR_IMAG, worst, tol.theta_identity))
    h = 1e-4
    for kind in range(4):
        worst = 0.0
        for tau in [0.3j, 0.1 + 0.8j, 1.5j, -0.2 + 0.45j]:
            dtau = (theta(kind, v, tau + h) - theta(kind, v, tau - h)) / (2 * h)
            rhs = theta_derivative(kind, v, tau, 2) / (4j * np.pi)
            worst = max(worst, np.max(np.abs(dtau - rhs) / np.maximum(np.abs(rhs), np.abs(theta(kind, v, tau)))))
        out.append(_below(f"theta/heat_equation_fd/kind={kind}", ANCHOR_HEAT, worst, tol.heat_fd))
    tau = 0.3 + 10j
    vr = rng.uniform(0.05, 0.45, 8)
    approx = {
        0: np.ones_like(vr, dtype=complex),
        1: 2 * np.exp(1j * np.pi * tau / 4) * np.sin(np.pi * vr),
        2: 2 * np.exp(1j * np.pi * tau / 4) * np.cos(np.pi * vr),
        3: np.ones_like(vr, dtype=complex),
    }
    for kind in range(4):
        err = float(np.max(np.abs(theta(kind, vr, tau) - approx[kind]) / np.abs(approx[kind])))
        out.append(_below(f"theta/asymptotics/kind={kind}", ANCHOR_ASYM, err, tol.asymptotic))
    return out


def check_interpolation(cfg: RunConfig) -> list[Record]:
    rng = _rng(cfg, 3)
    tol = cfg.tolerances
    out = []
    for tag in cfg.pick_families(("B", "Bvee", "C", "Cvee", "BC", "D")):
        for n in cfg.pick_ns((2, 3)):
            fam = Family(FamilyTag.parse(tag), n)
            tau0 = ProcessClock(cfg.t_star, cfg.r).tau(fam.cal_n, 0.0).tau
            delta = matrix = ratio = 0.0
            for _ in range(3):
                u = random_config(fam, rng, cfg.r).as_array()
                for j in range(n):
                    vals = phi_interp(fam, u, j, u, tau0, cfg.r)
                    delta = max(delta, float(np.max(np.abs(vals - np.eye(n)[j]))))
                coeffs = phi_coeffs(fam, u, tau0, cfg.r)
                f = np.array([basis_f(fam, k + 1, u, tau0, cfg.r) for k in range(n)])
                matrix = max(matrix, float(np.max(np.abs(f @ coeffs.phi - np.eye(n)))))
                z = rng.uniform(0, math.pi * cfg.r, 4) + 1j * rng.uniform(-0.3, 0.3, 4)
                for j in range(n):
                    a = phi_interp(fam, u, j, z, tau0, cfg.r)
                    b = phi_interp_det(fam, u, j, z, tau0, cfg.r)
                    ratio = max(ratio, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))))
            out.append(_below(f"interpolation/delta/{tag}/N={n}", ANCHOR_INTERP, delta, tol.interp_delta))
            out.append(_below(f"interpolation/biorthogonality/{tag}/N={n}", ANCHOR_BIORTH, matrix, tol.interp_matrix))
            out.append(_below(f"interpolation/determinant_ratio/{tag}/N={n}", ANCHOR_DETRATIO, ratio, tol.interp_det))
    return out


def check_martingale(cfg: RunConfig) -> list[Record]:
    out = []
    salt = 0
    for tag in cfg.pick_families(("B", "C", "D")):
        for n in cfg.pick_ns((2, 3)):
            fam = Family(FamilyTag.parse(tag), n)
            u = np.array(default_positions(tag, n, cfg.r))
            ctx = MartingaleCtx.build(fam, u, cfg.t_star, cfg.r)
            for frac in (0.1, 0.3):
                salt += 1
                t = frac * cfg.t_star
                z = fill_normals(cfg.seed, np.arange(cfg.n_paths), salt, n, purpose=PURPOSE_ENDPOINT)
                y, sign = _fold_images(u + math.sqrt(t) * z, fam.default_bc, math.pi * cfg.r)
                sample = np.prod(sign, axis=1) * ctx.d_mart(t, y)
                mean = float(sample.mean())
                se = float(sample.std(ddof=1) / math.sqrt(sample.size))
                out.append(
                    _within(f"martingale_mean/{tag}/N={n}/t={frac}t*", ANCHOR_MART, mean, 1.0, cfg.tolerances.martingale_se * se)
                )
    return out


def check_kolmogorov(cfg: RunConfig) -> list[Record]:
    rng = _rng(cfg, 5)
    out = []
    h = 1e-4 * cfg.r
    for tag in cfg.pick_families(("B", "C", "D")):
        for n in cfg.pick_ns((2,)):
            fam = Family(FamilyTag.parse(tag), n)
            worst = 0.0
            for _ in range(10):
                s = rng.uniform(0.05, 0.4) * cfg.t_star
                t = s + rng.uniform(0.1, 0.4) * cfg.t_star
                x = random_config(fam, rng, cfg.r, min_gap=0.1 * cfg.r).as_array()
                y = random_config(fam, rng, cfg.r, min_gap=0.1 * cfg.r).as_array()
                res = kolmogorov_residual(tag, n, (s, x), (t, y), h, cfg.t_star, cfg.r)
                worst = max(worst, res)
            out.append(_below(f"kolmogorov_residual/{tag}/N={n}", ANCHOR_KOLM, worst, cfg.tolerances.kolmogorov))
    return out


def check_integral(cfg: RunConfig) -> list[Record]:
    if cfg.families and "D" not in cfg.families:
        return []
    out = []
    for n in cfg.pick_ns((2, 3)):
        tol = cfg.tolerances.integral_n2 if n == 2 else cfg.tolerances.integral_n3
        res = verify_integral_identity(n, 0.2 * cfg.t_star, cfg.t_star, cfg.r)
        out.append(_below(f"integral_identity/D/N={n}", ANCHOR_INTEGRAL, res, tol))
    return out


def check_kernel_vs_mc(cfg: RunConfig) -> list[Record]:
    if cfg.families and "D" not in cfg.families or cfg.ns and 2 not in cfg.ns:
        return []
    n = 2
    u = default_positions("D", n, cfg.r)
    t = 0.3 * cfg.t_star
    spec = SdeSpec(
        Model.ELLIPTIC_D, u, ProcessClock(cfg.t_star, cfg.r), dt=cfg.dt, n_paths=cfg.n_paths, seed=cfg.seed, t_end=t, record_times=(t,)
    )
    ens = simulate(spec, cfg.workers)
    hist = empirical_density(ens, t, 20, (0.0, math.pi * cfg.r))
    ctx = KernelContext.elliptic("D", u, cfg.t_star, cfg.r)
    expected = np.empty(20)
    for i, (a, b) in enumerate(zip(hist.edges[:-1], hist.edges[1:])):
        nodes, weights = gauss_legendre(a, b, 8)
        expected[i] = float(np.dot(weights, density(ctx, t, nodes))) / (b - a)
    z = np.abs(hist.density - expected) / hist.se
    good = int(np.sum(z < cfg.tolerances.density_se))
    passed = good >= cfg.tolerances.density_min_bins
    return [Record("kernel_vs_mc/D/N=2/t=0.3t*/bins_within_4se", ANCHOR_DENSITY, float(good), 20.0, float(cfg.tolerances.density_min_bins), passed)]


def check_relaxation(cfg: RunConfig) -> list[Record]:
    rng = _rng(cfg, 8)
    r = cfg.r
    out = []
    nodes, weights = gauss_legendre(0.0, math.pi * r, 64)
    grid = (np.arange(20) + 0.5) * math.pi * r / 20
    gx, gy = np.meshgrid(grid, grid, indexing="ij")
    horizons = [1.0, 2.0, 4.0, 8.0]
    for tag in cfg.pick_families(("C", "D")):
        for n in cfg.pick_ns((2, 3)):
            mass = float(np.dot(weights, rho_eq_trig(tag, nodes, n, r)))
            out.append(_within(f"equilibrium_mass/{tag}/N={n}", ANCHOR_EQ, mass, float(n), cfg.tolerances.eq_mass))
            fam = Family(FamilyTag.parse(tag), n)
            eq = kernel_eq_trig(tag, 0.5, gx, gy, n, r)
            for c in range(3):
                u = random_config(fam, rng, r).as_array()
                sup = []
                for big_t in horizons:
                    s, t = big_t * r * r, big_t * r * r + 0.5
                    k = kernel_trig(fam, u, s, gx, t, gy, r)
                    sup.append(float(np.max(np.abs(k - eq))))
                ratio = max(b / a for a, b in zip(sup, sup[1:]))
                out.append(
                    Record(f"relaxation_monotone/{tag}/N={n}/config={c}", ANCHOR_EQ, ratio, 0.0, 1.0, bool(ratio < 1.0))
                )
    return out


def check_pinning(cfg: RunConfig) -> list[Record]:
    out = []
    eps = 1e-3 * cfg.t_star
    t_end = cfg.t_star - eps
    for tag in cfg.pick_families(("B", "C", "D")):
        for n in cfg.pick_ns((2,)):
            fam = Family(FamilyTag.parse(tag), n)
            spec = SdeSpec(
                Model.for_family("elliptic", tag),
                default_positions(tag, n, cfg.r),
                ProcessClock(cfg.t_star, cfg.r),
                dt=cfg.dt,
                n_paths=cfg.pinning_paths,
                seed=cfg.seed,
                t_end=t_end,
                record_every=round(t_end / cfg.dt),
            )
            end = simulate(spec, cfg.workers).at(t_end)
            target = fam.pin_targets(cfg.r)
            for j in range(n):
                mean = float(end[:, j].mean())
                se = float(end[:, j].std(ddof=1) / math.sqrt(end.shape[0]))
                out.append(_within(f"pinning/{tag}/N={n}/j={j + 1}", ANCHOR_PIN, mean, float(target[j]), cfg.tolerances.pin_se * se))
    return out


def check_fredholm(cfg: RunConfig) -> list[Record]:
    out = []
    t = 0.3 * cfg.t_star
    r = cfg.r
    intervals = [(0.2 * r, 1.0 * r), (1.0 * r, 2.5 * r), (0.5 * r, 3.0 * r)]
    for tag in cfg.pick_families(("B", "C", "D")):
        for n in cfg.pick_ns((2, 3)):
            ctx = KernelContext.elliptic(tag, default_positions(tag, n, r), cfg.t_star, r)

            def plain(x, y):
                return corr_kernel(ctx, t, x, t, y)

            def gauged(x, y):
                return (y / x) * corr_kernel(ctx, t, x, t, y)

            for a, b in intervals:
                g_plain = fredholm_det_discretized(plain, a, b, 64)
                g_gauge = fredholm_det_discretized(gauged, a, b, 64)
                label = f"{tag}/N={n}/[{a:g},{b:g}]"
                out.append(_below(f"fredholm_gauge/{label}", ANCHOR_GAUGE, abs(g_plain - g_gauge), cfg.tolerances.gauge))
                g_rank = fredholm_gap(ctx, t, (a, b))
                slack = cfg.tolerances.gap_slack
                lo = min(g_plain, g_gauge, g_rank)
                hi = max(g_plain, g_gauge, g_rank)
                ok = lo >= -slack and hi <= 1 + slack
                out.append(Record(f"fredholm_gap_range/{label}", ANCHOR_GAUGE, g_rank, 0.5, 0.5 + slack, bool(ok)))
    return out


SUITES: dict[str, list[Callable[[RunConfig], list[Record]]]] = {
    "identities": [check_factorization, check_theta, check_interpolation],
    "martingale_mc": [check_martingale],
    "kolmogorov": [check_kolmogorov],
    "integral_identity": [check_integral],
    "kernel_vs_mc": [check_kernel_vs_mc],
    "relaxation": [check_relaxation],
    "pinning": [check_pinning],
    "fredholm": [check_fredholm],
}
SUITES["all"] = [c for name in list(SUITES) for c in SUITES[name]]


def run_suite(cfg: RunConfig) -> Report:
    """Run the configured suite; write the report if ``cfg.out`` is set."""
    start = time.perf_counter()
    records: list[Record] = []
    times = {}
    for check in SUITES[cfg.suite]:
        t0 = time.perf_counter()
        records.extend(check(cfg))
        times[check.__name__] = time.perf_counter() - t0
    report = Report(cfg, records, time.perf_counter() - start, times)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(report.render())
    return report
