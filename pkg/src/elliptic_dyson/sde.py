"""Euler–Maruyama simulation of the elliptic, trigonometric and rational Dyson models.

Each step proposes ``x + b(t, x) dt + dW`` and folds the result at
reflecting walls.  A proposal that leaves the Weyl chamber, crosses an
absorbing wall, comes within the pole guard of a drift singularity or (type
A) moves the centre of mass across a pole of the collective term is not
accepted: the step is split at a Brownian-bridge midpoint and the two halves
are retried, recursively, up to ``MAX_HALVINGS`` levels.  Paths that still
fail keep their previous state, get a ``failed`` event and are flagged.

Random increments come from :mod:`elliptic_dyson.rng`, keyed by
``(seed, path, step, node)``, so the output does not depend on how paths are
split into chunks or across worker threads.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .errors import EnsembleDegradedError, PoleProximityError
from .kernels import kernel_eq_trig, rho_eq_trig
from .rng import PURPOSE_INCREMENT, PURPOSE_START, fill_normals, fill_uniforms, key_from_seed, normals_into
from .root_systems import Config, Family, FamilyTag
from .special_fn import DEFAULT_POLE_GUARD, ProcessClock

__all__ = [
    "Model",
    "SdeSpec",
    "PathEnsemble",
    "Histogram",
    "EVENT_KINDS",
    "drift",
    "simulate",
    "empirical_density",
    "sample_equilibrium",
    "threads_from_env",
]

MAX_HALVINGS = 20
DEGRADED_FRACTION = 0.01
CHUNK_PATHS = 4096
DT_GUARD_FACTOR = 0.01
THREADS_ENV = "ELLIPTIC_DYSON_THREADS"
FRAME_MAGIC = b"EDYSPATH"
FRAME_VERSION = 1

# status codes of a proposed step, also used as event kinds
OK, ORDER, WALL, POLE, CELL, FAILED = 0, 1, 2, 3, 4, 5
EVENT_KINDS = {ORDER: "order_retry", WALL: "wall_retry", POLE: "pole_retry", CELL: "cell_retry", FAILED: "failed"}

# boundary behaviour codes
_NONE, _ABSORB, _REFLECT = 0, 1, 2


class Model(str, Enum):
    ELLIPTIC_A = "EllipticA"
    ELLIPTIC_B = "EllipticB"
    ELLIPTIC_C = "EllipticC"
    ELLIPTIC_D = "EllipticD"
    TRIG_A = "TrigA"
    TRIG_B = "TrigB"
    TRIG_C = "TrigC"
    TRIG_D = "TrigD"
    RATIONAL_A = "RationalA"
    RATIONAL_C = "RationalC"
    RATIONAL_D = "RationalD"

    @classmethod
    def parse(cls, text) -> "Model":
        if isinstance(text, cls):
            return text
        for m in cls:
            if m.value.lower() == str(text).lower():
                return m
        raise ValueError(f"unknown model {text!r}")

    @property
    def code(self) -> int:
        return list(Model).index(self)

    @property
    def level(self) -> str:
        return self.value[:-1].lower()

    @property
    def tag(self) -> FamilyTag:
        return FamilyTag(self.value[-1])

    @property
    def walls(self) -> tuple[int, int]:
        """Behaviour at ``0`` and at ``pi r`` (rational models have no upper wall)."""
        tag = self.tag
        if tag is FamilyTag.A:
            return _NONE, _NONE
        if self.level == "rational":
            return (_ABSORB if tag is FamilyTag.C else _REFLECT), _NONE
        return {
            FamilyTag.B: (_ABSORB, _REFLECT),
            FamilyTag.C: (_ABSORB, _ABSORB),
            FamilyTag.D: (_REFLECT, _REFLECT),
        }[tag]

    @classmethod
    def for_family(cls, level: str, tag) -> "Model":
        return cls.parse(level.capitalize() + FamilyTag.parse(tag).value)


def threads_from_env(default: int | None = None) -> int:
    """Worker cap from ``ELLIPTIC_DYSON_THREADS``; ``default`` (the CPU count) when unset."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default if default is not None else (os.cpu_count() or 1)
    value = int(raw)
    if value < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer")
    return value


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True, nogil=True)
def _a_real(x, y, period):
    """``A(x)`` for real ``x`` at nome ``tau = i y``; NaN exactly at a pole."""
    v = x / period
    v -= math.floor(v)
    if v == 0.0:
        return np.nan
    if y >= 0.5:
        # sin and cos of (2n - 1) pi v by rotating through 2 pi v
        sk = math.sin(math.pi * v)
        ck = math.cos(math.pi * v)
        s2 = 2.0 * sk * ck
        c2 = ck * ck - sk * sk
        s0 = 0.0
        s1 = 0.0
        n = 1
        while True:
            expo = math.pi * y * n * (n - 1)
            if n > 1 and expo > 40.0:
                break
            c = math.exp(-expo)
            if n % 2 == 0:
                c = -c
            s0 += c * sk
            s1 += c * (2 * n - 1) * math.pi * ck
            sk, ck = sk * c2 + ck * s2, ck * c2 - sk * s2
            n += 1
        return s1 / (s0 * period)
    # Poisson-resummed series: theta1 is proportional to
    # sum_m (-1)^m exp(-pi (v - m - 1/2)^2 / y), terms scaled by m = 0
    w0 = v - 0.5
    if v < 0.5:
        total = -math.expm1(-2.0 * math.pi * v / y)
        skip = -1
    else:
        total = -math.expm1(-2.0 * math.pi * (1.0 - v) / y)
        skip = 1
    deriv = -2.0 * math.pi * w0 / y
    for m in range(-4, 5):
        if m == 0:
            continue
        wm = v - m - 0.5
        arg = math.pi * (wm * wm - w0 * w0) / y
        if arg > 40.0 and m != skip:
            continue
        g = math.exp(-arg)
        sgn = -1.0 if m % 2 != 0 else 1.0
        deriv += sgn * (-2.0 * math.pi * wm / y) * g
        if m != skip:
            total += sgn * g
    return deriv / (total * period)


@njit(cache=True, nogil=True)
def _pair(level, z, y, period, r):
    if level == 0:
        return _a_real(z, y, period)
    if level == 1:
        return 1.0 / (2.0 * r * math.tan(z / (2.0 * r)))
    return 1.0 / z


@njit(cache=True, nogil=True)
def _drift_into(code, x, t, prm, out):
    """Write the drift at ``(t, x)`` into ``out``; return a status code."""
    t_star, r, beta, kappa, cal_n, guard = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5]
    n = x.shape[0]
    level = code // 4 if code < 8 else 2
    tag = code % 4 if code < 8 else (0, 2, 3)[code - 8]
    period = 2.0 * math.pi * r
    y = 0.0
    if level == 0:
        y = cal_n * (t_star - t) / (2.0 * math.pi * r * r)
    tol = guard * period
    for j in range(n):
        out[j] = 0.0
    # pair terms, each evaluated once: the pair functions are odd
    for j in range(n):
        for k in range(j + 1, n):
            d = x[j] - x[k]
            if abs(d) < tol:
                return POLE
            a = _pair(level, d, y, period, r)
            out[j] += a
            out[k] -= a
            if tag != 0:
                s = x[j] + x[k]
                if level < 2 and abs(s - period) < tol:
                    return POLE
                if abs(s) < tol:
                    return POLE
                b = _pair(level, s, y, period, r)
                out[j] += b
                out[k] += b
    if tag == 0:
        half_beta = beta / 2.0
        for j in range(n):
            out[j] *= half_beta
        if level < 2:
            s = 0.0
            for j in range(n):
                s += x[j]
            if level == 0:
                z = s - kappa
                zz = z - period * math.floor(z / period + 0.5)
                if abs(zz) < tol:
                    return POLE
                c = _a_real(z, y, period)
            else:
                c = -math.tan(s / (2.0 * r)) / (2.0 * r)
            for j in range(n):
                out[j] += half_beta * c
    elif tag == 1:
        for j in range(n):
            if x[j] < tol:
                return POLE
            out[j] += _pair(level, x[j], y, period, r)
    elif tag == 2:
        for j in range(n):
            if x[j] < tol or (level < 2 and abs(x[j] - math.pi * r) < tol):
                return POLE
            if level == 0:
                out[j] += 2.0 * _a_real(2.0 * x[j], y, period)
            elif level == 1:
                out[j] += 1.0 / (r * math.tan(x[j] / r))
            else:
                out[j] += 1.0 / x[j]
    for j in range(n):
        if not math.isfinite(out[j]):
            return POLE
    return OK


@njit(cache=True, nogil=True)
def _cell(code, x, prm):
    """Index of the pole cell of the collective type-A term (0 for other models)."""
    if code != 0 and code != 4:
        return 0.0
    r = prm[1]
    s = 0.0
    for j in range(x.shape[0]):
        s += x[j]
    if code == 0:
        return math.floor((s - prm[3]) / (2.0 * math.pi * r))
    return math.floor((s / (2.0 * r) - 0.5 * math.pi) / math.pi)


@njit(cache=True, nogil=True)
def _propose_one(code, lo, hi, x0, t, dt, dw, prm, drift, x1):
    st = _drift_into(code, x0, t, prm, drift)
    if st != OK:
        return st
    n = x0.shape[0]
    wall = math.pi * prm[1]
    tol = prm[5] * 2.0 * math.pi * prm[1]
    for j in range(n):
        z = x0[j] + drift[j] * dt + dw[j]
        if lo == _REFLECT and hi == _REFLECT:
            z = z - 2.0 * wall * math.floor(z / (2.0 * wall))
            if z > wall:
                z = 2.0 * wall - z
        else:
            if hi == _REFLECT and z > wall:
                z = 2.0 * wall - z
            if lo == _REFLECT and z < 0.0:
                z = -z
        if not math.isfinite(z):
            st = POLE
        elif lo == _ABSORB and z < tol:
            st = WALL
        elif hi == _ABSORB and z > wall - tol:
            st = WALL
        x1[j] = z
    if st != OK:
        return st
    for j in range(n - 1):
        if not x1[j + 1] - x1[j] > tol:
            return ORDER
    if _cell(code, x1, prm) != _cell(code, x0, prm):
        return CELL
    return OK


@njit(cache=True, nogil=True)
def _step_batch(code, lo, hi, x0, t, dt, dw, prm, x1, status):
    """Propose one step for every row of ``x0`` with given increments ``dw``."""
    drift = np.empty(x0.shape[1])
    for p in range(x0.shape[0]):
        status[p] = _propose_one(code, lo, hi, x0[p], t, dt, dw[p], prm, drift, x1[p])


@njit(cache=True, nogil=True)
def _step_live(code, lo, hi, x, ids, live, k0, k1, step, t, dt, prm, status):
    """Main step: draw increments and move accepted rows of ``x`` in place.

    Rows that fail keep their position and a non-zero ``status``; the caller
    regenerates their increments from the same counters and refines them.
    """
    n = x.shape[1]
    drift = np.empty(n)
    dw = np.empty(n)
    x1 = np.empty(n)
    sq = math.sqrt(dt)
    nbad = 0
    for i in range(live.shape[0]):
        p = live[i]
        normals_into(k0, k1, ids[p], step, 0, PURPOSE_INCREMENT, dw)
        for j in range(n):
            dw[j] *= sq
        st = _propose_one(code, lo, hi, x[p], t, dt, dw, prm, drift, x1)
        status[i] = st
        if st == OK:
            for j in range(n):
                x[p, j] = x1[j]
        else:
            nbad += 1
    return nbad


# ---------------------------------------------------------------------------
# specification and results


@dataclass(frozen=True)
class SdeSpec:
    """Everything that determines a simulated ensemble.

    ``u`` is a :class:`Config` or a plain increasing sequence.  Trigonometric
    and rational models ignore the clock and may use ``t_star = inf``.
    Recorded frames are every ``record_every`` steps (chosen automatically
    for about 100 frames when ``None``) together with ``record_times``.
    """

    model: Model
    u: tuple
    clock: ProcessClock = field(default_factory=lambda: ProcessClock(math.inf, 1.0))
    dt: float = 1e-4
    n_paths: int = 100_000
    seed: int = 0
    t_end: float = 0.5
    beta: float = 2.0
    start: str = "fixed"
    record_every: int | None = None
    record_times: tuple = ()
    enforce_dt_guard: bool = True
    allow_degraded: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        u = self.u.u if isinstance(self.u, Config) else self.u
        u = tuple(float(v) for v in u)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "record_times", tuple(float(v) for v in self.record_times))
        model = self.model
        if model.tag is not FamilyTag.A and self.beta != 2.0:
            raise ValueError("only beta = 2 is defined for families B, C and D")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if model is Model.ELLIPTIC_D and len(u) < 2:
            # the nome carries cal_n = 2(N - 1), which vanishes for one particle
            raise ValueError("EllipticD needs at least two particles")
        if len(u) < 1 or any(b <= a for a, b in zip(u, u[1:])):
            raise ValueError("initial positions must be strictly increasing")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError("n_paths must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if model.level == "elliptic":
            if not math.isfinite(self.clock.t_star):
                raise ValueError("elliptic models need a finite t_star")
            if not self.t_end < self.clock.t_star:
                raise ValueError("t_end must be earlier than t_star")
        lo, hi = model.walls
        if model.tag is not FamilyTag.A:
            upper = math.pi * self.clock.r if model.level != "rational" else math.inf
            if u[0] < 0 or (lo == _ABSORB and u[0] == 0) or u[-1] > upper or (hi == _ABSORB and u[-1] == upper):
                raise ValueError("initial positions outside the state space")
        if self.start not in ("fixed", "equilibrium"):
            raise ValueError("start must be 'fixed' or 'equilibrium'")
        if self.start == "equilibrium" and not (model.level == "trig" and model.tag in (FamilyTag.C, FamilyTag.D)):
            raise ValueError("equilibrium starts exist for TrigC and TrigD only")
        steps = round(self.t_end / self.dt)
        if steps < 1 or abs(steps * self.dt - self.t_end) > 1e-9 * max(self.t_end, self.dt):
            raise ValueError("t_end must be a positive multiple of dt")
        for tr in self.record_times:
            k = round(tr / self.dt)
            if not 0 <= k <= steps or abs(k * self.dt - tr) > 1e-9 * max(tr, self.dt):
                raise ValueError(f"record time {tr} is not on the time grid")
        if self.enforce_dt_guard and len(u) > 1 and self.start == "fixed":
            gap = min(b - a for a, b in zip(u, u[1:]))
            if not self.dt < DT_GUARD_FACTOR * gap * gap:
                raise ValueError(
                    f"dt={self.dt} violates the guard dt < {DT_GUARD_FACTOR} * gap^2 = {DT_GUARD_FACTOR * gap * gap:.3e}"
                )

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def r(self) -> float:
        return self.clock.r

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)

    @property
    def family(self) -> Family:
        return Family(self.model.tag, self.n)

    def record_steps(self) -> np.ndarray:
        steps = self.n_steps
        every = self.record_every or max(1, steps // 100)
        grid = set(range(0, steps + 1, every)) | {steps}
        grid |= {round(tr / self.dt) for tr in self.record_times}
        return np.array(sorted(grid), dtype=np.int64)

    def params(self) -> np.ndarray:
        fam_kappa = Family(FamilyTag.A, self.n).kappa(self.r) if self.model.tag is FamilyTag.A else 0.0
        cal_n = Family(self.model.tag, self.n).cal_n if self.model.level == "elliptic" else 0.0
        t_star = self.clock.t_star if math.isfinite(self.clock.t_star) else 0.0
        return np.array([t_star, self.r, self.beta, fam_kappa, float(cal_n), DEFAULT_POLE_GUARD])

    def canonical(self) -> dict:
        return {
            "model": self.model.value,
            "u": [repr(v) for v in self.u],
            "t_star": repr(self.clock.t_star),
            "r": repr(self.r),
            "dt": repr(self.dt),
            "n_paths": int(self.n_paths),
            "seed": int(self.seed),
            "t_end": repr(self.t_end),
            "beta": repr(self.beta),
            "start": self.start,
            "record_steps": self.record_steps().tolist(),
        }

    def digest(self) -> bytes:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).digest()


_EVENT_DTYPE = np.dtype([("path", "<i8"), ("step", "<i8"), ("kind", "<i4"), ("depth", "<i4")])


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    se: np.ndarray
    n_paths: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def mass(self) -> float:
        return float((self.density * np.diff(self.edges)).sum())


@dataclass(frozen=True)
class PathEnsemble:
    """Recorded paths ``paths[path, frame, particle]`` at ``times[frame]``.

    ``events`` is a structured array (path, step, kind, depth) sorted by path
    and step; ``flagged`` marks paths with an unresolved step.
    """

    spec: SdeSpec
    times: np.ndarray
    paths: np.ndarray
    events: np.ndarray
    flagged: np.ndarray

    @property
    def seed(self) -> int:
        return int(self.spec.seed)

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())

    def frame(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(abs(t), self.spec.dt):
            raise ValueError(f"time {t} is not a recorded frame")
        return idx

    def at(self, t: float) -> np.ndarray:
        return self.paths[:, self.frame(t), :]

    def count_events(self, kind: int | None = None) -> int:
        if kind is None:
            return int(self.events.size)
        return int((self.events["kind"] == kind).sum())

    def to_bytes(self) -> bytes:
        """Binary frame: header, then little-endian float64 times and positions.

        Header layout: magic, u32 version, 32-byte spec digest, u64 seed, u64
        paths, u64 frames, u64 particles, u64 events.  The body is followed by
        the event records and one byte per path for the flag.
        """
        n_paths, n_frames, n = self.paths.shape
        head = FRAME_MAGIC + struct.pack("<I", FRAME_VERSION) + self.spec.digest()
        head += struct.pack("<QQQQQ", self.seed, n_paths, n_frames, n, self.events.size)
        body = self.times.astype("<f8").tobytes() + self.paths.astype("<f8").tobytes()
        tail = self.events.astype(_EVENT_DTYPE).tobytes() + self.flagged.astype(np.uint8).tobytes()
        return head + body + tail

    @staticmethod
    def read_frame(blob: bytes) -> dict:
        """Decode :meth:`to_bytes` output into plain arrays."""
        if blob[:8] != FRAME_MAGIC:
            raise ValueError("not a path-ensemble frame")
        (version,) = struct.unpack_from("<I", blob, 8)
        if version != FRAME_VERSION:
            raise ValueError(f"unsupported frame version {version}")
        digest = blob[12:44]
        seed, n_paths, n_frames, n, n_events = struct.unpack_from("<QQQQQ", blob, 44)
        off = 84
        times = np.frombuffer(blob, "<f8", n_frames, off)
        off += 8 * n_frames
        paths = np.frombuffer(blob, "<f8", n_paths * n_frames * n, off).reshape(n_paths, n_frames, n)
        off += 8 * paths.size
        events = np.frombuffer(blob, _EVENT_DTYPE, n_events, off)
        off += _EVENT_DTYPE.itemsize * n_events
        flagged = np.frombuffer(blob, np.uint8, n_paths, off).astype(bool)
        return {"digest": digest, "seed": seed, "times": times, "paths": paths, "events": events, "flagged": flagged}

    def to_csv(self, max_rows: int = 1_000_000) -> str:
        """Long-format CSV ``path,time,particle,position``; refuses huge ensembles."""
        n_paths, n_frames, n = self.paths.shape
        if n_paths * n_frames * n > max_rows:
            raise ValueError("ensemble too large for CSV; use to_bytes")
        buf = io.StringIO()
        buf.write("path,time,particle,position\n")
        for p in range(n_paths):
            for f in range(n_frames):
                for j in range(n):
                    buf.write(f"{p},{self.times[f]!r},{j + 1},{self.paths[p, f, j]!r}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# public operations


def drift(model, t: float, x, *, t_star: float = math.inf, r: float = 1.0, beta: float = 2.0) -> np.ndarray:
    """Drift vector of ``model`` at time ``t`` and ordered position ``x``."""
    model = Model.parse(model)
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("x must be a non-empty vector")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")
    if model.level == "elliptic" and not t < t_star:
        raise ValueError("elliptic drift needs t < t_star")
    kappa = Family(FamilyTag.A, x.size).kappa(r) if model.tag is FamilyTag.A else 0.0
    cal_n = Family(model.tag, x.size).cal_n if model.level == "elliptic" else 0.0
    prm = np.array([t_star if math.isfinite(t_star) else 0.0, r, beta, kappa, float(cal_n), DEFAULT_POLE_GUARD])
    out = np.empty(x.size)
    if _drift_into(model.code, x, float(t), prm, out) != OK:
        raise PoleProximityError("drift evaluated within the pole guard")
    return out


class _Chunk:
    """Simulation state for a contiguous block of paths."""

    def __init__(self, spec: SdeSpec, start: int, stop: int, x0: np.ndarray):
        self.spec = spec
        self.ids = np.arange(start, stop, dtype=np.int64)
        self.code = spec.model.code
        self.lo, self.hi = spec.model.walls
        self.prm = spec.params()
        self.x = np.ascontiguousarray(x0, dtype=float).copy()
        self.flagged = np.zeros(self.ids.size, dtype=bool)
        self.events: list[tuple[int, int, int, int]] = []

    def _propose(self, x, t, dt, dw):
        x1 = np.empty_like(x)
        status = np.empty(x.shape[0], dtype=np.int64)
        _step_batch(self.code, self.lo, self.hi, x, t, dt, dw, self.prm, x1, status)
        return x1, status

    def _refine(self, rows, x, t, dt, dw, step, node, depth):
        """Retry the step ``[t, t + dt]`` for ``rows`` as two bridge-split halves."""
        if depth > MAX_HALVINGS:
            return x, np.zeros(rows.size, dtype=bool)
        n = x.shape[1]
        z = fill_normals(self.spec.seed, self.ids[rows], step, n, node=node)
        dw1 = 0.5 * dw + math.sqrt(dt / 4.0) * z
        dw2 = dw - dw1
        half = 0.5 * dt
        mid, ok = self._advance(rows, x, t, half, dw1, step, 2 * node, depth)
        end = x.copy()
        good = np.flatnonzero(ok)
        if good.size:
            e, ok2 = self._advance(rows[good], mid[good], t + half, half, dw2[good], step, 2 * node + 1, depth)
            end[good] = e
            ok[good] = ok2
        return end, ok

    def _advance(self, rows, x, t, dt, dw, step, node, depth):
        x1, status = self._propose(x, t, dt, dw)
        ok = status == OK
        bad = np.flatnonzero(~ok)
        if bad.size:
            for b in bad:
                self.events.append((int(self.ids[rows[b]]), step, int(status[b]), depth))
            fixed, ok_b = self._refine(rows[bad], x[bad], t, dt, dw[bad], step, node, depth + 1)
            x1[bad] = fixed
            ok[bad] = ok_b
        return x1, ok

    def run(self, record: np.ndarray) -> np.ndarray:
        spec = self.spec
        n = spec.n
        out = np.empty((self.ids.size, record.size, n))
        frame = 0
        if record[0] == 0:
            out[:, 0] = self.x
            frame = 1
        rows = np.arange(self.ids.size)
        k0, k1 = key_from_seed(spec.seed)
        sq = math.sqrt(spec.dt)
        for step in range(spec.n_steps):
            t = step * spec.dt
            live = rows[~self.flagged] if self.flagged.any() else rows
            status = np.empty(live.size, dtype=np.int64)
            nbad = _step_live(self.code, self.lo, self.hi, self.x, self.ids, live, k0, k1, step, t, spec.dt, self.prm, status)
            if nbad:
                bad = live[status != OK]
                for p, st in zip(bad, status[status != OK]):
                    self.events.append((int(self.ids[p]), step, int(st), 0))
                dw = sq * fill_normals(spec.seed, self.ids[bad], step, n)
                x1, ok = self._refine(bad, self.x[bad], t, spec.dt, dw, step, 1, 1)
                failed = bad[~ok]
                for p in failed:
                    self.events.append((int(self.ids[p]), step, FAILED, MAX_HALVINGS))
                self.flagged[failed] = True
                self.x[bad[ok]] = x1[ok]
            while frame < record.size and record[frame] == step + 1:
                out[:, frame] = self.x
                frame += 1
        return out


def sample_equilibrium(model, n: int, n_paths: int, seed: int, r: float = 1.0) -> np.ndarray:
    """Exact draws of the ``n``-point equilibrium configuration of TrigC or TrigD.

    Rejection sampling from uniform proposals on ``[0, pi r]^n`` against the
    joint density ``det[K(x_i, x_j)] / n!`` with the Hadamard bound
    ``prod K(x_i, x_i) <= max(rho)^n``.  Attempt ``k`` of path ``p`` uses the
    Philox counter ``(p, k)`` so the result is reproducible.
    """
    model = Model.parse(model)
    tag = model.tag
    if model.level != "trig" or tag not in (FamilyTag.C, FamilyTag.D):
        raise ValueError("equilibrium sampling exists for TrigC and TrigD only")
    grid = np.linspace(0.0, math.pi * r, 4001)
    rho_max = float(rho_eq_trig(tag.value, grid, n, r).max()) * 1.001
    bound = rho_max**n
    out = np.empty((n_paths, n))
    pending = np.arange(n_paths, dtype=np.int64)
    attempt = 0
    while pending.size:
        u = fill_uniforms(seed, pending, attempt, n + 1, purpose=PURPOSE_START)
        x = np.sort(u[:, :n] * math.pi * r, axis=1)
        kmat = kernel_eq_trig(tag.value, 0.0, x[:, :, None], x[:, None, :], n, r)
        dens = np.linalg.det(kmat)
        accept = u[:, n] * bound < dens
        out[pending[accept]] = x[accept]
        pending = pending[~accept]
        attempt += 1
        if attempt > 1_000_000:
            raise RuntimeError("equilibrium rejection sampler did not terminate")
    return out


def simulate(spec: SdeSpec, workers: int | None = None) -> PathEnsemble:
    """Run the ensemble described by ``spec``.

    ``workers`` defaults to the CPU count and is capped by the
    ``ELLIPTIC_DYSON_THREADS`` environment variable.  The result does not
    depend on the worker count.
    """
    cap = threads_from_env()
    workers = cap if workers is None else min(int(workers), cap)
    if workers < 1:
        raise ValueError("workers must be positive")
    record = spec.record_steps()
    if spec.start == "equilibrium":
        x0 = sample_equilibrium(spec.model, spec.n, spec.n_paths, spec.seed, spec.r)
    else:
        x0 = np.broadcast_to(np.array(spec.u), (spec.n_paths, spec.n))
    bounds = list(range(0, spec.n_paths, CHUNK_PATHS)) + [spec.n_paths]
    chunks = [_Chunk(spec, a, b, x0[a:b]) for a, b in zip(bounds, bounds[1:])]
    if workers == 1 or len(chunks) == 1:
        results = [c.run(record) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: c.run(record), chunks))
    paths = np.concatenate(results, axis=0)
    flagged = np.concatenate([c.flagged for c in chunks])
    ev = sorted(e for c in chunks for e in c.events)
    events = np.array(ev, dtype=_EVENT_DTYPE) if ev else np.zeros(0, dtype=_EVENT_DTYPE)
    ens = PathEnsemble(spec, record * spec.dt, paths, events, flagged)
    if not spec.allow_degraded and flagged.sum() > DEGRADED_FRACTION * spec.n_paths:
        err = EnsembleDegradedError(f"{int(flagged.sum())} of {spec.n_paths} paths flagged")
        err.ensemble = ens
        raise err
    return ens


def empirical_density(ens: PathEnsemble, t: float, bins=20, domain: tuple | None = None) -> Histogram:
    """One-point density histogram at recorded time ``t``, normalised to mass ``N``.

    The standard error of each bin comes from the per-path particle counts in
    that bin.  Flagged paths are kept; they are rare by construction.
    """
    x = ens.at(t)
    n_paths, n = x.shape
    if domain is None:
        if ens.spec.model.tag is not FamilyTag.A and ens.spec.model.level != "rational":
            domain = (0.0, math.pi * ens.spec.r)
        else:
            domain = (float(x.min()), float(np.nextafter(x.max(), np.inf)))
    edges = np.linspace(domain[0], domain[1], bins + 1) if np.ndim(bins) == 0 else np.asarray(bins, dtype=float)
    if np.any(x < edges[0]) or np.any(x > edges[-1]):
        raise ValueError("positions outside the histogram range")
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, edges.size - 2)
    counts = np.zeros((n_paths, edges.size - 1))
    for j in range(n):
        counts[np.arange(n_paths), idx[:, j]] += 1.0
    width = np.diff(edges)
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(n_paths) if n_paths > 1 else np.zeros_like(mean)
    return Histogram(edges, mean / width, se / width, n_paths)
