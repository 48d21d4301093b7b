"""Counter-based Philox4x32-10 generator.

Every random number is a pure function of ``(seed, path, step, node, block)``,
so ensembles can be split across any number of workers, or partially
regenerated, and still reproduce bit for bit.  ``node`` distinguishes the
refinement midpoints of one step (``0`` is the step increment itself) and the
upper half of ``block`` carries a purpose tag.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["philox4x32", "fill_normals", "normals_into", "fill_uniforms", "key_from_seed", "PURPOSE_INCREMENT", "PURPOSE_ENDPOINT", "PURPOSE_START"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_INV32 = 2.0**-32

PURPOSE_INCREMENT = 0
PURPOSE_ENDPOINT = 1
PURPOSE_START = 2


@njit(cache=True, nogil=True)
def _philox(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & _MASK, lo1, (hi0 ^ c3 ^ k1) & _MASK, lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def philox4x32(counter, key):
    """Apply Philox4x32-10 to a 4-word counter and 2-word key (Python ints)."""
    out = _philox(*(np.uint64(c) for c in counter), *(np.uint64(k) for k in key))
    return tuple(int(v) for v in out)


def key_from_seed(seed: int):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


@njit(cache=True, nogil=True)
def normals_into(k0, k1, pid, step, node, purpose, out):
    """Fill the 1-d array ``out`` with the normals of one counter row."""
    ncoord = out.shape[0]
    nblocks = (ncoord + 3) // 4
    for b in range(nblocks):
        tag = np.uint64(b) | (np.uint64(purpose) << np.uint64(16))
        r0, r1, r2, r3 = _philox(np.uint64(pid) & _MASK, np.uint64(step) & _MASK, np.uint64(node) & _MASK, tag, k0, k1)
        u0 = (np.float64(r0) + 0.5) * _INV32
        u1 = (np.float64(r1) + 0.5) * _INV32
        u2 = (np.float64(r2) + 0.5) * _INV32
        u3 = (np.float64(r3) + 0.5) * _INV32
        rad0 = np.sqrt(-2.0 * np.log(u0))
        c = 4 * b
        out[c] = rad0 * np.cos(2.0 * np.pi * u1)
        if c + 1 < ncoord:
            out[c + 1] = rad0 * np.sin(2.0 * np.pi * u1)
        if c + 2 < ncoord:
            rad1 = np.sqrt(-2.0 * np.log(u2))
            out[c + 2] = rad1 * np.cos(2.0 * np.pi * u3)
            if c + 3 < ncoord:
                out[c + 3] = rad1 * np.sin(2.0 * np.pi * u3)


@njit(cache=True, nogil=True)
def _fill_normals(k0, k1, paths, step, node, purpose, out):
    for p in range(out.shape[0]):
        normals_into(k0, k1, paths[p], step, node, purpose, out[p])


@njit(cache=True, nogil=True)
def _fill_uniforms(k0, k1, paths, step, node, purpose, out):
    npaths, ncoord = out.shape
    nblocks = (ncoord + 3) // 4
    for p in range(npaths):
        pid = np.uint64(paths[p])
        for b in range(nblocks):
            tag = np.uint64(b) | (np.uint64(purpose) << np.uint64(16))
            r = _philox(pid & _MASK, np.uint64(step) & _MASK, np.uint64(node) & _MASK, tag, k0, k1)
            for i in range(4):
                c = 4 * b + i
                if c < ncoord:
                    out[p, c] = (np.float64(r[i]) + 0.5) * _INV32


def fill_normals(seed: int, paths, step: int, ncoord: int, node: int = 0, purpose: int = PURPOSE_INCREMENT):
    """Standard normals of shape ``(len(paths), ncoord)`` keyed by the counter words."""
    k0, k1 = key_from_seed(seed)
    paths = np.ascontiguousarray(paths, dtype=np.int64)
    out = np.empty((paths.size, ncoord))
    _fill_normals(k0, k1, paths, np.int64(step), np.int64(node), np.int64(purpose), out)
    return out


def fill_uniforms(seed: int, paths, step: int, ncoord: int, node: int = 0, purpose: int = PURPOSE_START):
    """Uniforms in ``(0, 1)`` of shape ``(len(paths), ncoord)``."""
    k0, k1 = key_from_seed(seed)
    paths = np.ascontiguousarray(paths, dtype=np.int64)
    out = np.empty((paths.size, ncoord))
    _fill_uniforms(k0, k1, paths, np.int64(step), np.int64(node), np.int64(purpose), out)
    return out
