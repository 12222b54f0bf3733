"""Counter-based generation of projection entries and Cauchy samples.

Every draw is a pure function of ``(seed, i, j)``: a 64-bit key is formed by
chaining the SplitMix64 finalizer over the seed, the row counter and the
column counter, and its top 52 bits become a uniform on the open interval
(0, 1). Nothing is stateful, so the projection matrix can be regenerated from
a sketch header and Monte Carlo replicates can be produced in any order.

``GENERATOR_VERSION`` is written into sketch files; bump it whenever the
mixing or the transforms below change.
"""

import math
import os
from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from .exceptions import InvalidGeneratorError, NonPositiveScaleError

GENERATOR_VERSION = 1
GENERATOR_IDS = {"cauchy": 1, "normal": 2, "sparse": 3}
GENERATOR_TAGS = {v: k for k, v in GENERATOR_IDS.items()}

_M64 = (1 << 64) - 1
# Column offsets keep every generator on its own keys.
_NORMAL_STRIDE_A = np.uint64(1 << 61)
_NORMAL_STRIDE_B = np.uint64(2 << 61)
_SPARSE_STRIDE = np.uint64(3 << 61)

_C0 = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xD1B54A32D192ED03)
_C2 = np.uint64(0x8CB92BA72F3D8DD7)
_C3 = np.uint64(0xABC98388FB8FAC03)
_C4 = np.uint64(0xF1357AEA2E62A9C5)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_INV52 = 2.0 ** -52


if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "workqueue"


def _configure_threads():
    cap = os.environ.get("CAUCHY_SKETCH_THREADS")
    if cap:
        try:
            nb.set_num_threads(max(1, min(int(cap), nb.config.NUMBA_NUM_THREADS)))
        except ValueError:
            pass


_configure_threads()


@nb.njit(inline="always", cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@nb.njit(inline="always", cache=True)
def _row_state(seed, i):
    h = _mix64(seed + _C0)
    return _mix64(h ^ (i * _C1 + _C2))


@nb.njit(inline="always", cache=True)
def _u01_from_row(h, j):
    z = _mix64(h ^ (j * _C3 + _C4))
    return (float(z >> _S12) + 0.5) * _INV52


@nb.njit(inline="always", cache=True)
def _cauchy_from_row(h, j):
    return math.tan(math.pi * (_u01_from_row(h, j) - 0.5))


@nb.njit(inline="always", cache=True)
def _normal_from_row(h, j):
    u1 = _u01_from_row(h, j + _NORMAL_STRIDE_A)
    u2 = _u01_from_row(h, j + _NORMAL_STRIDE_B)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@nb.njit(inline="always", cache=True)
def _sparse_from_row(h, j, s):
    u = _u01_from_row(h, j + _SPARSE_STRIDE)
    if u < 0.5 / s:
        return math.sqrt(s)
    if u < 1.0 / s:
        return -math.sqrt(s)
    return 0.0


@nb.njit(inline="always", cache=True)
def _entry_from_row(gen_id, s, h, j):
    if gen_id == 1:
        return _cauchy_from_row(h, j)
    if gen_id == 2:
        return _normal_from_row(h, j)
    return _sparse_from_row(h, j, s)


@nb.njit(parallel=True, cache=True)
def _uniform_keys(seed, i, j):
    out = np.empty(j.size)
    for t in nb.prange(j.size):
        out[t] = _u01_from_row(_row_state(seed, i[t]), j[t])
    return out


@nb.njit(parallel=True, cache=True)
def _entries_keys(gen_id, s, seed, i, j):
    out = np.empty(j.size)
    for t in nb.prange(j.size):
        out[t] = _entry_from_row(gen_id, s, _row_state(seed, i[t]), j[t])
    return out


@nb.njit(parallel=True, cache=True)
def _cauchy_block(seed, r0, n_rows, k, d):
    out = np.empty((n_rows, k))
    for r in nb.prange(n_rows):
        h = _row_state(seed, np.uint64(r0 + r))
        for j in range(k):
            out[r, j] = d * _cauchy_from_row(h, np.uint64(j))
    return out


@nb.njit(parallel=True, cache=True)
def _entry_block(gen_id, s, seed, r0, n_rows, k):
    out = np.empty((n_rows, k))
    for r in nb.prange(n_rows):
        h = _row_state(seed, np.uint64(r0 + r))
        for j in range(k):
            out[r, j] = _entry_from_row(gen_id, s, h, np.uint64(j))
    return out


@dataclass(frozen=True)
class GeneratorKind:
    """Distribution of the projection entries.

    ``tag`` is ``"cauchy"``, ``"normal"`` or ``"sparse"``; ``s`` is the
    inverse density of the sparse (+-sqrt(s), 0) distribution and must be at
    least 1. It is ignored for the other tags.
    """

    tag: str = "cauchy"
    s: Optional[float] = None

    def __post_init__(self):
        if self.tag not in GENERATOR_IDS:
            raise InvalidGeneratorError(f"unknown generator {self.tag!r}")
        if self.tag == "sparse":
            if self.s is None or not (float(self.s) >= 1.0) or not math.isfinite(self.s):
                raise InvalidGeneratorError(f"sparse generator needs s >= 1, got {self.s}")
            object.__setattr__(self, "s", float(self.s))
        else:
            object.__setattr__(self, "s", None)

    @property
    def gen_id(self):
        return GENERATOR_IDS[self.tag]

    @property
    def s_value(self):
        return self.s if self.s is not None else 0.0

    @classmethod
    def coerce(cls, kind, s=None):
        if isinstance(kind, cls):
            return kind
        return cls(kind, s)


@dataclass(frozen=True)
class StreamKey:
    """``(seed, i, j)`` names exactly one draw."""

    seed: int
    i: int = 0
    j: int = 0

    def __post_init__(self):
        for name in ("seed", "i", "j"):
            v = int(getattr(self, name))
            if not 0 <= v <= _M64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {v}")
            object.__setattr__(self, name, v)

    def as_uint64(self):
        return np.uint64(self.seed), np.uint64(self.i), np.uint64(self.j)


def _key_arrays(key):
    seed, i, j = key.as_uint64()
    return seed, np.array([i], dtype=np.uint64), np.array([j], dtype=np.uint64)


def uniform01(key):
    """Uniform draw on (0, 1) determined by ``key``; never exactly 0 or 1."""
    seed, i, j = _key_arrays(key)
    return float(_uniform_keys(seed, i, j)[0])


def uniform01_many(seed, i, j):
    """Vectorised :func:`uniform01` over broadcast arrays of counters."""
    i, j = np.broadcast_arrays(np.asarray(i, dtype=np.uint64), np.asarray(j, dtype=np.uint64))
    shape = i.shape
    out = _uniform_keys(np.uint64(seed), i.ravel().copy(), j.ravel().copy())
    return out.reshape(shape)


def cauchy_from_uniform(u):
    """Standard Cauchy quantile ``tan(pi (u - 1/2))``."""
    return math.tan(math.pi * (u - 0.5))


def matrix_entry(kind, key):
    """One projection-matrix entry ``r_ij`` for generator ``kind``.

    Examples
    --------
    >>> matrix_entry(GeneratorKind("sparse", 1.0), StreamKey(3, 0, 0)) in (1.0, -1.0)
    True
    """
    kind = GeneratorKind.coerce(kind)
    seed, i, j = _key_arrays(key)
    return float(_entries_keys(kind.gen_id, kind.s_value, seed, i, j)[0])


def matrix_entries(kind, seed, i, j):
    """Vectorised :func:`matrix_entry` over broadcast counter arrays."""
    kind = GeneratorKind.coerce(kind)
    i, j = np.broadcast_arrays(np.asarray(i, dtype=np.uint64), np.asarray(j, dtype=np.uint64))
    shape = i.shape
    out = _entries_keys(kind.gen_id, kind.s_value, np.uint64(seed), i.ravel().copy(), j.ravel().copy())
    return out.reshape(shape)


def sample_cauchy_scale(d, key):
    """Draw from C(0, d): ``d`` times the standard Cauchy entry at ``key``."""
    d = float(d)
    if not (d > 0 and math.isfinite(d)):
        raise NonPositiveScaleError(f"scale must be positive, got {d}")
    return d * matrix_entry(GeneratorKind("cauchy"), key)


def cauchy_block(seed, n_rows, k, d=1.0, first_row=0):
    """``(n_rows, k)`` array of C(0, d) draws; row ``r`` uses counter ``first_row + r``.

    This is the substream layout used by the Monte Carlo harness: replicate
    ``r`` owns the keys ``(seed, r, 0..k-1)``.
    """
    return _cauchy_block(np.uint64(seed), np.uint64(first_row), int(n_rows), int(k), float(d))


def entry_block(kind, seed, n_rows, k, first_row=0):
    """``(n_rows, k)`` block of generator entries keyed like :func:`cauchy_block`."""
    kind = GeneratorKind.coerce(kind)
    return _entry_block(kind.gen_id, kind.s_value, np.uint64(seed), np.uint64(first_row), int(n_rows), int(k))


@nb.njit(cache=True)
def _derive_seeds(master, start, count):
    out = np.empty(count, dtype=np.uint64)
    for t in range(count):
        out[t] = _mix64(_row_state(master, np.uint64(start + t)) ^ _C4)
    return out


def derive_seeds(master, count, start=0):
    """``count`` child seeds of ``master``; child ``t`` depends only on ``(master, start + t)``."""
    return _derive_seeds(np.uint64(master), np.uint64(start), int(count))
