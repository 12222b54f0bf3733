"""Row-streaming random projections ``B = A R`` and the binary sketch format.

``R`` is never stored. Entry ``R[i, j]`` is regenerated from the key
``(seed, i, j)`` whenever it is needed, and each output coordinate is an
inner product accumulated in ascending ``i`` with Neumaier compensation, so
results are bit-reproducible for any partitioning of rows or columns.
"""

import struct
import warnings
import zlib
from dataclasses import dataclass

import numba as nb
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_count
from .core import DataMatrix, DiffSample
from .exceptions import (
    BadMagicError,
    ChecksumMismatchError,
    DimensionMismatchError,
    IndexOutOfRangeError,
    VersionMismatchError,
)
from .sampling import (
    GENERATOR_TAGS,
    GENERATOR_VERSION,
    GeneratorKind,
    _entry_from_row,
    _row_state,
)

SKETCH_MAGIC = b"CSK1"
SKETCH_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBBdQQQQ")
_CRC = struct.Struct("<I")


@nb.njit(cache=True)
def _row_states(seed, D):
    hs = np.empty(D, dtype=np.uint64)
    for i in range(D):
        hs[i] = _row_state(seed, np.uint64(i))
    return hs


@nb.njit(cache=True)
def _project_core(UT, gen_id, s, hs, k, out):
    # UT is (D, n); out is (n, k)
    n = UT.shape[1]
    col = np.empty((n, 1))
    for j in range(k):
        _project_one_column(UT, gen_id, s, hs, j, col)
        for row in range(n):
            out[row, j] = col[row, 0]


@nb.njit(parallel=True, cache=True)
def _project_columns(UT, gen_id, s, seed, k):
    D, n = UT.shape
    hs = _row_states(seed, D)
    out = np.empty((n, k))
    # one column per task; each column's sum order is fixed
    for j in nb.prange(k):
        col = np.empty((n, 1))
        _project_one_column(UT, gen_id, s, hs, j, col)
        for row in range(n):
            out[row, j] = col[row, 0]
    return out


@nb.njit(cache=True)
def _project_one_column(UT, gen_id, s, hs, j, col):
    D, n = UT.shape
    jj = np.uint64(j)
    for row in range(n):
        col[row, 0] = 0.0
    comp = np.zeros(n)
    for i in range(D):
        r = _entry_from_row(gen_id, s, hs[i], jj)
        if r == 0.0:
            continue
        for row in range(n):
            y = r * UT[i, row]
            a = col[row, 0]
            t = a + y
            if abs(a) >= abs(y):
                comp[row] += (a - t) + y
            else:
                comp[row] += (y - t) + a
            col[row, 0] = t
    for row in range(n):
        col[row, 0] += comp[row]


@nb.njit(parallel=True, cache=True)
def _project_many_seeds(UT, gen_id, s, seeds, k):
    D, n = UT.shape
    out = np.empty((seeds.size, n, k))
    for t in nb.prange(seeds.size):
        hs = _row_states(seeds[t], D)
        _project_core(UT, gen_id, s, hs, k, out[t])
    return out


@dataclass(frozen=True)
class ProjectionConfig:
    """Everything needed to regenerate ``R``: seed, target ``k``, source ``D``, generator."""

    seed: int
    k: int
    D: int
    kind: GeneratorKind = GeneratorKind("cauchy")

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "k", check_count(self.k, "k"))
        object.__setattr__(self, "D", check_count(self.D, "D"))
        object.__setattr__(self, "kind", GeneratorKind.coerce(self.kind))
        if self.k >= self.D:
            warnings.warn(
                f"target dimension k={self.k} is not smaller than D={self.D}",
                UserWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class Sketch:
    """Projected matrix ``B`` (read-only ``(n, k)``) plus its config."""

    config: ProjectionConfig
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != self.config.k:
            raise DimensionMismatchError(
                f"sketch values must have shape (n, {self.config.k}), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("sketch values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Sketch):
            return NotImplemented
        return self.config == other.config and np.array_equal(
            self.values.view(np.uint64), other.values.view(np.uint64)
        )

    __hash__ = None


def _as_rows(A, D):
    values = getattr(A, "values", A)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[1] != D:
        raise DimensionMismatchError(f"expected rows of length {D}, got shape {arr.shape}")
    return arr


def project_row(u, config):
    """``v = R^T u`` for one data row ``u`` of length ``config.D``."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.size != config.D:
        raise DimensionMismatchError(f"row has length {u.size}, config expects D={config.D}")
    return _project_rows(u[np.newaxis, :], config)[0]


def _project_rows(U, config):
    UT = np.ascontiguousarray(U.T)
    return _project_columns(UT, config.kind.gen_id, config.kind.s_value, np.uint64(config.seed), config.k)


def project_matrix(A, config):
    """Project every row of ``A``; row ``i`` of the result equals ``project_row(A[i])``."""
    U = _as_rows(A, config.D)
    return Sketch(config, _project_rows(U, config))


def project_many_seeds(U, seeds, k, kind="cauchy", s=None):
    """Project rows ``U`` under each seed in ``seeds``.

    Returns an array of shape ``(len(seeds), n, k)``; slice ``t`` equals
    ``project_matrix(U, ProjectionConfig(seeds[t], k, D, kind)).values``.
    Used by the simulation harness to replicate whole projections cheaply.
    """
    kind = GeneratorKind.coerce(kind, s)
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[np.newaxis, :]
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    UT = np.ascontiguousarray(U.T)
    return _project_many_seeds(UT, kind.gen_id, kind.s_value, seeds, int(k))


def diff_sample(sketch, i1, i2):
    """Projected differences ``B[i1] - B[i2]`` as a :class:`DiffSample`."""
    n = sketch.n
    for idx in (i1, i2):
        if not (0 <= int(idx) < n):
            raise IndexOutOfRangeError(f"row index {idx} outside [0, {n})")
    return DiffSample(sketch.values[int(i1)] - sketch.values[int(i2)])


def sketch_to_bytes(sketch):
    cfg = sketch.config
    header = _HEADER.pack(
        SKETCH_MAGIC,
        SKETCH_FORMAT_VERSION,
        cfg.kind.gen_id,
        GENERATOR_VERSION,
        cfg.kind.s_value,
        cfg.seed,
        cfg.D,
        cfg.k,
        sketch.n,
    )
    body = header + np.ascontiguousarray(sketch.values, dtype="<f8").tobytes()
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def sketch_from_bytes(blob):
    if len(blob) < 4 or blob[:4] != SKETCH_MAGIC:
        raise BadMagicError("not a sketch file (bad magic)")
    if len(blob) < _HEADER.size + _CRC.size:
        raise ChecksumMismatchError("sketch file is truncated")
    _, fmt, gen_id, gen_ver, s, seed, D, k, n = _HEADER.unpack_from(blob)
    if fmt != SKETCH_FORMAT_VERSION:
        raise VersionMismatchError(f"format version {fmt}, expected {SKETCH_FORMAT_VERSION}")
    if gen_ver != GENERATOR_VERSION:
        raise VersionMismatchError(f"generator version {gen_ver}, expected {GENERATOR_VERSION}")
    expected = _HEADER.size + 8 * n * k + _CRC.size
    (crc,) = _CRC.unpack_from(blob, len(blob) - _CRC.size)
    if len(blob) != expected or zlib.crc32(blob[:-_CRC.size]) & 0xFFFFFFFF != crc:
        raise ChecksumMismatchError("sketch checksum does not match contents")
    if gen_id not in GENERATOR_TAGS:
        raise VersionMismatchError(f"unknown generator id {gen_id}")
    tag = GENERATOR_TAGS[gen_id]
    kind = GeneratorKind(tag, s if tag == "sparse" else None)
    values = np.frombuffer(blob, dtype="<f8", count=n * k, offset=_HEADER.size).reshape(n, k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        config = ProjectionConfig(seed, k, D, kind)
    return Sketch(config, values.astype(np.float64))


def sketch_write(sketch, path):
    """Write ``sketch`` in the little-endian ``CSK1`` format."""
    with open(path, "wb") as fh:
        fh.write(sketch_to_bytes(sketch))


def sketch_read(path):
    """Read a ``CSK1`` sketch; raises on bad magic, version or checksum."""
    with open(path, "rb") as fh:
        return sketch_from_bytes(fh.read())


class CauchyRandomProjection(TransformerMixin, BaseEstimator):
    """Stable random projection as a scikit-learn transformer.

    Parameters
    ----------
    n_components : int, default=50
        Target dimension ``k``.
    kind : {"cauchy", "normal", "sparse"}, default="cauchy"
        Entry distribution. Cauchy entries preserve l1 distances in the scale
        of projected differences; normal and sparse ones serve l2.
    s : float, default=None
        Inverse density for ``kind="sparse"`` (``s >= 1``).
    random_state : int or None, default=0
        Seed for the counter-based generator. ``None`` draws a fresh seed at
        ``fit`` time.

    Attributes
    ----------
    config_ : ProjectionConfig
    n_features_in_ : int

    Examples
    --------
    >>> import numpy as np
    >>> X = np.arange(12.0).reshape(3, 4)
    >>> proj = CauchyRandomProjection(n_components=2, random_state=7).fit(X)
    >>> proj.transform(X).shape
    (3, 2)
    """

    def __init__(self, n_components=50, kind="cauchy", s=None, random_state=0):
        self.n_components = n_components
        self.kind = kind
        self.s = s
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
        self.config_ = ProjectionConfig(seed, self.n_components, X.shape[1], GeneratorKind(self.kind, self.s))
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"X has {X.shape[1]} features, projection was fit with {self.n_features_in_}"
            )
        return _project_rows(X, self.config_)

    def to_sketch(self, X):
        """Project ``X`` and wrap the result with the fitted config."""
        return Sketch(self.config_, self.transform(X))
