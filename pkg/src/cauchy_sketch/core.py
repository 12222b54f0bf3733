"""Canonical data types, CSV ingestion and the exact l1 distance."""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import LengthMismatchError, ParseError, RaggedRowsError

ESTIMATOR_KINDS = ("me", "me_c", "gm_c", "frac", "mle", "mle_c", "or", "l2sq")


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DataMatrix:
    """n rows of D-dimensional real vectors.

    ``values`` is stored as a read-only ``(n, D)`` float64 array.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"DataMatrix needs shape (n>=1, D>=1), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ParseError(int(bad[0]), int(bad[1]), str(arr[tuple(bad)]))
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def D(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class DiffSample:
    """The k projected differences ``x_j = B[i1, j] - B[i2, j]``."""

    x: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise ValueError("DiffSample needs k >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("DiffSample values must be finite")
        object.__setattr__(self, "x", _frozen(arr))

    @property
    def k(self):
        return self.x.size

    def __len__(self):
        return self.x.size


@dataclass(frozen=True)
class Estimate:
    """A nonnegative distance estimate tagged with how it was produced.

    ``flag`` is ``None`` for a regular estimate; degenerate inputs that still
    yield a value (for example an all-zero sample handed to the MLE) carry a
    short tag such as ``"all_zero"``.
    """

    value: float
    kind: str
    k: int
    lam: Optional[float] = None
    flag: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if not (self.value >= 0):
            raise ValueError(f"estimate must be nonnegative, got {self.value}")

    def __float__(self):
        return float(self.value)


def load_matrix_csv(path, delimiter=",", header=False):
    """Read a dense real matrix from a delimited text file.

    Parameters
    ----------
    path : str or path-like
        UTF-8 text file, one row per line.
    delimiter : str, default=","
    header : bool, default=False
        Skip the first line.

    Returns
    -------
    DataMatrix

    Raises
    ------
    OSError
        The file is missing or unreadable.
    ParseError
        A cell is not a finite real. ``row``/``col`` are 0-based data indices.
    RaggedRowsError
        A row's width differs from the first row's.
    """
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        if header:
            next(reader, None)
        for r, cells in enumerate(reader):
            if not cells or (len(cells) == 1 and cells[0].strip() == ""):
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise RaggedRowsError(len(rows), width, len(cells))
            row = []
            for c, cell in enumerate(cells):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(len(rows), c, cell) from None
                if not math.isfinite(v):
                    raise ParseError(len(rows), c, cell)
                row.append(v)
            rows.append(row)
    if not rows:
        raise ParseError(0, 0, "")
    return DataMatrix(np.array(rows, dtype=np.float64))


def write_matrix_csv(matrix, path, delimiter=","):
    """Write ``matrix`` with shortest round-trip float formatting."""
    values = getattr(matrix, "values", matrix)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for row in np.asarray(values, dtype=np.float64):
            writer.writerow([repr(float(v)) for v in row])


def l1_distance(a, b):
    """Exact l1 distance ``sum_i |a_i - b_i|`` (compensated summation)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise LengthMismatchError(f"lengths differ: {a.size} vs {b.size}")
    return math.fsum(np.abs(a - b).tolist())
