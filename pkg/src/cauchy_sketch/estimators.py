"""Estimators of the Cauchy scale (the l1 distance) from projected differences.

Every estimator has a batch form operating on the rows of a 2-d array
(replicates x k), which is what the simulation harness uses, and a
single-sample form returning an :class:`~cauchy_sketch.core.Estimate`.

Rows are divided by their largest magnitude before any nonlinear step and the
scale is multiplied back at the end. Besides protecting ``x**2`` from
overflow this makes every estimator exactly equivariant under scaling by a
power of two.
"""

import math
import threading
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from ._validation import as_batch, as_sample, check_count, check_positive
from .core import Estimate
from .exceptions import (
    BelowValidityThresholdError,
    EmptySampleError,
    EvenKError,
    InfiniteBiasError,
    KTooSmallError,
    LambdaOutOfRangeError,
    NoConvergenceError,
    UnsupportedKindError,
    ZeroSampleWithNegativeLambdaError,
)

MLE_OK = 0
MLE_ALL_ZERO = 1
MLE_DEGENERATE = 2
MLE_NO_CONVERGENCE = 3

_MLE_MAX_ITER = 200
_MLE_STEP_TOL = 1e-14

# ---------------------------------------------------------------------------
# median family


def median_batch(X):
    """Sample median of ``|x|`` for each row (mean of the middle pair for even k)."""
    return np.median(np.abs(as_batch(X)), axis=1)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _median_moment_panels(m, r, panels):
    # E[(median of 2m+1 half-Cauchy(1))**r] in the Beta(m+1, m+1) form, with
    # (1-t) tan(pi t / 2) folded in so the integrand is smooth on [0, 1].
    edges = np.linspace(0.0, 1.0, panels + 1)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    t = a + half * (_GL_NODES + 1.0)
    u = (1.0 - b) + half * (1.0 - _GL_NODES)  # 1 - t without cancellation
    g = u / np.tan(0.5 * np.pi * u)
    log_c = math.lgamma(2 * m + 2) - 2.0 * math.lgamma(m + 1)
    log_f = log_c + m * np.log(t) + (m - r) * np.log(u) + r * np.log(g)
    return float(np.sum(half * _GL_WEIGHTS * np.exp(log_f)))


def median_moment(k, r=1, rtol=1e-13):
    """``E[d_me**r] / d**r`` for odd ``k = 2m + 1``; ``inf`` when ``m < r``.

    Composite 32-point Gauss-Legendre on [0, 1], doubling the panel count
    until two successive estimates agree to ``rtol``.
    """
    k = check_count(k, "k")
    if k % 2 == 0:
        raise EvenKError(f"median moments are defined for odd k only, got k={k}")
    m = (k - 1) // 2
    r = check_count(r, "r", minimum=0)
    if r == 0:
        return 1.0
    if m < r:
        return math.inf
    panels = 8
    prev = _median_moment_panels(m, r, panels)
    while panels < 1 << 14:
        panels *= 2
        cur = _median_moment_panels(m, r, panels)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    return cur


@dataclass
class BiasTable:
    """Cache of median bias factors ``b_me(k)`` keyed by odd ``k``.

    Population is idempotent: the same ``k`` always produces the bit-identical
    value, so racing writers are harmless.
    """

    entries: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def get(self, k):
        value = self.entries.get(k)
        if value is None:
            value = median_moment(k, 1)
            with self._lock:
                self.entries.setdefault(k, value)
        return value

    def rows(self, max_k):
        """``(k, b_me, variance_factor)`` for odd ``3 <= k <= max_k``."""
        out = []
        for k in range(3, int(max_k) + 1, 2):
            b = self.get(k)
            out.append((k, b, median_variance_factor(k)))
        return out


BIAS_TABLE = BiasTable()


def median_bias_factor(k):
    """Bias factor ``b_me = E[d_me] / d`` for odd ``k >= 3``.

    Raises
    ------
    InfiniteBiasError
        ``k == 1``: the median of one half-Cauchy has no mean.
    EvenKError
        ``k`` is even.
    """
    k = check_count(k, "k")
    if k % 2 == 0:
        raise EvenKError(f"b_me is defined for odd k only, got k={k}")
    if k == 1:
        raise InfiniteBiasError("b_me is infinite for k = 1")
    return BIAS_TABLE.get(k)


def median_variance_factor(k):
    """``Var(d_me,c) / d**2``; infinite for ``k = 3``."""
    b = median_bias_factor(k)
    second = median_moment(k, 2)
    if math.isinf(second):
        return math.inf
    return second / (b * b) - 1.0


def median_corrected_batch(X):
    X = as_batch(X)
    k = X.shape[1]
    return median_batch(X) / median_bias_factor(k)


# ---------------------------------------------------------------------------
# geometric mean / fractional power


def _row_scale(A):
    s = np.max(A, axis=1)
    safe = np.where(s > 0, s, 1.0)
    return s, safe


def gm_correction(k):
    """``cos(pi / (2k)) ** k``, the unbiasing factor of the geometric mean."""
    return math.cos(math.pi / (2 * k)) ** k


def gm_batch(X):
    """Bias-corrected geometric mean ``cos^k(pi/2k) * prod |x_j|^(1/k)`` per row."""
    A = np.abs(as_batch(X))
    k = A.shape[1]
    if k < 2:
        raise KTooSmallError("the geometric-mean estimator needs k >= 2")
    s, safe = _row_scale(A)
    with np.errstate(divide="ignore"):
        logs = np.log(A / safe[:, None])
    g = np.exp(np.mean(logs, axis=1))
    return s * (g * gm_correction(k))


def fractional_batch(X, lam):
    """``(mean |x|^lam * cos(lam pi / 2)) ** (1 / lam)`` per row."""
    if lam is None:
        raise LambdaOutOfRangeError("the fractional estimator needs a lambda")
    lam = float(lam)
    if not (abs(lam) < 1.0) or lam == 0.0:
        raise LambdaOutOfRangeError(f"need 0 < |lambda| < 1, got {lam}")
    A = np.abs(as_batch(X))
    if lam < 0 and np.any(A == 0):
        raise ZeroSampleWithNegativeLambdaError("zero sample with negative lambda")
    s, safe = _row_scale(A)
    mean_pow = np.mean((A / safe[:, None]) ** lam, axis=1)
    return s * (mean_pow * math.cos(lam * math.pi / 2)) ** (1.0 / lam)


# ---------------------------------------------------------------------------
# maximum likelihood


@nb.njit(cache=True)
def _mle_score(buf, m, base, le, in_logs):
    """``k - sum 2 e / (a + e)`` and its derivative w.r.t. ``log d``.

    ``buf[:m]`` holds the nonzero ``a = x^2`` (or their logs when
    ``in_logs``), ``base = k - 2 * zeros`` accounts for zero samples, whose
    weight is exactly 1, and ``le = log e`` with ``e = d^2``. The log form is
    for samples whose squares leave the float range.
    """
    h = base
    hp = 0.0
    if in_logs:
        for t in range(m):
            w = 1.0 / (1.0 + math.exp(buf[t] - le))
            h -= 2.0 * w
            hp -= 4.0 * w * (1.0 - w)
    else:
        e = math.exp(le)
        for t in range(m):
            w = e / (buf[t] + e)
            h -= 2.0 * w
            hp -= 4.0 * w * (1.0 - w)
    return h, hp


# below this, y^2 and d^2 may underflow and the division form loses the root
_MLE_LOG_PATH_BELOW = -300.0


@nb.njit(cache=True)
def _mle_solve(x, buf):
    # buf is scratch space of length k
    k = x.size
    s = 0.0
    for t in range(k):
        v = abs(x[t])
        if v > s:
            s = v
    if s == 0.0:
        return 0.0, MLE_ALL_ZERO, 0
    m = 0
    log_min = 0.0
    log_sum = 0.0
    for t in range(k):
        y = abs(x[t]) / s
        if y != 0.0:
            ly = math.log(y)
            buf[m] = ly
            m += 1
            log_sum += ly
            if ly < log_min:
                log_min = ly
    zeros = k - m
    if 2 * zeros >= k:
        return 0.0, MLE_DEGENERATE, 0
    in_logs = log_min < _MLE_LOG_PATH_BELOW
    for t in range(m):
        buf[t] = 2.0 * buf[t] if in_logs else math.exp(2.0 * buf[t])
    base = float(k - 2 * zeros)
    cur = log_sum / m
    step = 3.0 * math.log(10.0)
    lo = log_min - step
    hi = step
    for _ in range(60):
        h_lo, _hp = _mle_score(buf, m, base, 2.0 * lo, in_logs)
        if h_lo > 0.0:
            break
        lo -= step
    for _ in range(60):
        h_hi, _hp = _mle_score(buf, m, base, 2.0 * hi, in_logs)
        if h_hi < 0.0:
            break
        hi += step
    if not (lo < cur < hi):
        cur = 0.5 * (lo + hi)
    for it in range(1, _MLE_MAX_ITER + 1):
        h, hp = _mle_score(buf, m, base, 2.0 * cur, in_logs)
        if h == 0.0:
            return s * math.exp(cur), MLE_OK, it
        if h > 0.0:
            lo = cur
        else:
            hi = cur
        nxt = cur - h / hp if hp < 0.0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - cur) <= _MLE_STEP_TOL or hi - lo <= _MLE_STEP_TOL:
            return s * math.exp(nxt), MLE_OK, it
        cur = nxt
    return s * math.exp(cur), MLE_NO_CONVERGENCE, _MLE_MAX_ITER


@nb.njit(parallel=True, cache=True)
def _mle_batch(X):
    n, k = X.shape
    out = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    for r in nb.prange(n):
        a = np.empty(k)
        d, st, _ = _mle_solve(X[r], a)
        out[r] = d
        status[r] = st
    return out, status


def mle_batch(X, return_status=False):
    """Raw maximum likelihood scale per row.

    Solves ``k = sum_j 2 d^2 / (x_j^2 + d^2)`` by Newton's method in
    ``log d`` safeguarded by a sign bracket and bisection. Rows that are all
    zero, or have at least half their entries zero, give 0 (the likelihood
    increases toward ``d = 0``).
    """
    X = np.ascontiguousarray(as_batch(X))
    d, status = _mle_batch(X)
    if np.any(status == MLE_NO_CONVERGENCE):
        raise NoConvergenceError("MLE solver did not converge; this indicates a bug")
    if return_status:
        return d, status
    return d


def mle_score(x, d):
    """Normalised likelihood residual ``|L'(d)| * d / k`` at ``d``."""
    x = as_sample(x)
    k = x.size
    return abs(k - float(np.sum(2.0 * d * d / (x * x + d * d)))) / k


def mle_corrected_batch(X):
    X = as_batch(X)
    k = X.shape[1]
    if k < 2:
        raise KTooSmallError("the bias-corrected MLE needs k >= 2")
    return mle_batch(X) * (1.0 - 1.0 / k)


# ---------------------------------------------------------------------------
# quantile difference and l2


def quantile_or_batch(X):
    """``(q75 - q25) / 2`` of ``|x|`` with linear interpolation at ``(k-1)p + 1``."""
    A = np.abs(as_batch(X))
    if A.shape[1] < 4:
        raise KTooSmallError("the quantile estimator needs k >= 4")
    q25, q75 = np.quantile(A, [0.25, 0.75], axis=1, method="linear")
    return (q75 - q25) / 2.0


def l2_squared_batch(X):
    """``mean(x_j^2)``: the squared-l2 estimator for normal projections."""
    A = np.abs(as_batch(X))
    s, safe = _row_scale(A)
    return (s * s) * np.mean((A / safe[:, None]) ** 2, axis=1)


# ---------------------------------------------------------------------------
# single-sample API


def estimate_median(x):
    """Sample median of ``|x_j|``."""
    x = as_sample(x)
    return Estimate(float(median_batch(x)[0]), "me", x.size)


def estimate_median_corrected(x):
    """Median divided by the bias factor ``b_me(k)``; odd ``k >= 3`` only."""
    x = as_sample(x)
    k = x.size
    if k % 2 == 0:
        raise EvenKError(f"bias correction needs odd k, got k={k}")
    return Estimate(float(median_corrected_batch(x)[0]), "me_c", k)


def estimate_gm(x):
    """Bias-corrected geometric mean; returns 0 if any ``x_j`` is 0.

    Examples
    --------
    >>> estimate_gm([1.0, 1.0]).value
    0.5000000000000001
    """
    x = as_sample(x)
    return Estimate(float(gm_batch(x)[0]), "gm_c", x.size)


def estimate_fractional(x, lam):
    x = as_sample(x)
    return Estimate(float(fractional_batch(x, lam)[0]), "frac", x.size, lam=float(lam))


def estimate_mle_raw(x):
    """Maximum likelihood estimate of the Cauchy scale.

    An all-zero sample returns 0 flagged ``"all_zero"``; a sample with at
    least half its entries zero returns 0 flagged ``"degenerate"``.
    """
    x = as_sample(x)
    d, status = mle_batch(x, return_status=True)
    flag = {MLE_OK: None, MLE_ALL_ZERO: "all_zero", MLE_DEGENERATE: "degenerate"}[int(status[0])]
    return Estimate(float(d[0]), "mle", x.size, flag=flag)


def estimate_mle_corrected(x):
    """``estimate_mle_raw(x) * (1 - 1/k)``."""
    raw = estimate_mle_raw(x)
    if raw.k < 2:
        raise KTooSmallError("the bias-corrected MLE needs k >= 2")
    return Estimate(raw.value * (1.0 - 1.0 / raw.k), "mle_c", raw.k, flag=raw.flag)


def estimate_quantile_or(x):
    x = as_sample(x)
    return Estimate(float(quantile_or_batch(x)[0]), "or", x.size)


def estimate_l2_squared(x):
    x = as_sample(x)
    return Estimate(float(l2_squared_batch(x)[0]), "l2sq", x.size)


_BATCH = {
    "me": median_batch,
    "me_c": median_corrected_batch,
    "gm_c": gm_batch,
    "mle": mle_batch,
    "mle_c": mle_corrected_batch,
    "or": quantile_or_batch,
    "l2sq": l2_squared_batch,
}

_SINGLE = {
    "me": estimate_median,
    "me_c": estimate_median_corrected,
    "gm_c": estimate_gm,
    "mle": estimate_mle_raw,
    "mle_c": estimate_mle_corrected,
    "or": estimate_quantile_or,
    "l2sq": estimate_l2_squared,
}


def batch_estimate(kind, X, lam=None):
    """Apply estimator ``kind`` to every row of ``X``."""
    if kind == "frac":
        return fractional_batch(X, lam)
    try:
        fn = _BATCH[kind]
    except KeyError:
        raise UnsupportedKindError(f"unknown estimator {kind!r}") from None
    return fn(X)


def estimate(kind, x, lam=None):
    """Dispatch to the single-sample estimator named ``kind``."""
    if kind == "frac":
        return estimate_fractional(x, lam)
    try:
        fn = _SINGLE[kind]
    except KeyError:
        raise UnsupportedKindError(f"unknown estimator {kind!r}") from None
    return fn(x)


def estimate_pairwise(B, kind="gm_c", pairs=None, lam=None):
    """Estimate distances between rows of a projected matrix.

    Parameters
    ----------
    B : array-like of shape (n, k)
        Projected data (or a :class:`~cauchy_sketch.projection.Sketch`).
    kind : str, default="gm_c"
    pairs : array-like of shape (p, 2), optional
        Row-index pairs. Defaults to all ``i < j`` in lexicographic order.

    Returns
    -------
    pairs : ndarray of shape (p, 2)
    values : ndarray of shape (p,)
    """
    B = np.asarray(getattr(B, "values", B), dtype=np.float64)
    n = B.shape[0]
    if pairs is None:
        ii, jj = np.triu_indices(n, k=1)
        pairs = np.column_stack([ii, jj])
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise IndexError(f"pair index outside [0, {n})")
    values = np.empty(pairs.shape[0])
    step = max(1, (1 << 22) // max(1, B.shape[1]))
    for start in range(0, pairs.shape[0], step):
        p = pairs[start:start + step]
        values[start:start + step] = batch_estimate(kind, B[p[:, 0]] - B[p[:, 1]], lam=lam)
    return pairs, values


# ---------------------------------------------------------------------------
# theoretical moments

EXACT = "exact"
ASYMPTOTIC = "asymptotic"
INFINITE = "infinite"
UNAVAILABLE = "unavailable"


@dataclass(frozen=True)
class MomentSummary:
    """Mean, variance and third/fourth central moments with an exactness tag each."""

    mean: float
    variance: float
    mu3: float
    mu4: float
    exactness: dict


def _central_from_raw(raw):
    m1, m2, m3, m4 = raw
    var = m2 - m1 * m1
    mu3 = m3 - 3 * m1 * m2 + 2 * m1 ** 3
    mu4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 ** 4
    return var, mu3, mu4


def theoretical_moments(kind, k, d=1.0):
    """Closed-form (or quadrature) moments of an estimator at sample size ``k``.

    ``me_c`` moments come from the order-statistic integrals and are exact
    whenever finite; ``gm_c`` has an exact mean and variance and asymptotic
    third/fourth moments; ``mle`` and ``mle_c`` are asymptotic expansions.
    Divergent moments are returned as ``inf`` tagged ``"infinite"``.
    """
    k = check_count(k, "k")
    d = check_positive(d, "d")
    inf = math.inf
    if kind == "me_c":
        if k % 2 == 0:
            raise EvenKError(f"me_c needs odd k, got k={k}")
        if k < 3:
            raise BelowValidityThresholdError("me_c needs k >= 3")
        b = median_bias_factor(k)
        raw = [median_moment(k, r) / b ** r for r in (1, 2, 3, 4)]
        tags = {"mean": EXACT}
        values = {"mean": d}
        var = mu3 = mu4 = inf
        if math.isfinite(raw[1]):
            var = (raw[1] - 1.0) * d * d
        if math.isfinite(raw[3]):
            var, mu3, mu4 = (v * d ** p for v, p in zip(_central_from_raw(raw), (2, 3, 4)))
        elif math.isfinite(raw[2]):
            mu3 = (raw[2] - 3 * raw[1] + 2) * d ** 3
        for name, v in (("variance", var), ("mu3", mu3), ("mu4", mu4)):
            values[name] = v
            tags[name] = EXACT if math.isfinite(v) else INFINITE
        return MomentSummary(values["mean"], values["variance"], values["mu3"], values["mu4"], tags)
    if kind == "gm_c":
        if k < 2:
            raise BelowValidityThresholdError("gm_c needs k >= 2")
        tags = {"mean": EXACT}
        if k > 2:
            var = d * d * (math.cos(math.pi / (2 * k)) ** (2 * k) / math.cos(math.pi / k) ** k - 1.0)
            tags["variance"] = EXACT
        else:
            var, tags["variance"] = inf, INFINITE
        if k > 3:
            mu3, tags["mu3"] = 3 * math.pi ** 4 * d ** 3 / (16 * k * k), ASYMPTOTIC
        else:
            mu3, tags["mu3"] = inf, INFINITE
        if k > 4:
            mu4, tags["mu4"] = 3 * math.pi ** 4 * d ** 4 / (16 * k * k), ASYMPTOTIC
        else:
            mu4, tags["mu4"] = inf, INFINITE
        return MomentSummary(d, var, mu3, mu4, tags)
    if kind in ("mle", "mle_c"):
        if kind == "mle_c" and k < 2:
            raise BelowValidityThresholdError("mle_c needs k >= 2")
        tags = dict.fromkeys(("mean", "variance", "mu3", "mu4"), ASYMPTOTIC)
        if kind == "mle":
            mean = d + d / k
            var = 2 * d * d / k + 7 * d * d / k ** 2
            mu4 = 12 * d ** 4 / k ** 2 + 222 * d ** 4 / k ** 3
        else:
            mean = d
            var = 2 * d * d / k + 3 * d * d / k ** 2
            mu4 = 12 * d ** 4 / k ** 2 + 186 * d ** 4 / k ** 3
        return MomentSummary(mean, var, 12 * d ** 3 / k ** 2, mu4, tags)
    raise UnsupportedKindError(f"no theoretical moments for {kind!r}")


__all__ = [
    "BIAS_TABLE",
    "BiasTable",
    "EmptySampleError",
    "MomentSummary",
    "batch_estimate",
    "estimate",
    "estimate_fractional",
    "estimate_gm",
    "estimate_l2_squared",
    "estimate_median",
    "estimate_median_corrected",
    "estimate_mle_corrected",
    "estimate_mle_raw",
    "estimate_pairwise",
    "estimate_quantile_or",
    "median_bias_factor",
    "median_moment",
    "median_variance_factor",
    "mle_batch",
    "mle_score",
    "theoretical_moments",
]
