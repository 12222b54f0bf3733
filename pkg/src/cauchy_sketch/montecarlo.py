"""Monte Carlo harness for estimator moments, tail curves and MSE tables.

Replicate ``r`` of a run draws its ``k`` samples from the counter-based keys
``(seed, r, 0..k-1)``, so results are a pure function of the :class:`SimSpec`
and any split of the replicate range reproduces the serial values exactly.
Samples are generated block by block to bound memory; blocks are reduced in
a fixed order.

Estimators of the l1 distance use ``C(0, d)`` draws. The ``l2sq`` estimator
is driven by ``N(0, d)`` draws instead, ``d`` being the squared l2 distance.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds, distributions
from ._tables import provenance_line, write_table
from .core import ESTIMATOR_KINDS
from .estimators import batch_estimate, estimate_pairwise, theoretical_moments
from .exceptions import CauchySketchError, InvalidSpecError
from .projection import ProjectionConfig, project_many_seeds, project_matrix
from .sampling import cauchy_block, derive_seeds, entry_block

MIN_REPLICATES = 1000
JACKKNIFE_BLOCKS = 100
LOW_CONFIDENCE_COUNT = 100
_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class SimSpec:
    """A simulation run.

    Parameters
    ----------
    estimator : str
        One of :data:`~cauchy_sketch.core.ESTIMATOR_KINDS`.
    k : int
        Samples per replicate.
    d : float, default=1.0
        True distance. The law of ``d_hat / d`` depends on ``k`` only.
    R : int, default=10**6
        Number of replicates, at least 1000.
    seed : int, default=0
        Master seed.
    eps_grid : tuple of float
        Relative deviations for tail runs.
    lam : float, optional
        Exponent for the ``frac`` estimator.
    """

    estimator: str
    k: int
    d: float = 1.0
    R: int = 10 ** 6
    seed: int = 0
    eps_grid: tuple = ()
    lam: Optional[float] = None

    def __post_init__(self):
        if self.estimator not in ESTIMATOR_KINDS:
            raise InvalidSpecError(f"unknown estimator {self.estimator!r}")
        for name in ("k", "R", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise InvalidSpecError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.R < MIN_REPLICATES:
            raise InvalidSpecError(f"R must be >= {MIN_REPLICATES}, got {self.R}")
        if not (0 <= self.seed < 1 << 64):
            raise InvalidSpecError("seed must fit in 64 unsigned bits")
        d = float(self.d)
        if not (d > 0 and math.isfinite(d)):
            raise InvalidSpecError(f"d must be positive and finite, got {self.d}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        if self.k < 1:
            raise InvalidSpecError(f"k must be >= 1, got {self.k}")
        # Let the estimator itself decide whether k (and lam) are admissible.
        try:
            batch_estimate(self.estimator, np.ones((1, self.k)), lam=self.lam)
        except CauchySketchError as exc:
            raise InvalidSpecError(f"{self.estimator} rejects k={self.k}: {exc}") from exc

    def params(self):
        return {
            "estimator": self.estimator,
            "k": self.k,
            "d": self.d,
            "R": self.R,
            "seed": self.seed,
            "grid": list(self.eps_grid),
            "lam": self.lam,
        }


def _block_rows(k):
    return max(1000, _BLOCK_ELEMENTS // max(1, k))


def _source(estimator):
    return "normal" if estimator == "l2sq" else "cauchy"


def _samples(source, seed, first, n_rows, k, d):
    if source == "normal":
        return math.sqrt(d) * entry_block("normal", seed, n_rows, k, first_row=first)
    return cauchy_block(seed, n_rows, k, d, first_row=first)


def iter_sample_blocks(source, k, d, seed, start, stop):
    """Yield ``(first_replicate, samples)`` blocks covering ``[start, stop)``.

    ``source`` is ``"cauchy"`` for ``C(0, d)`` draws or ``"normal"`` for ``N(0, d)``.
    """
    rows = _block_rows(k)
    for first in range(start, stop, rows):
        n_rows = min(rows, stop - first)
        yield first, _samples(source, seed, first, n_rows, k, d)


def simulate_replicates(spec, start=0, stop=None):
    """Estimates for replicates ``start .. stop-1`` of ``spec``.

    Concatenating the output over any partition of ``[0, R)`` gives the same
    array as one call over the whole range.
    """
    stop = spec.R if stop is None else int(stop)
    if not (0 <= start <= stop <= spec.R):
        raise InvalidSpecError(f"replicate range [{start}, {stop}) outside [0, {spec.R})")
    out = np.empty(stop - start)
    for first, X in iter_sample_blocks(_source(spec.estimator), spec.k, spec.d, spec.seed, start, stop):
        out[first - start:first - start + X.shape[0]] = batch_estimate(spec.estimator, X, lam=spec.lam)
    return out


def simulate_common(kinds, k, R, seed, d=1.0, lam=None):
    """Several estimators applied to the same replicate samples (common random numbers)."""
    sources = {_source(kind) for kind in kinds}
    if len(sources) != 1:
        raise InvalidSpecError("l2sq cannot share samples with l1 estimators")
    out = {kind: np.empty(R) for kind in kinds}
    for first, X in iter_sample_blocks(sources.pop(), k, d, seed, 0, R):
        for kind in kinds:
            out[kind][first:first + X.shape[0]] = batch_estimate(kind, X, lam=lam)
    return out


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class SimMoments:
    mean: float
    variance: float
    mu3: float
    mu4: float
    se_mean: float
    se_variance: float
    se_mu3: float
    se_mu4: float
    R: int

    def as_rows(self):
        return [
            ("mean", self.mean, self.se_mean),
            ("variance", self.variance, self.se_variance),
            ("mu3", self.mu3, self.se_mu3),
            ("mu4", self.mu4, self.se_mu4),
        ]


def _central(m1, m2, m3, m4):
    var = m2 - m1 * m1
    mu3 = m3 - 3 * m1 * m2 + 2 * m1 ** 3
    mu4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 ** 4
    return var, mu3, mu4


def sample_moments(values, blocks=JACKKNIFE_BLOCKS):
    """Mean and central moments with delete-one-block jackknife standard errors.

    The point estimates use two passes (mean, then powers of deviations).
    Leave-out estimates are assembled from per-block power sums taken about
    the full-sample mean, which keeps them as accurate as the point values.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n < blocks:
        raise InvalidSpecError(f"need at least {blocks} values for the jackknife")
    mean = math.fsum(v) / n
    dev = v - mean
    sums = np.empty((blocks, 5))
    for b, chunk in enumerate(np.array_split(dev, blocks)):
        c2 = chunk * chunk
        sums[b] = (chunk.size, chunk.sum(), c2.sum(), (c2 * chunk).sum(), (c2 * c2).sum())
    total = sums.sum(axis=0)
    m = total[1:] / n
    var, mu3, mu4 = _central(*m)
    full = np.array([mean, var, mu3, mu4])

    loo = np.empty((blocks, 4))
    for b in range(blocks):
        rest = total - sums[b]
        mb = rest[1:] / rest[0]
        loo[b, 0] = mean + mb[0]
        loo[b, 1:] = _central(*mb)
    se = np.sqrt((blocks - 1) / blocks * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return SimMoments(*full.tolist(), *se.tolist(), n)


def run_moments(spec):
    """Empirical moments of ``spec.estimator`` over ``spec.R`` replicates."""
    return sample_moments(simulate_replicates(spec))


def theoretical_reference(spec):
    """Matching :func:`~cauchy_sketch.estimators.theoretical_moments`, for comparison."""
    return theoretical_moments(spec.estimator, spec.k, spec.d)


# ---------------------------------------------------------------------------
# tails


@dataclass(frozen=True)
class TailPoint:
    eps: float
    upper: float
    lower: float
    se_upper: float
    se_lower: float
    n_upper: int
    n_lower: int
    bounds: dict = field(default_factory=dict)

    @property
    def low_confidence_upper(self):
        return self.n_upper < LOW_CONFIDENCE_COUNT

    @property
    def low_confidence_lower(self):
        return self.n_lower < LOW_CONFIDENCE_COUNT


@dataclass(frozen=True)
class TailCurve:
    spec: SimSpec
    points: tuple

    def bound_names(self):
        names = []
        for p in self.points:
            for key in p.bounds:
                if key not in names:
                    names.append(key)
        return names

    def columns(self):
        return ["eps", "upper", "lower", "se_upper", "se_lower", "n_upper", "n_lower",
                "low_conf_upper", "low_conf_lower", *self.bound_names()]

    def rows(self):
        names = self.bound_names()
        for p in self.points:
            yield [p.eps, p.upper, p.lower, p.se_upper, p.se_lower, p.n_upper, p.n_lower,
                   p.low_confidence_upper, p.low_confidence_lower,
                   *(p.bounds.get(name, math.nan) for name in names)]

    def to_csv(self, stream):
        write_table(stream, self.columns(), self.rows(), provenance_line("tail", self.spec.params()))


def _gm_bounds(k, eps):
    out = {}
    upper, _ = bounds.gm_markov_upper(k, eps)
    out["gm_markov_upper"] = upper
    if eps > 0 and k >= bounds.gm_markov_lower_threshold(eps):
        out["gm_markov_lower"] = bounds.gm_markov_lower(k, eps)[0]
    else:
        out["gm_markov_lower"] = math.nan
    exp_upper, exp_lower, valid = bounds.gm_exponential(k, eps)
    out["gm_exp_upper"] = exp_upper
    out["gm_exp_lower"] = exp_lower if valid else math.nan
    return out


def _mle_bounds(k, eps):
    out = {}
    out["gamma_chernoff_upper"], out["gamma_chernoff_lower"] = distributions.gamma_chernoff(k, eps)
    out["gamma_exact_upper"], out["gamma_exact_lower"] = distributions.gamma_tail_exact(k, eps)
    out["ig_exact_upper"], out["ig_exact_lower"] = distributions.ig_tail_exact(k, eps)
    (out["ig_chernoff_upper"], out["ig_chernoff_lower"],
     out["ig_chernoff_symmetric"]) = distributions.ig_chernoff(k, eps)
    out["normal_upper"], out["normal_lower"] = distributions.normal_tail(k, eps)
    return out


def tail_counts(values, d, eps_grid):
    """Counts of ``values >= (1+eps) d`` and ``values <= (1-eps) d`` per ``eps``."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    eps = np.asarray(eps_grid, dtype=np.float64)
    n_up = v.size - np.searchsorted(v, (1.0 + eps) * d, side="left")
    n_low = np.searchsorted(v, (1.0 - eps) * d, side="right")
    return n_up, n_low


def tail_curve_from_values(spec, values):
    """Empirical tail curve of precomputed replicate ``values`` plus the bounds that apply."""
    if not spec.eps_grid:
        raise InvalidSpecError("tail runs need a non-empty eps grid")
    if any(not (0.0 <= e <= 1.0) for e in spec.eps_grid):
        raise InvalidSpecError("eps grid must lie in [0, 1]")
    R = values.size
    n_up, n_low = tail_counts(values, spec.d, spec.eps_grid)
    points = []
    for eps, nu, nl in zip(spec.eps_grid, n_up.tolist(), n_low.tolist()):
        pu, pl = nu / R, nl / R
        if spec.estimator == "gm_c":
            bnd = _gm_bounds(spec.k, eps)
        elif spec.estimator in ("mle", "mle_c"):
            bnd = _mle_bounds(spec.k, eps)
        else:
            bnd = {}
        points.append(TailPoint(
            eps, pu, pl,
            math.sqrt(pu * (1 - pu) / R), math.sqrt(pl * (1 - pl) / R),
            nu, nl, bnd,
        ))
    return TailCurve(spec, tuple(points))


def run_tail_curve(spec):
    """Empirical upper and lower tail probabilities over ``spec.eps_grid``."""
    return tail_curve_from_values(spec, simulate_replicates(spec))


# ---------------------------------------------------------------------------
# MSE table


@dataclass(frozen=True)
class MSERatio:
    k: int
    me_over_gm: float
    mec_over_gm: float
    status: str


def run_mse_ratios(k_list, R, seed, d=1.0):
    """``MSE(me)/MSE(gm_c)`` and ``MSE(me_c)/MSE(gm_c)`` per ``k``.

    The three estimators share replicate samples. ``k = 3`` yields infinite
    ratios (the median's variance diverges); even or smaller ``k`` is marked
    ``"invalid"`` with ``nan`` ratios.
    """
    if int(R) < MIN_REPLICATES:
        raise InvalidSpecError(f"R must be >= {MIN_REPLICATES}")
    out = []
    for k in k_list:
        k = int(k)
        if k % 2 == 0 or k < 3:
            out.append(MSERatio(k, math.nan, math.nan, "invalid"))
            continue
        if k == 3:
            out.append(MSERatio(k, math.inf, math.inf, "infinite"))
            continue
        vals = simulate_common(("me", "me_c", "gm_c"), k, int(R), seed, d)
        mse = {kind: float(np.mean((v - d) ** 2)) for kind, v in vals.items()}
        out.append(MSERatio(k, mse["me"] / mse["gm_c"], mse["me_c"] / mse["gm_c"], "ok"))
    return out


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True)
class Histogram:
    centers: np.ndarray
    counts: np.ndarray
    upper: float
    params: dict

    @property
    def width(self):
        return self.upper / self.counts.size

    def rows(self):
        return list(zip(self.centers.tolist(), self.counts.tolist()))

    def to_csv(self, stream):
        write_table(stream, ["bin_center", "count"], self.rows(), provenance_line("histogram", self.params))


def histogram_from_values(values, bin_count, params=None):
    if int(bin_count) < 10:
        raise InvalidSpecError(f"bin_count must be >= 10, got {bin_count}")
    bin_count = int(bin_count)
    values = np.asarray(values, dtype=np.float64)
    upper = float(np.quantile(values, 0.999))
    width = upper / bin_count
    idx = np.clip(np.floor(values / width).astype(np.int64), 0, bin_count - 1)
    counts = np.bincount(idx, minlength=bin_count)
    centers = (np.arange(bin_count) + 0.5) * width
    return Histogram(centers, counts, upper, dict(params or {}))


def export_histogram(kind, k, R, seed, bin_count=100, d=1.0, lam=None):
    """Equal-width histogram of ``kind`` estimates over ``[0, q_0.999]``.

    Values above the 0.999 quantile are counted in the last bin, so the counts
    sum to ``R``.
    """
    spec = SimSpec(kind, k, d=d, R=R, seed=seed, lam=lam)
    params = {**spec.params(), "bins": bin_count}
    params.pop("grid")
    return histogram_from_values(simulate_replicates(spec), bin_count, params)


# ---------------------------------------------------------------------------
# projection-level runs


@dataclass(frozen=True)
class JLResult:
    k: int
    n_pairs: int
    n_seeds: int
    violations: np.ndarray  # violating pairs per seed
    max_rel_error: np.ndarray  # worst |d_hat - d| / d per seed

    @property
    def failure_fraction(self):
        return float(np.mean(self.violations > 0))


def synthetic_matrix(n, D, seed=0):
    """Reproducible test data: i.i.d. uniform entries on [0, 1)."""
    return np.random.default_rng(seed).random((n, D))


def run_jl_check(A, k, eps, n_seeds, seed, estimator="gm_c"):
    """Project ``A`` under ``n_seeds`` derived seeds and count pairs outside ``1 +- eps``."""
    A = np.asarray(A, dtype=np.float64)
    n, D = A.shape
    ii, jj = np.triu_indices(n, k=1)
    truth = np.abs(A[ii] - A[jj]).sum(axis=1)
    seeds = derive_seeds(seed, n_seeds)
    violations = np.empty(n_seeds, dtype=np.int64)
    worst = np.empty(n_seeds)
    for t, s in enumerate(seeds.tolist()):
        sketch = project_matrix(A, ProjectionConfig(s, k, D))
        _, est = estimate_pairwise(sketch, estimator)
        rel = np.abs(est - truth) / truth
        violations[t] = int(np.count_nonzero(rel > eps))
        worst[t] = rel.max()
    return JLResult(int(k), truth.size, int(n_seeds), violations, worst)


def run_projection_replicates(U, k, R, seed, kind="normal", estimator="l2sq", pair=(0, 1)):
    """Estimator on ``B[pair[0]] - B[pair[1]]`` for ``R`` independent projection matrices."""
    U = np.asarray(U, dtype=np.float64)
    out = np.empty(int(R))
    step = max(1, _BLOCK_ELEMENTS // (k * U.shape[0]))
    for start in range(0, int(R), step):
        count = min(step, int(R) - start)
        B = project_many_seeds(U, derive_seeds(seed, count, start=start), k, kind=kind)
        out[start:start + count] = batch_estimate(estimator, B[:, pair[0], :] - B[:, pair[1], :])
    return out
