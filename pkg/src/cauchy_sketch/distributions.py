"""Approximating laws for the bias-corrected MLE.

Both laws match the MLE's asymptotic mean ``d`` and variance
``2d^2/k + 3d^2/k^2``. The gamma matches nothing more; the inverse Gaussian
(a generalized gamma with index 2) also matches the third central moment
``12 d^3 / k^2`` and nearly the fourth. Tail probabilities are computed in log
space where the closed forms mix ``e^{2 alpha}`` with vanishing normal tails.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ._validation import check_count, check_positive
from .exceptions import EpsilonOutOfRangeError, NonPositiveYError

_SQRT2 = math.sqrt(2.0)


def std_normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    out = 0.5 * special.erfc(-np.asarray(z, dtype=np.float64) / _SQRT2)
    return float(out) if np.ndim(out) == 0 else out


def log_std_normal_cdf(z):
    """``log Phi(z)``, accurate far into the lower tail."""
    out = special.log_ndtr(np.asarray(z, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def mle_variance_factor(k):
    """``2/k + 3/k^2``: asymptotic ``Var(d_MLE,c) / d^2``."""
    k = check_count(k, "k")
    return 2.0 / k + 3.0 / k ** 2


def _check_eps(eps, max_eps=None):
    eps = float(eps)
    if not (eps >= 0.0) or not math.isfinite(eps):
        raise EpsilonOutOfRangeError(f"epsilon must be >= 0, got {eps}")
    if max_eps is not None and eps > max_eps:
        raise EpsilonOutOfRangeError(f"epsilon must be <= {max_eps}, got {eps}")
    return eps


@dataclass(frozen=True)
class GammaParams:
    alpha: float
    beta: float

    @property
    def mean(self):
        return self.alpha * self.beta


@dataclass(frozen=True)
class IGParams:
    """Inverse Gaussian with mean ``d = alpha * beta`` and variance ``alpha * beta^2``."""

    alpha: float
    beta: float
    d: float
    eta: float = 2.0


def gamma_fit(k, d=1.0):
    """Two-moment gamma fit: ``alpha = 1/(2/k + 3/k^2)``, ``beta = d (2/k + 3/k^2)``."""
    v = mle_variance_factor(k)
    d = check_positive(d, "d")
    return GammaParams(1.0 / v, d * v)


def gamma_chernoff(k, eps):
    """Chernoff bounds on ``Pr(d >= (1+eps)d)`` and ``Pr(d <= (1-eps)d)`` under the gamma law.

    The lower bound tends to 0 as ``eps -> 1`` and is returned as 0 for
    ``eps >= 1``, where the gamma law has no mass.
    """
    eps = _check_eps(eps)
    alpha = gamma_fit(k).alpha
    upper = math.exp(-alpha * (eps - math.log1p(eps)))
    if eps >= 1.0:
        lower = 0.0
    else:
        lower = math.exp(-alpha * (-eps - math.log1p(-eps)))
    return upper, lower


def gamma_tail_exact(k, eps):
    """Gamma-law tail probabilities at ``(1 +- eps) d``."""
    eps = _check_eps(eps)
    p = gamma_fit(k)
    law = stats.gamma(a=p.alpha, scale=p.beta)
    lower = float(law.cdf(1.0 - eps)) if eps < 1.0 else 0.0
    return float(law.sf(1.0 + eps)), lower


def normal_tail(k, eps):
    """Tails of the normal approximation ``N(d, (2/k + 3/k^2) d^2)``."""
    eps = _check_eps(eps)
    sd = math.sqrt(mle_variance_factor(k))
    return std_normal_cdf(-eps / sd), std_normal_cdf(-eps / sd)


def ig_fit(k, d=1.0):
    """Three-moment generalized-gamma fit, an inverse Gaussian (index fixed at 2)."""
    v = mle_variance_factor(k)
    d = check_positive(d, "d")
    return IGParams(1.0 / v, d * v, d, 2.0)


def ig_density(y, p):
    """``sqrt(alpha d / 2 pi) y^{-3/2} exp(-(y - d)^2 / (2 y beta))``."""
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any(~(y_arr > 0)):
        raise NonPositiveYError("inverse Gaussian density needs y > 0")
    log_f = (
        0.5 * math.log(p.alpha * p.d / (2 * math.pi))
        - 1.5 * np.log(y_arr)
        - (y_arr - p.d) ** 2 / (2 * y_arr * p.beta)
    )
    out = np.exp(log_f)
    return float(out) if out.ndim == 0 else out


def ig_mgf(t, p):
    """``exp(alpha (1 - sqrt(1 - 2 beta t)))`` for ``t < 1 / (2 beta)``."""
    return math.exp(p.alpha * (1.0 - math.sqrt(1.0 - 2.0 * p.beta * t)))


def _reflected_term(alpha, b):
    # e^{2 alpha} * Phi(-b), finite only in log space for large alpha
    return np.exp(2.0 * alpha + special.log_ndtr(-b))


def _ig_upper(y, p):
    # Pr(Y >= y) = Phi(-a) - e^{2 alpha} Phi(-b); for y >= d the two terms
    # nearly cancel, so take Phi(-a) * (1 - ratio) with the ratio in log space
    root = np.sqrt(p.alpha * p.d / y)
    log_a = special.log_ndtr(-root * (y / p.d - 1.0))
    log_b = 2.0 * p.alpha + special.log_ndtr(-root * (y / p.d + 1.0))
    return np.exp(log_a) * -np.expm1(log_b - log_a)


def ig_cdf(y, p):
    """``Phi(sqrt(ad/y)(y/d - 1)) + e^{2a} Phi(-sqrt(ad/y)(y/d + 1))``.

    Above the mean the value is formed as one minus the upper tail, which
    keeps it monotone to the last bit.
    """
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any(~(y_arr > 0)):
        raise NonPositiveYError("inverse Gaussian CDF needs y > 0")
    root = np.sqrt(p.alpha * p.d / y_arr)
    a = root * (y_arr / p.d - 1.0)
    b = root * (y_arr / p.d + 1.0)
    below = np.minimum(special.ndtr(a) + _reflected_term(p.alpha, b), 1.0)
    above = 1.0 - _ig_upper(np.maximum(y_arr, p.d), p)
    out = np.where(y_arr > p.d, above, below)
    return float(out) if out.ndim == 0 else out


def ig_tail_exact(k, eps, d=1.0):
    """Inverse Gaussian ``Pr(d >= (1+eps)d)`` and ``Pr(d <= (1-eps)d)``.

    The upper tail is a difference of two terms whose ratio is
    ``exp(2 alpha) Phi(-b) / Phi(-a)``; it is evaluated as
    ``Phi(-a) * (-expm1(log ratio))`` to keep relative accuracy deep in the
    tail. ``d`` only fixes units; the probabilities are scale free.
    """
    eps = _check_eps(eps)
    check_positive(d, "d")
    p = ig_fit(k)
    alpha = p.alpha
    upper = float(_ig_upper(1.0 + eps, p))
    if eps >= 1.0:
        lower = 0.0
    else:
        r = math.sqrt(alpha / (1.0 - eps))
        lower = float(special.ndtr(-eps * r)) + math.exp(
            2.0 * alpha + float(special.log_ndtr(-(2.0 - eps) * r))
        )
    return upper, lower


def ig_chernoff(k, eps):
    """Chernoff bounds under the inverse Gaussian law.

    Returns ``(upper, lower, symmetric)`` where ``symmetric`` bounds
    ``Pr(|d - d| >= eps d)`` and is defined for ``0 <= eps <= 1``. As with
    :func:`gamma_chernoff` the lower bound is 0 for ``eps >= 1``.
    """
    eps = _check_eps(eps, max_eps=1.0)
    v = mle_variance_factor(k)
    alpha = 1.0 / v
    upper = math.exp(-alpha * eps * eps / (2.0 * (1.0 + eps)))
    lower = 0.0 if eps >= 1.0 else math.exp(-alpha * eps * eps / (2.0 * (1.0 - eps)))
    symmetric = 2.0 * math.exp(-(eps * eps / (1.0 + eps)) / (2.0 * v))
    return upper, lower, symmetric
