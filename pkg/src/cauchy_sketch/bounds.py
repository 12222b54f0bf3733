"""Tail bounds for the geometric-mean estimator and sample-size planners.

The geometric-mean estimator has moments ``E[d^t]`` only for ``t < k``, so
the bounds are Markov moment bounds ``E[d^t] / ((1 +- eps) d)^t`` minimised
over ``t`` in closed form; the exponential forms relax them at
``t = 4 k eps / pi^2``. Logarithms are natural throughout.
"""

import math
from dataclasses import dataclass

from ._validation import check_count
from .exceptions import (
    ConstantTooSmallError,
    EpsilonOutOfRangeError,
    KBelowThresholdError,
    ParamOutOfRangeError,
)

MIN_GM_CONSTANT = math.pi ** 2 / 2
DEFAULT_GM_CONSTANT = 8.0


@dataclass(frozen=True)
class GMConstant:
    """Constant ``c`` in ``exp(-k eps^2 / (c (1 + eps)))``; never below ``pi^2 / 2``."""

    c: float = DEFAULT_GM_CONSTANT

    def __post_init__(self):
        if not (float(self.c) >= MIN_GM_CONSTANT):
            raise ConstantTooSmallError(f"constant must be >= pi^2/2 = {MIN_GM_CONSTANT:.4f}, got {self.c}")
        object.__setattr__(self, "c", float(self.c))


def _check_k(k):
    k = check_count(k, "k")
    if k < 2:
        raise ParamOutOfRangeError("geometric-mean bounds need k >= 2")
    return k


def _log_cos_half(k):
    return math.log(math.cos(math.pi / (2 * k)))


def _exp(x):
    # Markov values near t -> k exceed the float range; they are then just inf
    return math.inf if x > 709.0 else math.exp(x)


def gm_markov_upper_at(k, eps, t):
    """Markov bound on ``Pr(d_gm,c >= (1+eps) d)`` at a given ``0 <= t < k``."""
    k = _check_k(k)
    return _exp(
        k * t * _log_cos_half(k) - k * math.log(math.cos(math.pi * t / (2 * k))) - t * math.log1p(eps)
    )


def gm_markov_lower_at(k, eps, t):
    """Bound on ``Pr(d_gm,c <= (1-eps) d)`` at a given ``0 <= t < k``."""
    k = _check_k(k)
    if eps >= 1.0:
        return 0.0
    return _exp(
        t * math.log1p(-eps) - k * math.log(math.cos(math.pi * t / (2 * k))) - k * t * _log_cos_half(k)
    )


def gm_markov_upper(k, eps):
    """Optimal-``t`` Markov bound on the upper tail.

    Returns
    -------
    bound : float
    t_star : float
        Minimiser, ``(2k/pi) atan((2/pi)(log(1+eps) - k log cos(pi/2k)))``,
        always in ``[0, k)``.
    """
    k = _check_k(k)
    eps = float(eps)
    if not (eps >= 0.0):
        raise EpsilonOutOfRangeError(f"epsilon must be >= 0, got {eps}")
    t_star = (2 * k / math.pi) * math.atan((math.log1p(eps) - k * _log_cos_half(k)) * 2 / math.pi)
    return gm_markov_upper_at(k, eps, t_star), t_star


def gm_markov_lower_threshold(eps):
    """Smallest ``k`` for which the lower Markov bound is claimed: ``pi^2 / (8 eps)``."""
    return math.inf if eps <= 0 else math.pi ** 2 / (8 * eps)


def gm_exponential_lower_threshold(eps):
    """``pi^2 / (1.5 eps)``; the exponential lower bound needs ``k`` at least this."""
    return math.inf if eps <= 0 else math.pi ** 2 / (1.5 * eps)


def gm_markov_lower(k, eps):
    """Optimal-``t`` bound on the lower tail, valid for ``k >= pi^2 / (8 eps)``.

    At ``eps = 1`` the bound is 0 and ``t_star`` takes its limiting value ``k``.
    """
    k = _check_k(k)
    eps = float(eps)
    if not (0.0 <= eps <= 1.0):
        raise EpsilonOutOfRangeError(f"epsilon must lie in [0, 1], got {eps}")
    if k < gm_markov_lower_threshold(eps):
        raise KBelowThresholdError(
            f"k={k} is below pi^2/(8 eps) = {gm_markov_lower_threshold(eps):.3f}"
        )
    if eps == 1.0:
        return 0.0, float(k)
    t_star = (2 * k / math.pi) * math.atan((-math.log1p(-eps) + k * _log_cos_half(k)) * 2 / math.pi)
    t_star = max(t_star, 0.0)
    return gm_markov_lower_at(k, eps, t_star), t_star


def gm_exponential(k, eps, c=DEFAULT_GM_CONSTANT):
    """Exponential tail bounds ``exp(-k eps^2 / (c (1 + eps)))``.

    Returns ``(upper, lower, lower_valid)``. Both sides share the same value;
    ``lower_valid`` says whether ``k >= pi^2 / (1.5 eps)`` so the lower side
    is actually proven.
    """
    k = _check_k(k)
    c = GMConstant(c).c
    eps = float(eps)
    if not (0.0 <= eps <= 1.0):
        raise EpsilonOutOfRangeError(f"epsilon must lie in [0, 1], got {eps}")
    value = math.exp(-k * eps * eps / (c * (1.0 + eps)))
    lower_valid = eps == 0.0 or k >= gm_exponential_lower_threshold(eps)
    return value, value, lower_valid


@dataclass(frozen=True)
class TailBoundReport:
    eps: float
    upper: float
    lower: float
    t_upper: float
    t_lower: float
    exponential_upper: float
    exponential_lower: float
    exponential_valid_lower: bool
    markov_valid_lower: bool


def gm_tail_report(k, eps, c=DEFAULT_GM_CONSTANT):
    """All geometric-mean bounds at ``(k, eps)``; invalid lower values are ``nan``."""
    upper, t_upper = gm_markov_upper(k, eps)
    try:
        lower, t_lower = gm_markov_lower(k, eps)
        markov_ok = True
    except KBelowThresholdError:
        lower, t_lower, markov_ok = math.nan, math.nan, False
    exp_upper, exp_lower, exp_ok = gm_exponential(k, eps, c)
    return TailBoundReport(float(eps), upper, lower, t_upper, t_lower, exp_upper, exp_lower, exp_ok, markov_ok)


@dataclass(frozen=True)
class PlanRequest:
    n: int
    eps: float
    delta: float


@dataclass(frozen=True)
class PlanResult:
    k: int
    binding_constraint: str
    norm: str
    request: PlanRequest
    raw_k: float


def _check_request(req, eps_ok):
    n = req.n
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ParamOutOfRangeError(f"n must be an integer >= 2, got {n}")
    if not eps_ok(float(req.eps)):
        raise ParamOutOfRangeError(f"epsilon {req.eps} out of range")
    if not (0.0 < float(req.delta) < 1.0):
        raise ParamOutOfRangeError(f"delta must lie in (0, 1), got {req.delta}")
    return int(n), float(req.eps), float(req.delta)


def plan_k_l1(req):
    """Sample size for recovering all pairwise l1 distances within ``1 +- eps``.

    ``k = ceil(max(8 (2 ln n - ln delta) / (eps^2 / (1 + eps)), pi^2 / (1.5 eps)))``.

    Examples
    --------
    >>> plan_k_l1(PlanRequest(100, 0.5, 0.05)).k
    586
    """
    n, eps, delta = _check_request(req, lambda e: 0.0 < e <= 1.0)
    jl = 8.0 * (2.0 * math.log(n) - math.log(delta)) / (eps * eps / (1.0 + eps))
    floor = math.pi ** 2 / (1.5 * eps)
    raw = max(jl, floor)
    binding = "jl_formula" if jl >= floor else "epsilon_floor"
    return PlanResult(math.ceil(raw), binding, "l1", req, raw)


def plan_k_l2(req):
    """Classical JL sample size for squared l2 with normal projections.

    ``k = ceil((2 ln n - ln delta) / (eps^2/4 - eps^3/6))``, ``0 < eps < 1.5``.
    """
    n, eps, delta = _check_request(req, lambda e: 0.0 < e < 1.5)
    denom = eps * eps / 4.0 - eps ** 3 / 6.0
    if denom <= 0:
        raise ParamOutOfRangeError(f"epsilon {eps} makes the l2 bound vacuous")
    raw = (2.0 * math.log(n) - math.log(delta)) / denom
    return PlanResult(math.ceil(raw), "jl_formula", "l2", req, raw)
