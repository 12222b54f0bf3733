"""Session-wide cache of Monte Carlo replicate arrays.

Several test modules check different claims against the same large runs;
keying on the simulation parameters lets them share one computation.
"""

import functools

from cauchy_sketch.montecarlo import SimSpec, simulate_replicates, tail_curve_from_values


@functools.lru_cache(maxsize=None)
def _replicates(estimator, k, d, R, seed, lam):
    values = simulate_replicates(SimSpec(estimator, k, d=d, R=R, seed=seed, lam=lam))
    values.setflags(write=False)
    return values


def replicates(spec):
    return _replicates(spec.estimator, spec.k, spec.d, spec.R, spec.seed, spec.lam)


def tail_curve(spec):
    return tail_curve_from_values(spec, replicates(spec))


# Canonical large runs shared between the acceptance suite and module tests.
GM_TAIL_SEED = 606
MLE_TAIL_SEED = 707
