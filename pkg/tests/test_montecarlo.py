import csv
import io
import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from cauchy_sketch import montecarlo
from cauchy_sketch.estimators import theoretical_moments
from cauchy_sketch.exceptions import InvalidSpecError
from cauchy_sketch.montecarlo import (
    SimSpec,
    export_histogram,
    histogram_from_values,
    run_jl_check,
    run_moments,
    run_mse_ratios,
    run_projection_replicates,
    run_tail_curve,
    sample_moments,
    simulate_common,
    simulate_replicates,
    synthetic_matrix,
    tail_curve_from_values,
)


def gm_density_of_log(k, y):
    """Density of the mean of k i.i.d. log|C| by Fourier inversion.

    E|C|^{it} = sech(pi t / 2), so the mean has characteristic function
    sech(pi t / (2k))^k.
    """
    def f(t):
        u = math.pi * t / (2 * k)
        # log cosh u = u + log1p(e^{-2u}) - log 2, safe for large u
        return math.cos(t * y) * math.exp(-k * (u + math.log1p(math.exp(-2 * u)) - math.log(2)))
    return integrate.quad(f, 0, np.inf, limit=400, epsabs=1e-14)[0] / math.pi


def gm_c_mode(k):
    """Mode of d_gm,c / d = cos(pi/2k)^k exp(Y)."""
    c = math.cos(math.pi / (2 * k)) ** k
    # density of exp(Y) at z is f_Y(log z) / z, so maximise f_Y(y) e^{-y}
    res = optimize.minimize_scalar(lambda y: -gm_density_of_log(k, y) * math.exp(-y),
                                   bounds=(-1.0, 1.0), method="bounded", options={"xatol": 1e-9})
    return c * math.exp(res.x)


def histogram_mode(h):
    i = int(np.argmax(h.counts))
    y0, y1, y2 = h.counts[i - 1:i + 2].astype(float)
    shift = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
    return h.centers[i] + shift * h.width


def test_gm_moments_small_run():
    spec = SimSpec("gm_c", 10, R=200_000, seed=41)
    m = run_moments(spec)
    exact = theoretical_moments("gm_c", 10)
    assert abs(m.mean - 1.0) <= 3 * m.se_mean
    assert abs(m.variance - exact.variance) <= 3 * m.se_variance


def test_runs_are_deterministic():
    spec = SimSpec("mle_c", 15, R=5000, seed=3)
    assert np.array_equal(simulate_replicates(spec), simulate_replicates(spec))
    assert run_moments(spec) == run_moments(spec)


def test_parallel_decomposition_is_exact():
    spec = SimSpec("gm_c", 7, R=700_000, seed=12)
    whole = simulate_replicates(spec)
    parts = np.concatenate([simulate_replicates(spec, a, b)
                            for a, b in ((0, 1), (1, 250_001), (250_001, 699_000), (699_000, 700_000))])
    assert np.array_equal(whole, parts)


@pytest.mark.parametrize("kind", ["gm_c", "me_c", "mle_c", "me"])
def test_scale_invariance_is_exact_for_power_of_two(kind):
    one = simulate_replicates(SimSpec(kind, 9, d=1.0, R=20_000, seed=5))
    two = simulate_replicates(SimSpec(kind, 9, d=2.0, R=20_000, seed=5))
    assert np.array_equal(two / 2, one)


def test_normal_source_for_l2():
    v = simulate_replicates(SimSpec("l2sq", 20, d=3.0, R=100_000, seed=6))
    se = 3.0 * math.sqrt(2 / 20) / math.sqrt(v.size)
    assert abs(v.mean() - 3.0) <= 4 * se


def test_common_numbers_share_samples():
    vals = simulate_common(("gm_c", "me_c", "me"), 11, 5000, 8)
    alone = simulate_replicates(SimSpec("gm_c", 11, R=5000, seed=8))
    assert np.array_equal(vals["gm_c"], alone)
    # me and me_c differ by a constant factor on the same samples
    ratio = vals["me_c"] / vals["me"]
    assert np.allclose(ratio, ratio[0], rtol=1e-15)


def test_sample_moments_against_numpy():
    x = np.random.default_rng(0).standard_exponential(200_000)
    m = sample_moments(x)
    dev = x - x.mean()
    assert m.mean == pytest.approx(x.mean(), rel=1e-14)
    assert m.variance == pytest.approx(np.mean(dev ** 2), rel=1e-12)
    assert m.mu3 == pytest.approx(np.mean(dev ** 3), rel=1e-12)
    assert m.mu4 == pytest.approx(np.mean(dev ** 4), rel=1e-12)


def test_jackknife_standard_errors():
    n = 10 ** 6
    x = np.random.default_rng(1).standard_normal(n)
    m = sample_moments(x)
    # Normal: Var of the sample central moments is 1, 2, 6, 96 over n; 100 blocks give ~7% relative noise
    assert m.se_mean == pytest.approx(1 / math.sqrt(n), rel=0.25)
    assert m.se_variance == pytest.approx(math.sqrt(2 / n), rel=0.25)
    assert m.se_mu3 == pytest.approx(math.sqrt(6 / n), rel=0.25)
    assert m.se_mu4 == pytest.approx(math.sqrt(96 / n), rel=0.25)


def test_tail_counts_on_known_values():
    values = np.repeat([0.5, 1.0, 1.4, 2.0], 250)
    spec = SimSpec("gm_c", 10, R=1000, eps_grid=(0.0, 0.4, 0.5, 1.0))
    curve = tail_curve_from_values(spec, values)
    p0, p4, p5, p10 = curve.points
    assert (p0.n_upper, p0.n_lower) == (750, 500)
    assert (p4.upper, p4.lower) == (0.5, 0.25)
    assert (p5.n_upper, p5.n_lower) == (250, 250)
    assert (p10.n_upper, p10.n_lower) == (250, 0)
    assert p4.se_upper == pytest.approx(math.sqrt(0.25 / 1000), rel=1e-15)
    assert "gm_markov_upper" in p4.bounds


def test_tail_at_zero_eps_partitions():
    curve = run_tail_curve(SimSpec("mle_c", 30, R=50_000, seed=9, eps_grid=(0.0,)))
    p = curve.points[0]
    assert abs(p.upper + p.lower - 1.0) <= 1 / 50_000


def test_low_confidence_flags():
    curve = run_tail_curve(SimSpec("gm_c", 50, R=10_000, seed=10, eps_grid=(0.1, 0.9)))
    easy, hard = curve.points
    assert not easy.low_confidence_upper and hard.low_confidence_upper


def test_tail_grid_validation():
    with pytest.raises(InvalidSpecError):
        run_tail_curve(SimSpec("gm_c", 10, R=1000))
    with pytest.raises(InvalidSpecError):
        run_tail_curve(SimSpec("gm_c", 10, R=1000, eps_grid=(1.5,)))


def test_tail_csv_has_provenance():
    curve = run_tail_curve(SimSpec("mle_c", 20, R=2000, seed=11, eps_grid=(0.1, 0.2)))
    buf = io.StringIO()
    curve.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# cauchy-sketch ")
    assert " tail " in lines[0] and "seed=11" in lines[0] and "grid=0.1,0.2" in lines[0]
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 2 and float(rows[1]["eps"]) == 0.2
    assert "ig_chernoff_symmetric" in rows[0]


def test_mse_statuses():
    out = run_mse_ratios([3, 4, 1, 5], R=20_000, seed=12)
    assert [r.status for r in out] == ["infinite", "invalid", "invalid", "ok"]
    assert math.isinf(out[0].me_over_gm) and math.isnan(out[1].me_over_gm)
    assert out[3].me_over_gm > out[3].mec_over_gm > 1


def test_histogram_sums_to_R():
    h = export_histogram("gm_c", 10, 20_000, 13, bin_count=50)
    assert h.counts.sum() == 20_000 and h.counts.size == 50
    assert h.params["bins"] == 50
    assert h.centers[0] == pytest.approx(h.width / 2)
    with pytest.raises(InvalidSpecError):
        histogram_from_values(np.ones(100), 9)


def test_histogram_mode_matches_exact_density():
    h = export_histogram("gm_c", 50, 10 ** 6, 14, bin_count=100)
    exact = gm_c_mode(50)
    assert 0.9 < exact < 0.95
    assert histogram_mode(h) == pytest.approx(exact, rel=0.05)


def test_histogram_mode_near_one():
    h = export_histogram("gm_c", 50, 10 ** 6, 14, bin_count=100)
    assert histogram_mode(h) == pytest.approx(1.0, rel=0.05)


def test_density_oracle_normalises():
    mass = integrate.quad(lambda y: gm_density_of_log(5, y), -6, 6, limit=200)[0]
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_small_k_mean_exceeds_mode():
    v = simulate_replicates(SimSpec("gm_c", 5, R=200_000, seed=15))
    h = histogram_from_values(v, 100)
    assert v.mean() > histogram_mode(h)


@pytest.mark.parametrize("kind", ["me_c", "gm_c"])
def test_asymptotic_normality(kind):
    k = 401
    v = simulate_replicates(SimSpec(kind, k, R=2000, seed=16))
    z = math.sqrt(k) * (v - 1.0) / (math.pi / 2)
    assert stats.kstest(z, "norm").pvalue > 1e-3


@pytest.mark.parametrize("kwargs", [
    dict(estimator="nope", k=10),
    dict(estimator="gm_c", k=10, R=999),
    dict(estimator="me_c", k=10),
    dict(estimator="gm_c", k=0),
    dict(estimator="gm_c", k=10, d=-1.0),
    dict(estimator="gm_c", k=10, d=math.inf),
    dict(estimator="gm_c", k=10, seed=2 ** 64),
    dict(estimator="gm_c", k=10.5),
    dict(estimator="frac", k=10),
    dict(estimator="frac", k=10, lam=1.5),
])
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpecError):
        SimSpec(**kwargs)


def test_jl_check_extremes():
    A = synthetic_matrix(6, 40, seed=1)
    assert np.array_equal(A, synthetic_matrix(6, 40, seed=1))
    loose = run_jl_check(A, 30, 1e9, 5, seed=2)
    assert loose.n_pairs == 15 and loose.failure_fraction == 0.0
    assert np.all(loose.max_rel_error > 0)
    tight = run_jl_check(A, 30, 0.0, 5, seed=2)
    assert np.all(tight.violations == 15) and tight.failure_fraction == 1.0
    assert np.array_equal(tight.max_rel_error, loose.max_rel_error)


def test_projection_replicates_l1():
    U = np.zeros((2, 8))
    U[0, :3] = [1.0, -2.0, 0.5]  # l1 distance 3.5
    v = run_projection_replicates(U, 20, 20_000, 17, kind="cauchy", estimator="gm_c")
    se = v.std() / math.sqrt(v.size)
    assert abs(v.mean() - 3.5) <= 3 * se
    assert np.array_equal(v[:100], run_projection_replicates(U, 20, 100, 17, kind="cauchy", estimator="gm_c"))


def test_theoretical_reference_passthrough():
    spec = SimSpec("gm_c", 12, R=1000)
    assert montecarlo.theoretical_reference(spec) == theoretical_moments("gm_c", 12)
