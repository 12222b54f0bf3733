"""Cauchy random projections for estimating l1 distances.

Project an ``(n, D)`` matrix with i.i.d. standard Cauchy entries to ``(n, k)``;
each coordinate of a projected row difference is then Cauchy with scale equal
to the original l1 distance. The estimators recover that scale from the
``k`` projected differences.

>>> import numpy as np
>>> from cauchy_sketch import CauchyRandomProjection, estimate_pairwise
>>> X = np.random.default_rng(0).random((5, 200))
>>> B = CauchyRandomProjection(n_components=100, random_state=3).fit_transform(X)
>>> pairs, dist = estimate_pairwise(B, "gm_c")
"""

from .bounds import (
    GMConstant,
    PlanRequest,
    PlanResult,
    TailBoundReport,
    gm_exponential,
    gm_markov_lower,
    gm_markov_upper,
    gm_tail_report,
    plan_k_l1,
    plan_k_l2,
)
from .core import ESTIMATOR_KINDS, DataMatrix, DiffSample, Estimate, l1_distance, load_matrix_csv, write_matrix_csv
from .distributions import (
    GammaParams,
    IGParams,
    gamma_chernoff,
    gamma_fit,
    ig_cdf,
    ig_chernoff,
    ig_density,
    ig_fit,
    ig_tail_exact,
    std_normal_cdf,
)
from .estimators import (
    BIAS_TABLE,
    MomentSummary,
    batch_estimate,
    estimate,
    estimate_fractional,
    estimate_gm,
    estimate_l2_squared,
    estimate_median,
    estimate_median_corrected,
    estimate_mle_corrected,
    estimate_mle_raw,
    estimate_pairwise,
    estimate_quantile_or,
    median_bias_factor,
    median_variance_factor,
    theoretical_moments,
)
from .exceptions import CauchySketchError
from .montecarlo import SimMoments, SimSpec, TailCurve, export_histogram, run_moments, run_mse_ratios, run_tail_curve
from .projection import (
    CauchyRandomProjection,
    ProjectionConfig,
    Sketch,
    diff_sample,
    project_matrix,
    project_row,
    sketch_read,
    sketch_write,
)
from .sampling import GeneratorKind, StreamKey, cauchy_from_uniform, matrix_entry, sample_cauchy_scale, uniform01

__version__ = "0.1.0"
