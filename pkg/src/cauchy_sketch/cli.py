"""Command-line interface: ``cauchy-sketch <subcommand> ...``.

Subcommands
-----------
project     CSV matrix -> binary sketch
estimate    one distance from a sketch
pairwise    all (or listed) pairwise distances from a sketch
plan        sample size for a target accuracy
bounds      tail bounds at given (k, eps)
simulate    Monte Carlo moments, tails, MSE ratios or histograms
bias-table  median bias factors by quadrature

Tables are CSV preceded by a ``#`` provenance line; ``--out -`` writes to
standard output. Exit codes: 0 success, 1 a computation error, 2 a usage or
unreadable-input error.
"""

import argparse
import contextlib
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bounds, distributions, montecarlo
from ._tables import provenance_line, tool_version, write_table
from .core import ESTIMATOR_KINDS, load_matrix_csv
from .estimators import (
    BIAS_TABLE,
    MLE_OK,
    batch_estimate,
    estimate,
    mle_batch,
)
from .exceptions import CauchySketchError, EstimatorKindMismatchError, KTooSmallError
from .projection import (
    ProjectionConfig,
    diff_sample,
    project_matrix,
    sketch_read,
    sketch_to_bytes,
    sketch_write,
)
from .sampling import GeneratorKind

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

_L2_KINDS = ("normal", "sparse")


@dataclass(frozen=True)
class CliConfig:
    """Parsed invocation: the subcommand and its flags."""

    command: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, ns):
        opts = {k: v for k, v in vars(ns).items() if k not in ("command", "func")}
        return cls(ns.command, opts)

    def provenance(self):
        return provenance_line(self.command, {k: v for k, v in self.options.items() if v is not None})


class InputFileError(Exception):
    """An input path could not be opened."""


def _read_sketch(path):
    try:
        return sketch_read(path)
    except OSError as exc:
        raise InputFileError(f"cannot read sketch '{path}': {exc.strerror or exc}") from exc


def _read_matrix(path, delimiter, header):
    try:
        return load_matrix_csv(path, delimiter=delimiter, header=header)
    except OSError as exc:
        raise InputFileError(f"cannot read input '{path}': {exc.strerror or exc}") from exc


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def check_kind_compatible(sketch_kind, estimator):
    """``l2sq`` needs a normal or sparse sketch; every other estimator needs a Cauchy one."""
    if estimator == "l2sq":
        if sketch_kind not in _L2_KINDS:
            raise EstimatorKindMismatchError(f"l2sq needs a normal or sparse sketch, got {sketch_kind}")
    elif sketch_kind != "cauchy":
        raise EstimatorKindMismatchError(f"{estimator} needs a cauchy sketch, got {sketch_kind}")


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


# ---------------------------------------------------------------------------
# commands


def cmd_project(cfg):
    o = cfg.options
    data = _read_matrix(o["input"], o["delimiter"], o["header"])
    pc = ProjectionConfig(o["seed"], o["k"], data.D, kind=GeneratorKind(o["kind"], o["s"]))
    sketch = project_matrix(data, pc)
    if o["out"] == "-":
        sys.stdout.buffer.write(sketch_to_bytes(sketch))
        sys.stdout.buffer.flush()
        summary = sys.stderr
    else:
        sketch_write(sketch, o["out"])
        summary = sys.stdout
    print(f"n={sketch.n} D={pc.D} k={pc.k} seed={pc.seed} kind={pc.kind.tag}", file=summary)
    return EXIT_OK


def _estimate_rows(B, pairs, kind, lam):
    """Per-pair values and status strings; failing pairs are retried one at a time."""
    diffs = B[pairs[:, 0]] - B[pairs[:, 1]]
    status = np.full(pairs.shape[0], "ok", dtype=object)
    try:
        if kind in ("mle", "mle_c"):
            k = B.shape[1]
            if kind == "mle_c" and k < 2:
                raise KTooSmallError("the bias-corrected MLE needs k >= 2")
            values, codes = mle_batch(diffs, return_status=True)
            if kind == "mle_c":
                values = values * (1.0 - 1.0 / k)
            names = {1: "all_zero", 2: "degenerate", 3: "no_convergence"}
            for idx in np.flatnonzero(codes != MLE_OK):
                status[idx] = names.get(int(codes[idx]), "error")
        else:
            values = batch_estimate(kind, diffs, lam=lam)
        return values, status
    except CauchySketchError:
        pass
    values = np.empty(pairs.shape[0])
    for t in range(pairs.shape[0]):
        try:
            est = estimate(kind, diffs[t], lam=lam)
            values[t] = est.value
            status[t] = est.flag or "ok"
        except CauchySketchError as exc:
            values[t] = math.nan
            status[t] = "error:" + type(exc).__name__
    return values, status


def _read_pairs(path):
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise InputFileError(f"cannot read pairs '{path}': {exc.strerror or exc}") from exc
    pairs = []
    for line in lines:
        a, b = line.replace(",", " ").split()[:2]
        if not (a.lstrip("-").isdigit() and b.lstrip("-").isdigit()):
            continue  # header row
        pairs.append((int(a), int(b)))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def cmd_pairwise(cfg):
    o = cfg.options
    sketch = _read_sketch(o["sketch"])
    check_kind_compatible(sketch.config.kind.tag, o["estimator"])
    n = sketch.n
    if o["pairs"]:
        pairs = _read_pairs(o["pairs"])
    else:
        ii, jj = np.triu_indices(n, k=1)
        pairs = np.column_stack([ii, jj])
    B = np.asarray(sketch.values)
    bad = (pairs < 0).any(axis=1) | (pairs >= n).any(axis=1)
    good = np.flatnonzero(~bad)
    values = np.full(pairs.shape[0], math.nan)
    status = np.full(pairs.shape[0], "error:IndexOutOfRangeError", dtype=object)
    step = max(1, (1 << 20) // max(1, sketch.config.k))
    for start in range(0, good.size, step):
        idx = good[start:start + step]
        values[idx], status[idx] = _estimate_rows(B, pairs[idx], o["estimator"], o["lam"])
    rows = ([int(i), int(j), float(v), s] for (i, j), v, s in zip(pairs, values, status))
    with _output(o["out"]) as fh:
        write_table(fh, ["i", "j", "estimate", "status"], rows, cfg.provenance())
    n_err = int(sum(1 for s in status if s.startswith("error")))
    n_flag = int(sum(1 for s in status if s != "ok" and not s.startswith("error")))
    print(f"pairs={pairs.shape[0]} errors={n_err} flagged={n_flag}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(cfg):
    o = cfg.options
    sketch = _read_sketch(o["sketch"])
    check_kind_compatible(sketch.config.kind.tag, o["estimator"])
    est = estimate(o["estimator"], diff_sample(sketch, o["i"], o["j"]), lam=o["lam"])
    with _output(o["out"]) as fh:
        write_table(fh, ["i", "j", "estimator", "estimate", "status"],
                    [[o["i"], o["j"], est.kind, est.value, est.flag or "ok"]], cfg.provenance())
    return EXIT_OK


def cmd_plan(cfg):
    o = cfg.options
    req = bounds.PlanRequest(o["n"], o["eps"], o["delta"])
    res = bounds.plan_k_l1(req) if o["norm"] == "l1" else bounds.plan_k_l2(req)
    with _output(o["out"]) as fh:
        write_table(fh, ["norm", "n", "eps", "delta", "k", "binding_constraint"],
                    [[res.norm, req.n, req.eps, req.delta, res.k, res.binding_constraint]], cfg.provenance())
    return EXIT_OK


def cmd_bounds(cfg):
    o = cfg.options
    k = o["k"]
    rows = []
    if o["estimator"] == "gm":
        columns = ["eps", "markov_upper", "t_upper", "markov_lower", "t_lower",
                   "exponential_upper", "exponential_lower", "exponential_lower_valid"]
        for eps in o["eps"]:
            r = bounds.gm_tail_report(k, eps, o["constant"])
            rows.append([eps, r.upper, r.t_upper, r.lower, r.t_lower,
                         r.exponential_upper, r.exponential_lower, r.exponential_valid_lower])
    else:
        columns = ["eps", "gamma_chernoff_upper", "gamma_chernoff_lower", "ig_exact_upper",
                   "ig_exact_lower", "ig_chernoff_upper", "ig_chernoff_lower", "ig_chernoff_symmetric"]
        for eps in o["eps"]:
            gu, gl = distributions.gamma_chernoff(k, eps)
            eu, el = distributions.ig_tail_exact(k, eps)
            cu, cl, cs = distributions.ig_chernoff(k, eps)
            rows.append([eps, gu, gl, eu, el, cu, cl, cs])
    with _output(o["out"]) as fh:
        write_table(fh, columns, rows, cfg.provenance())
    return EXIT_OK


def cmd_simulate(cfg):
    o = cfg.options
    mode = o["mode"]
    prov = cfg.provenance()
    with _output(o["out"]) as fh:
        if mode == "mse":
            table = montecarlo.run_mse_ratios(o["k_list"] or [o["k"]], o["R"], o["seed"], o["d"])
            write_table(fh, ["k", "mse_me_over_gm", "mse_mec_over_gm", "status"],
                        [[r.k, r.me_over_gm, r.mec_over_gm, r.status] for r in table], prov)
            return EXIT_OK
        spec = montecarlo.SimSpec(o["estimator"], o["k"], d=o["d"], R=o["R"], seed=o["seed"],
                                  eps_grid=tuple(o["eps_grid"] or ()), lam=o["lam"])
        if mode == "moments":
            m = montecarlo.run_moments(spec)
            write_table(fh, ["moment", "value", "se"], m.as_rows(), prov)
        elif mode == "tail":
            curve = montecarlo.run_tail_curve(spec)
            write_table(fh, curve.columns(), curve.rows(), prov)
        else:
            hist = montecarlo.export_histogram(o["estimator"], o["k"], o["R"], o["seed"], o["bins"], o["d"], o["lam"])
            write_table(fh, ["bin_center", "count"], hist.rows(), prov)
    return EXIT_OK


def cmd_bias_table(cfg):
    o = cfg.options
    with _output(o["out"]) as fh:
        write_table(fh, ["k", "b_me", "variance_factor"], BIAS_TABLE.rows(o["max_k"]), cfg.provenance())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="cauchy-sketch", description="Cauchy random projections for l1 distances.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a CSV matrix into a binary sketch")
    p.add_argument("--in", dest="input", required=True, help="input CSV, one row per point")
    p.add_argument("--out", required=True, help="sketch path, or - for standard output")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=("cauchy", "normal", "sparse"), default="cauchy")
    p.add_argument("--s", type=float, default=None, help="sparsity for --kind sparse")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    p.set_defaults(func=cmd_project)

    for name, fn, helptext in (("estimate", cmd_estimate, "estimate one pairwise distance"),
                               ("pairwise", cmd_pairwise, "estimate all or selected pairwise distances")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--sketch", required=True)
        p.add_argument("--estimator", choices=ESTIMATOR_KINDS, default="gm_c")
        p.add_argument("--lam", type=float, default=None, help="exponent for the frac estimator")
        p.add_argument("--out", default="-")
        if name == "estimate":
            p.add_argument("--i", type=int, required=True)
            p.add_argument("--j", type=int, required=True)
        else:
            p.add_argument("--pairs", default=None, help="two-column CSV of row indices")
        p.set_defaults(func=fn)

    p = sub.add_parser("plan", help="sample size for all-pairs accuracy")
    p.add_argument("--norm", choices=("l1", "l2"), default="l1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bounds", help="tail bounds for the gm or mle estimator")
    p.add_argument("--estimator", choices=("gm", "mle"), default="gm")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=_float_list, required=True, help="value or comma-separated list")
    p.add_argument("--constant", type=float, default=bounds.DEFAULT_GM_CONSTANT)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Monte Carlo runs")
    p.add_argument("--mode", choices=("moments", "tail", "mse", "histogram"), default="moments")
    p.add_argument("--estimator", choices=ESTIMATOR_KINDS, default="gm_c")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--k-list", type=_int_list, default=None, help="comma-separated k values for --mode mse")
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--R", type=int, default=10 ** 6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps-grid", type=_float_list, default=None)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bias-table", help="median bias factors for odd k")
    p.add_argument("--max-k", type=int, default=101)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bias_table)
    return parser


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = CliConfig.from_namespace(ns)
    try:
        return ns.func(cfg)
    except InputFileError as exc:
        print(f"cauchy-sketch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CauchySketchError, ValueError, OSError) as exc:
        print(f"cauchy-sketch {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
