"""Named experiment suites.

Each suite maps ``(symbol, params, seed, workers)`` to an
:class:`~stationary_dpp.report.ExperimentReport`.  Parameter schemas live
next to the suite functions in :data:`SUITES` and are used by the run
configuration validator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import chi2

from .inequalities import (
    Bootstrap,
    IntPolynomial,
    WeightVector,
    _bootstrap_for,
    absolute_pnorm_bound,
    khintchine_constant,
    khintchine_constant_abstract,
    l2_norm_analytic,
    random_weights,
    salem_littlewood_suite,
    subgaussian_margins,
    weyl_decay_slopes,
)
from .kernel import Box, build_kernel, correlation, exact_distribution, gap_probability
from .report import Check, ExperimentReport
from .sampler import empirical_covariance, empirical_density, sample_batch
from .structure import (
    INV_GOLDEN,
    RotationSystem,
    ergodic_deviation_curve,
    gap_presence_curve,
    residue_histogram,
    sumset_coverage,
)
from .symbol import covariance, riesz_constant_sq

__all__ = ["SUITES", "Param", "SuiteSpec", "run_suite", "draw_batch", "suite_names"]


# ---------------------------------------------------------------------------
# helpers

def draw_batch(symbol, window, samples, seed, workers=1, nested=False):
    """Sample with the cheapest exact method for the window size."""
    kw = build_kernel(symbol, window, decompose=False)
    if kw.is_diagonal or kw.size <= 256:
        return sample_batch(kw, seed, samples, method="spectral", workers=workers)
    return sample_batch(kw, seed, samples, method="sequential", nested=nested, workers=workers)


def _window(size, d):
    sides = [size] * d if isinstance(size, int) else list(size)
    if len(sides) != d:
        raise ValueError(f"window needs {d} side lengths")
    return Box([0] * d, sides)


def _loglog_slope(N, y):
    return float(np.polyfit(np.log(np.asarray(N, float)), np.log(np.asarray(y, float)), 1)[0])


def _chi2_pvalue(observed, expected, min_expected=5.0):
    """Pearson goodness of fit, pooling cells with small expected counts."""
    big = expected >= min_expected
    stat = float(np.sum((observed[big] - expected[big]) ** 2 / expected[big]))
    cells = int(big.sum())
    rest_e = float(expected[~big].sum())
    if rest_e > 0:
        stat += (float(observed[~big].sum()) - rest_e) ** 2 / rest_e
        cells += 1
    return float(chi2.sf(stat, max(cells - 1, 1))), stat, cells - 1


# ---------------------------------------------------------------------------
# suites

def suite_sample(symbol, p, seed, workers):
    d = symbol.dimension
    w = _window(p["size"], d)
    batch = draw_batch(symbol, w, p["samples"], seed, workers)
    rep = ExperimentReport("sample")
    n = w.size
    dens = empirical_density(batch)
    rep.add(Check("density", dens.pooled, symbol.sigma, 5 * dens.se, "equal", N=n))
    counts = batch.counts().astype(float)
    m = counts.size
    M = batch.kernel.matrix if n <= 4096 else None
    mean_ref = symbol.sigma * n
    se_mean = counts.std(ddof=1) / math.sqrt(m)
    rep.add(Check("count_mean", counts.mean(), mean_ref, 5 * se_mean, "equal", N=n))
    if M is not None:
        # sum lambda (1 - lambda) = tr K - tr K^2
        var_ref = mean_ref - float(np.sum(np.abs(M) ** 2))
        c = counts - counts.mean()
        var = float(np.mean(c ** 2)) * m / (m - 1)
        se_var = math.sqrt(max(float(np.mean(c ** 4)) - var ** 2, 0.0) / m)
        rep.add(Check("count_variance", var, var_ref, 5 * se_var + 1e-12, "equal", N=n))
    if d == 1 and n >= 2:
        x0, x1 = batch.bits[:, 0], batch.bits[:, 1]
        pab = float(np.mean(x0 & x1))
        prod = float(np.mean(x0)) * float(np.mean(x1))
        z = x0 & x1
        se = float(np.std(z.astype(float) - np.mean(x1) * x0 - np.mean(x0) * x1, ddof=1)) / math.sqrt(m)
        rep.add(Check("negative_association", pab, prod, 5 * se, "upper", N=n))
    if n <= 10:
        ex = exact_distribution(symbol, w).probs
        masks = batch.bits.astype(np.int64) @ (1 << np.arange(n))
        obs = np.bincount(masks, minlength=1 << n).astype(float)
        pval, _, _ = _chi2_pvalue(obs, m * ex)
        rep.add(Check("chi2_pvalue", pval, 1e-4, 0.0, "lower", N=n))
    return rep


def suite_exact_dist(symbol, p, seed, workers):
    w = _window(p["size"], symbol.dimension)
    dist = exact_distribution(symbol, w)
    rep = ExperimentReport("exact-dist")
    n = w.size
    rep.add(Check("sum_to_one", float(np.sum(dist.probs)), 1.0, 1e-9, "equal", N=n))
    rep.add(Check("min_probability", float(dist.probs.min()), 0.0, 1e-10, "lower", N=n))
    for i in range(n):
        rep.add(Check(f"marginal_{i}", dist.marginal(i), symbol.sigma, 1e-9, "equal", N=n))
    if n <= 12:
        rep.add(Check("empty_vs_gap", dist.probs[0], gap_probability(symbol, w), 1e-10, "equal", N=n))
    rep.add(Check("full_vs_correlation", dist.probs[-1], correlation(symbol, w.points), 1e-10, "equal", N=n))
    return rep


def suite_gap_prob(symbol, p, seed, workers):
    rep = ExperimentReport("gap-prob", sweep=True)
    rows = []
    for ell in p["lengths"]:
        w = _window(int(ell), symbol.dimension)
        kw = build_kernel(symbol, w)
        g = gap_probability(kw)
        if kw.is_diagonal:
            ref, tol = (1.0 - symbol.sigma) ** w.size, 1e-12
        else:
            ref, tol = float(np.real(np.linalg.det(np.eye(w.size) - kw.matrix))), 1e-10
        rep.add(Check("gap_probability", g, ref, tol, "equal", N=w.size))
        if p["contraction"]:
            lam_max = float(kw.raw_eigenvalues[0])
            rep.add(Check("max_eigenvalue", lam_max, 1.0 - 1e-9, 0.0, "upper", N=w.size))
            rep.add(Check("gap_positive", g, float(np.nextafter(0.0, 1.0)), 0.0, "lower", N=w.size))
        rows.append([w.size, g, ref])
    rep.add_series("gap", ["N", "gap_probability", "reference"], rows)
    return rep


def suite_covariance(symbol, p, seed, workers):
    d = symbol.dimension
    w = _window(p["size"], d)
    batch = draw_batch(symbol, w, p["samples"], seed, workers)
    rep = ExperimentReport("covariance")
    for lag in p["lags"]:
        lag_v = [int(lag)] + [0] * (d - 1) if np.ndim(lag) == 0 else [int(x) for x in lag]
        est, se = empirical_covariance(batch, lag_v, return_se=True)
        rep.add(Check(f"covariance_lag_{'_'.join(map(str, lag_v))}", est, covariance(symbol, lag_v),
                      5 * se, "equal", N=w.size))
    return rep


def _weight_batch(symbol, p, seed, workers):
    if symbol.dimension != 1:
        raise ValueError("weighted-sum suites are one-dimensional")
    ws = random_weights(p["vectors"], p["max_dim"], seed, complex_=p.get("complex", False))
    batch = draw_batch(symbol, p["max_dim"], p["samples"], seed, workers)
    return ws, batch


def _sums_matrix(batch, ws, sigma):
    n = batch.window.size
    A = np.zeros((n, len(ws)), dtype=complex if any(not a.is_real for a in ws) else float)
    for j, a in enumerate(ws):
        A[:a.values.size, j] = a.values
    return (batch.bits.astype(float) - sigma) @ A


def suite_riesz(symbol, p, seed, workers):
    rep = ExperimentReport("riesz")
    ws = random_weights(p["vectors"], p["max_dim"], seed, complex_=p["complex"])
    c = math.sqrt(riesz_constant_sq(symbol))
    s = math.sqrt(symbol.sigma)
    l2 = np.array([l2_norm_analytic(symbol, a) for a in ws])
    for a, v in zip(ws, l2):
        rep.add(Check("riesz_lower", v, c * a.norm, 1e-9, "lower", N=len(a)))
        rep.add(Check("riesz_upper", v, s * a.norm, 1e-9, "upper", N=len(a)))
    if p["samples"]:
        batch = draw_batch(symbol, p["max_dim"], p["samples"], seed, workers)
        S2 = np.abs(_sums_matrix(batch, ws, symbol.sigma)) ** 2
        emp = np.sqrt(S2.mean(axis=0))
        bs = _bootstrap_for(batch.count, seed)
        se = Bootstrap.se(np.sqrt(bs.means(S2)))
        for a, e, v, sd in zip(ws, emp, l2, se):
            # relative floor covers rounding when S^2 is constant (one site, sigma = 1/2)
            rep.add(Check("l2_monte_carlo", float(e), float(v), 5 * float(sd) + 1e-9 * float(v), "equal",
                          N=len(a)))
    return rep


_LAMS = (-1.0, -0.5, -0.25, 0.25, 0.5, 1.0)


def suite_subgaussian(symbol, p, seed, workers):
    rep = ExperimentReport("subgaussian")
    ws, batch = _weight_batch(symbol, dict(p, complex=False), seed, workers)
    lams = np.asarray(p["lambdas"], dtype=float)
    margins, ses = subgaussian_margins(batch, ws, symbol.sigma, lams)
    for a, mrow, srow in zip(ws, margins, ses):
        for lam, m, s in zip(lams, mrow, srow):
            rep.add(Check(f"margin_lambda_{lam:g}", float(m), 0.0, 5 * float(s), "lower", N=len(a)))
    if symbol.is_constant:
        q = symbol.sigma
        ref = 1.0 - math.log(q * math.exp(1 - q) + (1 - q) * math.exp(-q))
        m, s = subgaussian_margins(batch, [WeightVector([1.0])], q, [1.0])
        rep.add(Check("bernoulli_closed_form", float(m[0, 0]), ref, 5 * float(s[0, 0]), "equal", N=1))
    return rep


def suite_khintchine(symbol, p, seed, workers):
    rep = ExperimentReport("khintchine")
    ws, batch = _weight_batch(symbol, dict(p, complex=False), seed, workers)
    S = np.abs(_sums_matrix(batch, ws, symbol.sigma))
    bs = _bootstrap_for(batch.count, seed)
    S2 = S ** 2
    n2 = np.sqrt(S2.mean(axis=0))
    b2 = np.sqrt(bs.means(S2))
    rows = []
    for pp in p["p"]:
        pp = float(pp)
        K = khintchine_constant(symbol, pp)
        Sp = S ** pp
        np_ = Sp.mean(axis=0) ** (1 / pp)
        bp = bs.means(Sp) ** (1 / pp)
        se_p = Bootstrap.se(bp)
        se_diff = Bootstrap.se(bp - K * b2)
        se_low = Bootstrap.se(bp - b2)
        for j, a in enumerate(ws):
            # |S| constant (one site, sigma = 1/2) makes the SE vanish; floor for rounding
            rep.add(Check(f"pnorm_ge_2norm_p{pp:g}", float(np_[j]), float(n2[j]),
                          5 * float(se_low[j]) + 1e-9 * float(n2[j]), "lower", N=len(a)))
            rep.add(Check(f"khintchine_p{pp:g}", float(np_[j]), float(K * n2[j]), 5 * float(se_diff[j]),
                          "upper", N=len(a)))
            bound = absolute_pnorm_bound(a, pp)
            rep.add(Check(f"lemma_p{pp:g}", float(np_[j]), bound, 5 * float(se_p[j]) * bound / float(np_[j]),
                          "upper", N=len(a)))
        rows.append([pp, K, khintchine_constant_abstract(symbol, pp)])
    rep.series["constants"] = {"columns": ["p", "theorem_constant", "abstract_constant"], "rows": rows}
    return rep


def suite_weyl(symbol, p, seed, workers):
    Ns = sorted(int(n) for n in p["N_list"])
    batch = draw_batch(symbol, Ns[-1], p["samples"], seed, workers)
    ts = [float(t) for t in p["t_list"]]
    slopes = weyl_decay_slopes(batch.bits, ts, Ns)
    rep = ExperimentReport("weyl", sweep=True)
    rows = []
    n = np.arange(Ns[-1])
    for j, t in enumerate(ts):
        frac = float(np.mean(slopes[:, j] <= p["slope"]))
        rep.add(Check(f"decay_fraction_t{t:.6g}", frac, p["fraction"], 0.0, "lower", N=Ns[-1],
                      note=f"median slope {np.median(slopes[:, j]):.3f}"))
        cs = np.cumsum(batch.bits * np.exp(2j * np.pi * np.mod(n * t, 1.0))[None, :], axis=1)
        med = np.median(np.abs(cs[:, np.asarray(Ns) - 1]) / np.asarray(Ns), axis=0)
        rows.extend([[t, N, float(m)] for N, m in zip(Ns, med)])
    rep.add_series("decay", ["t", "N", "median_abs_average"], rows)
    return rep


def suite_salem_littlewood(symbol, p, seed, workers):
    rep = ExperimentReport("salem-littlewood", sweep=True)
    Ns = sorted(int(n) for n in p["N_list"])
    batch = draw_batch(symbol, max(Ns + [int(n) for n in p["N_list_deg2"]] or [8]), p["samples"], seed, workers)
    r1 = salem_littlewood_suite(symbol, IntPolynomial.monomial(1), Ns, p["samples"], seed, bits=batch.bits)
    rep.extend(r1)
    if p["N_list_deg2"]:
        r2 = salem_littlewood_suite(symbol, IntPolynomial.monomial(2), p["N_list_deg2"], p["samples"], seed,
                                    bits=batch.bits)
        for c in r2.checks:
            rep.checks.append(c)
        rep.series["weyl_deg2"] = r2.series["weyl"]
    return rep


def suite_sumset(symbol, p, seed, workers):
    W, M = int(p["W"]), int(p["M"])
    d = symbol.dimension
    w = Box([-W] * d, [2 * W + 1] * d)
    batch = draw_batch(symbol, w, p["samples"], seed, workers)
    cov = np.array([sumset_coverage(c, M) for c in batch])
    rep = ExperimentReport("sumset", sweep=bool(p["nested_W"]))
    rep.add(Check("full_coverage_fraction", float(np.mean(cov == 1.0)), p["fraction"], 0.0, "lower", N=W))
    if p["nested_W"]:
        Ws = sorted(int(x) for x in p["nested_W"])
        covs = np.empty((p["nested_samples"], len(Ws)))
        for j, Wj in enumerate(Ws):
            wj = Box([-Wj] * d, [2 * Wj + 1] * d)
            bj = draw_batch(symbol, wj, p["nested_samples"], seed, workers, nested=True)
            covs[:, j] = [sumset_coverage(c, M) for c in bj]
        drops = int(np.sum(np.diff(covs, axis=1) < 0))
        rep.add(Check("nested_monotone_violations", drops, 0, 0, "upper", N=Ws[-1]))
        rep.add_series("coverage", ["W", "mean_coverage"], [[Wj, float(c)] for Wj, c in zip(Ws, covs.mean(axis=0))])
    return rep


def suite_gaps(symbol, p, seed, workers):
    Ns = sorted(int(n) for n in p["N_list"])
    batch = draw_batch(symbol, Ns[-1], p["samples"], seed, workers)
    rep = gap_presence_curve(symbol, p["lengths"], Ns, p["samples"], seed, bits=batch.bits)
    rep.suite = "gaps"
    med = [row[1] for row in rep.series["max_gap"]["rows"]]
    for (N0, m0), (N1, m1) in zip(zip(Ns, med), zip(Ns[1:], med[1:])):
        # medians are multiples of 1/2, so a strict increase is a step of at least 1/2
        rep.add(Check("median_max_gap_increase", m1 - m0, 0.5, 0.0, "lower", N=N1))
    return rep


def suite_residues(symbol, p, seed, workers):
    N, q = int(p["N"]), int(p["q"])
    P = IntPolynomial(p["polynomial"]) if p["polynomial"] else None
    Ns = sorted(set([int(x) for x in p["N_list"]] + [N]))
    batch = draw_batch(symbol, Ns[-1], p["samples"], seed, workers)
    rep = ExperimentReport("residues", sweep=bool(p["N_list"]))
    for i, c in enumerate(batch):
        bits = c.bits[:N]
        h = residue_histogram(bits, q, P)
        k = int(bits.sum())
        se = math.sqrt((1 / q) * (1 - 1 / q) / k)
        for r in range(q):
            rep.add(Check(f"residue_{r}", float(h[r]), 1.0 / q, 5 * se, "equal", N=N,
                          note=f"sample {i}"))
    if p["N_list"]:
        devs = np.array([[np.max(np.abs(residue_histogram(c.bits[:n], q, P) - 1 / q)) for n in p["N_list"]]
                         for c in batch])
        med = np.median(devs, axis=0)
        slope = _loglog_slope(p["N_list"], med)
        rep.add(Check("deviation_exponent_upper", slope, -0.3, 0.0, "upper"))
        rep.add(Check("deviation_exponent_lower", slope, -0.7, 0.0, "lower"))
        rep.add_series("deviation", ["N", "median_max_deviation"], [[n, float(m)] for n, m in zip(p["N_list"], med)])
    return rep


def suite_ergodic(symbol, p, seed, workers):
    Ns = sorted(int(n) for n in p["N_list"])
    batch = draw_batch(symbol, Ns[-1], p["samples"], seed, workers)
    system = RotationSystem(p["alpha"], p["x0"], p["observable"], p["beta"])
    rep = ExperimentReport("ergodic", sweep=True)
    for deg in p["degrees"]:
        P = IntPolynomial.monomial(int(deg))
        dev = ergodic_deviation_curve(batch.bits, system, P, symbol.sigma, Ns)
        med = np.median(dev, axis=0)
        slope = _loglog_slope(Ns, med)
        rep.add(Check(f"decay_exponent_deg{deg}", slope, p["exponent"], 0.0, "upper", N=Ns[-1]))
        rep.add_series(f"deviation_deg{deg}", ["N", "median_deviation"],
                       [[n, float(m)] for n, m in zip(Ns, med)])
    return rep


# ---------------------------------------------------------------------------
# registry

@dataclass(frozen=True)
class Param:
    kind: str
    default: object = None
    required: bool = False


@dataclass(frozen=True)
class SuiteSpec:
    fn: Callable
    params: dict = field(default_factory=dict)
    sweep: bool = False
    doc: str = ""


_DYADIC = [2 ** k for k in range(8, 13)]

SUITES = {
    "sample": SuiteSpec(suite_sample, {
        "size": Param("size", required=True),
        "samples": Param("int", 10000),
    }, doc="density, count law, negative association and chi-square exactness"),
    "exact-dist": SuiteSpec(suite_exact_dist, {
        "size": Param("size", required=True),
    }, doc="coherence of the full cylinder distribution"),
    "gap-prob": SuiteSpec(suite_gap_prob, {
        "lengths": Param("int_list", required=True),
        "contraction": Param("bool", True),
    }, sweep=True, doc="gap probabilities and strict contraction"),
    "covariance": SuiteSpec(suite_covariance, {
        "size": Param("size", required=True),
        "samples": Param("int", 10000),
        "lags": Param("list", [0, 1, 2]),
    }, doc="empirical covariances against -|fhat|^2"),
    "riesz": SuiteSpec(suite_riesz, {
        "vectors": Param("int", 200),
        "max_dim": Param("int", 64),
        "samples": Param("int", 100000),
        "complex": Param("bool", False),
    }, doc="two-sided L2 bounds and Monte Carlo agreement"),
    "subgaussian": SuiteSpec(suite_subgaussian, {
        "vectors": Param("int", 100),
        "max_dim": Param("int", 64),
        "samples": Param("int", 100000),
        "lambdas": Param("float_list", list(_LAMS)),
    }, doc="exponential moment bound"),
    "khintchine": SuiteSpec(suite_khintchine, {
        "vectors": Param("int", 50),
        "max_dim": Param("int", 64),
        "samples": Param("int", 100000),
        "p": Param("float_list", [3.0, 4.0, 6.0]),
    }, doc="Lp against L2 norms"),
    "weyl": SuiteSpec(suite_weyl, {
        "N_list": Param("int_list", [2 ** k for k in range(8, 15)]),
        "samples": Param("int", 100),
        "t_list": Param("float_list", [INV_GOLDEN, 1 / 3, 1 / 7]),
        "slope": Param("float", -0.3),
        "fraction": Param("float", 0.95),
    }, sweep=True, doc="decay of normalized exponential sums"),
    "salem-littlewood": SuiteSpec(suite_salem_littlewood, {
        "N_list": Param("int_list", _DYADIC),
        "N_list_deg2": Param("int_list", []),
        "samples": Param("int", 1000),
    }, sweep=True, doc="maxima of polynomial Weyl sums"),
    "sumset": SuiteSpec(suite_sumset, {
        "W": Param("int", required=True),
        "M": Param("int", 50),
        "samples": Param("int", 100),
        "fraction": Param("float", 0.99),
        "nested_W": Param("int_list", []),
        "nested_samples": Param("int", 10),
    }, doc="coverage of X + X"),
    "gaps": SuiteSpec(suite_gaps, {
        "N_list": Param("int_list", required=True),
        "lengths": Param("int_list", [1, 5, 10, 15, 20]),
        "samples": Param("int", 100),
    }, sweep=True, doc="gap presence and growth of the longest gap"),
    "residues": SuiteSpec(suite_residues, {
        "N": Param("int", required=True),
        "q": Param("int", 7),
        "samples": Param("int", 1),
        "polynomial": Param("int_list", []),
        "N_list": Param("int_list", []),
    }, doc="residue class equidistribution"),
    "ergodic": SuiteSpec(suite_ergodic, {
        "N_list": Param("int_list", [2 ** k for k in range(10, 18)]),
        "samples": Param("int", 50),
        "degrees": Param("int_list", [1, 2]),
        "alpha": Param("float", INV_GOLDEN),
        "x0": Param("float", 0.0),
        "observable": Param("str", "character"),
        "beta": Param("float", 0.5),
        "exponent": Param("float", -0.3),
    }, sweep=True, doc="weighted polynomial ergodic averages"),
}

# defaults used when a suite runs as part of "all" without its own section
ALL_DEFAULTS = {
    "sample": {"size": 8},
    "exact-dist": {"size": 8},
    "gap-prob": {"lengths": [1, 2, 4, 8]},
    "covariance": {"size": 64},
    "sumset": {"W": 2000},
    "gaps": {"N_list": [2 ** 10, 2 ** 14]},
    "residues": {"N": 100000},
    "salem-littlewood": {"samples": 100},
}


def suite_names():
    return list(SUITES) + ["all"]


def run_suite(name, symbol, params, seed, workers=1) -> ExperimentReport:
    """Run one suite with already validated parameters."""
    spec = SUITES[name]
    full = {k: v.default for k, v in spec.params.items()}
    full.update(params)
    rep = spec.fn(symbol, full, int(seed), int(workers))
    rep.suite = name
    return rep
