"""Acceptance criteria, one test each, run at the stated tolerances.

Every test records its verdict with :func:`conftest.record`; a summary line
per criterion is printed at the end of the pytest session.
"""
import math
import time

import numpy as np
import pytest

from conftest import record
from stationary_dpp import cli
from stationary_dpp.kernel import Box, build_kernel, exact_distribution, gap_probability, interval
from stationary_dpp.sampler import empirical_covariance, empirical_density
from stationary_dpp.suites import _chi2_pvalue, draw_batch, run_suite
from stationary_dpp.symbol import SpectralSymbol, bernoulli_symbol, indicator

pytestmark = pytest.mark.acceptance

SEED = 20240611


def half():
    return bernoulli_symbol(0.5)


def _finish(criterion, ok, t0, limit, detail):
    dt = time.perf_counter() - t0
    in_time = dt < limit
    record(criterion, ok and in_time, f"{detail}; {dt:.1f}s (limit {limit:g}s)")
    return in_time


def _failures(rep):
    return "; ".join(f"{c.name}[N={c.N}] stat={c.statistic:.6g} bound={c.reference:.6g}"
                     for c in rep.failures()[:6])


def test_criterion_01_gap_probability_oracle(bern, sine):
    t0 = time.perf_counter()
    g1 = gap_probability(bern, interval(8))
    g2 = gap_probability(sine, interval(2))
    M = build_kernel(sine, 2).matrix
    hand = (1 - M[0, 0]) * (1 - M[1, 1]) - M[0, 1] * M[1, 0]
    ok = abs(g1 - 0.05764801) <= 1e-12 and abs(g2 - (0.25 - 1 / math.pi ** 2)) <= 1e-10 \
        and abs(g2 - hand) <= 1e-10
    in_time = _finish("1 gap-probability oracle", ok, t0, 1, f"gap(0.3, 8)={g1:.12g} gap(sine, 2)={g2:.12g}")
    assert abs(g1 - 0.05764801) <= 1e-12
    assert abs(g2 - 0.14867881635766) <= 1e-10
    assert abs(g2 - hand) <= 1e-10
    assert in_time


def test_criterion_02_exact_distribution(bern, sine):
    t0 = time.perf_counter()
    worst = {}
    ok = True
    for name, s in (("bernoulli", bern), ("sine", sine)):
        P = exact_distribution(s, interval(8))
        marg = np.array([P.marginal(i) for i in range(8)])
        ok &= P.probs.size == 256 and bool(P.probs.min() >= -1e-10)
        ok &= abs(P.probs.sum() - 1) <= 1e-9 and bool(np.max(np.abs(marg - s.sigma)) <= 1e-9)
        worst[name] = (P.probs.min(), abs(P.probs.sum() - 1), np.max(np.abs(marg - s.sigma)))
    in_time = _finish("2 exact distribution coherence", ok, t0, 5,
                      " ".join(f"{k}: min={v[0]:.2e} |sum-1|={v[1]:.1e} marg={v[2]:.1e}" for k, v in worst.items()))
    assert ok and in_time


def test_criterion_03_sampler_exactness(sine):
    t0 = time.perf_counter()
    W = interval(8)
    batch = draw_batch(sine, W, 10 ** 6, SEED)
    masks = batch.bits.astype(np.int64) @ (1 << np.arange(8))
    obs = np.bincount(masks, minlength=256).astype(float)
    pval, _, _ = _chi2_pvalue(obs, batch.count * exact_distribution(sine, W).probs)
    cov, se = empirical_covariance(batch, 1, return_se=True)
    target = -1 / math.pi ** 2
    ok = pval > 1e-4 and abs(cov - target) <= 5 * se
    in_time = _finish("3 sampler exactness", ok, t0, 300,
                      f"chi2 p={pval:.3g} cov1={cov:.5f} vs {target:.5f} (se {se:.1e})")
    assert pval > 1e-4
    assert abs(cov - target) <= 5 * se
    assert in_time


def test_criterion_04_strict_contraction(bern, sine):
    t0 = time.perf_counter()
    lengths = [2 ** k for k in range(9)]
    reports = {name: run_suite("gap-prob", s, {"lengths": lengths, "contraction": True}, SEED)
               for name, s in (("bernoulli", bern), ("sine", sine))}
    ok = all(r.passed for r in reports.values())
    margins = {c.N: 1 - c.statistic for c in reports["sine"].checks if c.name == "max_eigenvalue"}
    detail = "sine 1-lambda_max: " + ", ".join(f"{n}:{m:.1e}" for n, m in sorted(margins.items()))
    in_time = _finish("4 strict contraction", ok, t0, 30, detail)
    assert reports["bernoulli"].passed, _failures(reports["bernoulli"])
    assert reports["sine"].passed, _failures(reports["sine"])
    assert in_time


def test_criterion_05_riesz(trig):
    t0 = time.perf_counter()
    rep = run_suite("riesz", trig, {"vectors": 200, "max_dim": 64, "samples": 10 ** 5}, SEED)
    names = {c.name for c in rep.checks}
    counts = {n: sum(c.name == n for c in rep.checks) for n in names}
    ok = rep.passed and counts == {"riesz_lower": 200, "riesz_upper": 200, "l2_monte_carlo": 200}
    in_time = _finish("5 Riesz / L2", ok, t0, 120, f"{len(rep.checks) - len(rep.failures())}/{len(rep.checks)} checks")
    assert rep.passed, _failures(rep)
    assert counts == {"riesz_lower": 200, "riesz_upper": 200, "l2_monte_carlo": 200}
    assert in_time


def test_criterion_06_subgaussian(trig):
    t0 = time.perf_counter()
    lams = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0]
    rep = run_suite("subgaussian", trig, {"vectors": 100, "samples": 10 ** 5, "lambdas": lams}, SEED)
    bern = run_suite("subgaussian", bernoulli_symbol(0.3), {"vectors": 100, "samples": 10 ** 5, "lambdas": lams}, SEED)
    closed = [c for c in bern.checks if c.name == "bernoulli_closed_form"][0]
    expected = 1 - math.log(0.3 * math.exp(0.7) + 0.7 * math.exp(-0.3))
    ok = rep.passed and bern.passed and len(rep.checks) == 600 and abs(closed.reference - expected) < 1e-15
    in_time = _finish("6 sub-Gaussian", ok, t0, 180,
                      f"trig {len(rep.checks) - len(rep.failures())}/600, bernoulli margin "
                      f"{closed.statistic:.5f} vs {expected:.5f} (tol {closed.tolerance:.1e})")
    assert rep.passed, _failures(rep)
    assert bern.passed, _failures(bern)
    assert expected == pytest.approx(0.8843, abs=5e-5)
    assert in_time


def test_criterion_07_khintchine(trig):
    t0 = time.perf_counter()
    rep = run_suite("khintchine", trig, {"p": [3.0, 4.0, 6.0], "samples": 10 ** 5}, SEED)
    in_time = _finish("7 Khintchine-Kahane", rep.passed, t0, 180,
                      f"{len(rep.checks) - len(rep.failures())}/{len(rep.checks)} checks")
    assert rep.passed, _failures(rep)
    assert in_time


def test_criterion_08_salem_littlewood(sine):
    t0 = time.perf_counter()
    params = {"N_list": [256, 512, 1024, 2048, 4096], "N_list_deg2": [64, 128, 256], "samples": 1000}
    ok = True
    ratios = {}
    reps = {}
    for name, s in (("half", half()), ("sine", sine)):
        rep = run_suite("salem-littlewood", s, params, SEED)
        reps[name] = rep
        r = [c for c in rep.checks if c.name == "median_ratio_d1"][0]
        ratios[name] = r.statistic
        ok &= rep.passed and r.statistic <= 9.2
        ok &= all(c.statistic == 0 for c in rep.checks if c.name.startswith("violation_freq"))
    in_time = _finish("8 Salem-Littlewood", ok, t0, 900,
                      "median ratio 4096/256: " + ", ".join(f"{k}={v:.3f}" for k, v in ratios.items()))
    for name, rep in reps.items():
        assert rep.passed, _failures(rep)
        assert ratios[name] <= 9.2
    assert in_time


def test_criterion_09_weyl_decay():
    t0 = time.perf_counter()
    rep = run_suite("weyl", half(), {"N_list": [2 ** k for k in range(8, 15)], "samples": 100,
                                     "slope": -0.3, "fraction": 0.95}, SEED)
    detail = ", ".join(f"{c.name}={c.statistic:.2f}" for c in rep.checks)
    in_time = _finish("9 Weyl decay", rep.passed, t0, 300, detail)
    assert rep.passed, _failures(rep)
    assert in_time


def test_criterion_10_structure(sine):
    t0 = time.perf_counter()
    s = half()
    reps = {
        "sumset_half": run_suite("sumset", s, {"W": 2000, "M": 50, "samples": 100}, SEED),
        "sumset_sine": run_suite("sumset", sine, {"W": 2000, "M": 50, "samples": 100}, SEED),
        "gaps": run_suite("gaps", s, {"N_list": [2 ** 10, 2 ** 14, 2 ** 18], "samples": 100}, SEED),
        "residues": run_suite("residues", s, {"N": 10 ** 6, "q": 7}, SEED),
        "ergodic": run_suite("ergodic", s, {"N_list": [2 ** k for k in range(10, 18)], "degrees": [2]}, SEED),
    }
    ok = all(r.passed for r in reps.values())
    med = [row[1] for row in reps["gaps"].series["max_gap"]["rows"]]
    slope = reps["ergodic"].checks[0].statistic
    in_time = _finish("10 structure", ok, t0, 1200,
                      f"coverage {reps['sumset_half'].checks[0].statistic:.2f}/"
                      f"{reps['sumset_sine'].checks[0].statistic:.2f}, median gaps {med}, "
                      f"ergodic slope {slope:.3f}")
    for name, rep in reps.items():
        assert rep.passed, f"{name}: {_failures(rep)}"
    assert in_time


def test_criterion_11_z2_smoke():
    t0 = time.perf_counter()
    s = SpectralSymbol([bernoulli_symbol(0.3).factors[0], indicator("-1/4", "1/4")])
    W = Box([0, 0], [16, 16])
    batch = draw_batch(s, W, 20000, SEED)
    dens = empirical_density(batch)
    ok_density = abs(dens.pooled - 0.15) <= 5 * dens.se
    sub = Box([0, 0], [2, 2])
    g = gap_probability(s, sub)
    M = build_kernel(s, sub).matrix
    det4 = float(np.linalg.det(np.eye(4) - M))
    ok_oracle = abs(g - det4) <= 1e-10
    # empirical: empty 2x2 sub-boxes, averaged over positions within each sample
    x = batch.bits.reshape(-1, 16, 16)
    empty = ~(x[:, :-1, :-1] | x[:, 1:, :-1] | x[:, :-1, 1:] | x[:, 1:, 1:])
    per = empty.reshape(batch.count, -1).mean(axis=1)
    se = per.std(ddof=1) / math.sqrt(per.size)
    ok_emp = abs(per.mean() - g) <= 5 * se
    in_time = _finish("11 Z^2 smoke test", ok_density and ok_oracle and ok_emp, t0, 120,
                      f"density {dens.pooled:.5f} (se {dens.se:.1e}), gap {g:.6f} vs det {det4:.6f}, "
                      f"empirical {per.mean():.5f} (se {se:.1e})")
    assert ok_density and ok_oracle and ok_emp
    assert in_time


REPRO_CONFIG = """
suite: all
seed: 987654321
symbol:
  kind: trig
  coefficients: [[0.5, 0.0], [0.125, 0.0]]
params:
  sample: {size: 6, samples: 3000}
  exact-dist: {size: 6}
  gap-prob: {lengths: [1, 2, 4]}
  covariance: {size: 300, samples: 20}
  riesz: {vectors: 10, max_dim: 16, samples: 2000}
  subgaussian: {vectors: 5, max_dim: 16, samples: 2000}
  khintchine: {vectors: 5, max_dim: 16, samples: 2000}
  weyl: {N_list: [256, 512, 1024], samples: 4}
  salem-littlewood: {N_list: [256, 512], N_list_deg2: [64], samples: 20}
  sumset: {W: 200, M: 20, samples: 5, nested_W: [100, 200], nested_samples: 3}
  gaps: {N_list: [256, 1024], samples: 10, lengths: [2, 5]}
  residues: {N: 1000, q: 5, samples: 2, N_list: [250, 500, 1000]}
  ergodic: {N_list: [256, 512, 1024], samples: 5}
"""


def test_criterion_12_reproducibility(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "run.yaml"
    cfg.write_text(REPRO_CONFIG)
    outs = []
    for tag, workers in (("a", 1), ("b", 1), ("c", 3)):
        out = tmp_path / tag
        status = cli.main(["run", "--config", str(cfg), "--out", str(out), "--workers", str(workers)])
        assert status in (0, 1)
        outs.append(out)
    files = sorted(p.name for p in outs[0].glob("*.csv"))
    identical = all((outs[0] / f).read_bytes() == (o / f).read_bytes() for o in outs[1:] for f in files)
    same_set = all(sorted(p.name for p in o.glob("*.csv")) == files for o in outs)
    suites_covered = {f.split("_")[0].removesuffix(".csv") for f in files}
    ok = identical and same_set and len(files) >= 13
    record("12 reproducibility", ok, f"{len(files)} CSV files over {len(suites_covered)} suites; "
                                     f"{time.perf_counter() - t0:.1f}s")
    assert same_set and len(files) >= 13
    assert identical
