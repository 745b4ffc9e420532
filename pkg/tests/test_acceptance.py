"""Acceptance suite: one check per criterion, one PASS/FAIL line each.

Run under pytest (the lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import itertools
import math
import tempfile
import time

import numpy as np
import pytest

from dpkmeans import mechanisms
from dpkmeans.clustering import LloydConfig, lloyd
from dpkmeans.core import Dataset, WeightedDataset, kmeans_cost, make_rng
from dpkmeans.datasets import gen_hard_instance, gen_synthetic
from dpkmeans.experiment import ExperimentSpec, mean_cost, run_experiment
from dpkmeans.gridcover import (
    GridLevel, SamplerBudgetExceeded, build_offsets, candidate_grid_points, private_grid_set_cover,
)
from dpkmeans.mechanisms import (
    CoverageDistribution, GaussianParam, LaplaceParam, exp_mechanism_sample, gaussian_sample,
    laplace_sample, noisy_avg, noisy_avg_sigma, noisy_count,
)
from dpkmeans.pipeline import PipelineConfig, PrivacyParams, accountant, run, split_budget

RESULTS: dict = {}


def record(n: int, ok: bool, detail: str, seconds: float, limit=None) -> None:
    within = limit is None or seconds < limit
    status = "PASS" if ok and within else "FAIL"
    timing = f"{seconds:.1f}s" + (f" (limit {limit}s)" if limit else "")
    RESULTS[n] = f"criterion {n:>2}: {status}  {detail}  [{timing}]"
    print(RESULTS[n])
    assert ok and within, RESULTS[n]


def note(key: str, text: str) -> None:
    RESULTS[key] = text
    print(text)


def test_c01_exp_mechanism_exactness():
    t0 = time.perf_counter()
    grid = 10
    dist = CoverageDistribution([0, 1], [3, 1], grid, 1.0)
    w = np.exp(0.5 * np.array([3, 1] + [0] * 8, dtype=float))
    law = w / w.sum()
    rng = make_rng(2024)
    hits = np.zeros(grid)
    for _ in range(100_000):
        hits[exp_mechanism_sample(dist, lambda g: int(g.integers(grid)), rng)] += 1
    tv = 0.5 * np.abs(hits / hits.sum() - law).sum()
    record(1, tv < 0.01, f"TV={tv:.4f} < 0.01 over 1e5 draws", time.perf_counter() - t0, 5)


def test_c02_candidate_completeness():
    t0 = time.perf_counter()
    rng = make_rng(7)
    mismatches = 0
    for _ in range(200):
        d = int(rng.integers(1, 3))
        level = GridLevel(1, float(rng.uniform(0.05, 0.5)), float(rng.uniform(0, 0.4)), d)
        assert 2 * level.half_extent + 1 <= 41
        p = rng.uniform(-1, 1, size=d)
        p /= max(1.0, float(np.linalg.norm(p)))
        B = level.half_extent
        brute = {
            b for b in itertools.product(range(-B, B + 1), repeat=d)
            if ((level.t * np.array(b) - p) ** 2).sum() < level.sq_threshold
        }
        mismatches += candidate_grid_points(p, level, build_offsets(level, 1e-9)) != brute
    record(2, mismatches == 0, f"{200 - mismatches}/200 cases equal brute force", time.perf_counter() - t0, 10)


def test_c03_greedy_bicriteria():
    t0 = time.perf_counter()
    level = GridLevel(1, 0.1, 0.1, 2)
    pts = np.array([[0.5, 0.5], [0.52, 0.51], [0.49, 0.53], [0.51, 0.48],
                    [-0.5, -0.3], [-0.52, -0.31], [-0.49, -0.29], [-0.51, -0.32]])
    picks = 2 * math.ceil(2 * math.log(4)) + 1
    worst = len(pts)
    for seed in range(20):
        pool = np.ones(len(pts), dtype=bool)
        res = private_grid_set_cover(pts, pool, level, picks, math.inf, make_rng(seed))
        worst = min(worst, len(res.covered))
    ok = picks == 7 and worst >= 0.75 * len(pts)
    record(3, ok, f"worst coverage {worst}/{len(pts)} within {picks} picks, 20 runs", time.perf_counter() - t0, 5)


def test_c04_accountant_fidelity():
    t0 = time.perf_counter()
    rng = make_rng(4)
    worst = 0.0
    for _ in range(1000):
        eE, eL = rng.uniform(1e-4, 5, size=2)
        eG = rng.uniform(1e-4, 1 / 3)
        dE, dG = 10.0 ** rng.uniform(-12, -0.1, size=2)
        rep = accountant(PrivacyParams(eE, dE, eL, eG, dG))
        eps = math.e * eE * math.log(1 / dE) / 2 + eL + eG
        worst = max(worst, abs(rep.eps_total - eps) / eps, abs(rep.delta_total - (dE + dG)) / (dE + dG))
    trips = 0
    for _ in range(1000):
        x, y = rng.uniform(1e-3, 1.0), 10.0 ** rng.uniform(-12, -1)
        rep = accountant(split_budget(x, y))
        trips += math.isclose(rep.eps_total, x, rel_tol=1e-12) and math.isclose(rep.delta_total, y, rel_tol=1e-12)
    ok = worst <= 1e-12 and trips == 1000
    record(4, ok, f"max rel error {worst:.2e}; split round-trips {trips}/1000", time.perf_counter() - t0)


def _two_balls(seed, n=200, d=10):
    rng = make_rng(seed)
    shift = 0.5 / math.sqrt(d)
    h = n // 2
    pts = np.vstack([rng.normal(0, 0.05, (h, d)) + shift, rng.normal(0, 0.05, (n - h, d)) - shift])
    return Dataset(pts, 2.0 * float(np.linalg.norm(pts, axis=1).max()))


def test_c05_large_budget_consistency():
    t0 = time.perf_counter()
    params = split_budget(1e3, 1e-6, clamp=True)
    wins, ratios = 0, []
    for seed in range(5):
        data = _two_balls(100 + seed)
        base = min(kmeans_cost(data, lloyd(WeightedDataset.unweighted(data.points), LloydConfig(2), make_rng(s)))
                   for s in range(3))
        res = run(data, PipelineConfig(k=2, privacy=params, seed=seed))
        ratios.append(res.cost / base)
        wins += res.cost <= 2 * base
    detail = f"{wins}/5 seeds within 2x Lloyd (ratios {', '.join(f'{r:.3g}' for r in ratios)})"
    record(5, wins >= 4, detail, time.perf_counter() - t0, 60)


C6_KS = (2, 6, 10)
C6_REPS = 5
C6_LIMIT = 900.0


def test_c06_realistic_budget():
    t0 = time.perf_counter()
    data = gen_synthetic(5000, 20, 16, seed=0)
    delta = data.n ** -1.5
    base_spec = ExperimentSpec(ks=C6_KS, eps_total=1.0, delta_total=delta, reps=C6_REPS, seed=0)
    params = split_budget(1.0, delta, rounds=base_spec.dp_lloyd_rounds)

    # The cheapest private run (smallest k) bounds the sweep's runtime from below.
    probe_cfg = PipelineConfig(k=min(C6_KS), privacy=params, final_dp_lloyd_rounds=base_spec.dp_lloyd_rounds,
                               seed=0, max_proposals=base_spec.max_proposals)
    try:
        p0 = time.perf_counter()
        run(data, probe_cfg)
        probe = time.perf_counter() - p0
        projected = probe * len(C6_KS) * C6_REPS
        feasible, why = projected < C6_LIMIT, f"one k={min(C6_KS)} private run took {probe:.0f}s"
    except SamplerBudgetExceeded as exc:
        feasible, why, projected = False, f"sampler budget exceeded: {exc}", math.inf

    summary = None
    if feasible:
        try:
            with tempfile.TemporaryDirectory() as tmp:
                summary = run_experiment(data, base_spec, tmp)["summary"]
        except SamplerBudgetExceeded as exc:
            why = f"{why}, then the sweep stopped: {exc}"
    if summary is not None:
        priv = [mean_cost(summary, "private", k) for k in C6_KS]
        rand = [mean_cost(summary, "random", k) for k in C6_KS]
        lloy = [mean_cost(summary, "lloyd", k) for k in C6_KS]
        ok = all(p < r for p, r in zip(priv, rand)) and all(b <= a for a, b in zip(lloy, lloy[1:]))
        detail = (f"private {[f'{x:.4g}' for x in priv]} vs random {[f'{x:.4g}' for x in rand]}; "
                  f"lloyd {[f'{x:.4g}' for x in lloy]}")
        elapsed = time.perf_counter() - t0
    elif feasible:
        ok = False
        detail = f"default d'={math.ceil(math.log2(data.n) / 2)} sweep did not complete: {why}"
        elapsed = time.perf_counter() - t0
    else:
        ok = False
        detail = (f"default d'={math.ceil(math.log2(data.n) / 2)} sweep cannot finish in {C6_LIMIT:.0f}s: {why}, "
                  f"so {len(C6_KS) * C6_REPS} runs need >= {projected:.0f}s")
        elapsed = time.perf_counter() - t0

    # Labelled diagnostic with the natural-log reading of the projection dimension; not counted.
    d0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        diag_spec = ExperimentSpec(ks=C6_KS, eps_total=1.0, delta_total=delta, reps=C6_REPS, seed=0,
                                   dprime=math.ceil(math.log(data.n) / 2))
        summary = run_experiment(data, diag_spec, tmp)["summary"]
    priv = [mean_cost(summary, "private", k) for k in C6_KS]
    rand = [mean_cost(summary, "random", k) for k in C6_KS]
    lloy = [mean_cost(summary, "lloyd", k) for k in C6_KS]
    diag_ok = all(p < r for p, r in zip(priv, rand)) and all(b <= a for a, b in zip(lloy, lloy[1:]))
    note("6d", f"criterion  6 diagnostic (NOT counted, d'={diag_spec.dprime}): "
               f"{'conditions hold' if diag_ok else 'conditions fail'}; private {[f'{x:.4g}' for x in priv]} "
               f"random {[f'{x:.4g}' for x in rand]} lloyd {[f'{x:.4g}' for x in lloy]} "
               f"[{time.perf_counter() - d0:.0f}s]")
    record(6, ok, detail, elapsed, C6_LIMIT)


def test_c07_noise_calibration():
    t0 = time.perf_counter()
    rng = make_rng(77)
    lap = np.array([laplace_sample(LaplaceParam(1.5), rng) for _ in range(100_000)])
    gau = np.array([gaussian_sample(GaussianParam(2.0), rng) for _ in range(100_000)])
    checks = {
        "lap mean": abs(lap.mean()) < 0.05,
        "lap var": abs(lap.var() - 2 * 1.5**2) < 0.1 * 2 * 1.5**2,
        "lap cdf": max(abs((lap <= q).mean() - (1 - 0.5 * math.exp(-q / 1.5))) for q in (0.5, 1.5, 3.0)) < 0.01,
        "gauss mean": abs(gau.mean()) < 0.05,
        "gauss var": abs(gau.var() - 4.0) < 0.4,
        "gauss cdf": max(abs((gau <= q).mean() - 0.5 * (1 + math.erf(q / (2.0 * math.sqrt(2)))))
                         for q in (-2.0, 0.0, 1.0, 3.0)) < 0.01,
    }
    failed = [k for k, v in checks.items() if not v]
    record(7, not failed, "all checks hold" if not failed else f"failed: {failed}", time.perf_counter() - t0)


class _ZeroNormal:
    def normal(self, loc, scale, size=None):
        return np.zeros(size)


def test_c08_noisy_avg_contract(monkeypatch):
    t0 = time.perf_counter()
    members = make_rng(8).uniform(-0.3, 0.3, size=(400, 3))
    eps, delta, diam = 1 / 3, 1e-3, 2.0
    m_hat = noisy_count(len(members), eps, delta, 0.0)
    formula = len(members) - (5 / eps) * math.log(2 / delta)
    sigma = noisy_avg_sigma(m_hat, diam, eps, delta)
    sigma_formula = 5 * diam / (4 * eps * formula) * math.sqrt(2 * math.log(3.5 / delta))
    with monkeypatch.context() as m:
        m.setattr(mechanisms, "laplace_sample", lambda param, rng: 0.0)
        exact = noisy_avg(members, diam, eps, delta, _ZeroNormal())
    closed = (abs(m_hat - formula) <= 1e-12 * abs(formula) and abs(sigma - sigma_formula) <= 1e-12 * sigma_formula
              and np.allclose(exact, members.mean(axis=0), rtol=0, atol=1e-12))
    rng = make_rng(9)
    inside = 0
    for _ in range(1000):
        # Three members sit far below the count offset, so m_hat is negative.
        p = noisy_avg(members[:3], diam, eps, delta, rng, center=(0.1, 0.0, 0.0))
        inside += np.linalg.norm(p - np.array([0.1, 0.0, 0.0])) <= diam / 2
    record(8, closed and inside == 1000, f"closed form ok={closed}; fallback inside ball {inside}/1000",
           time.perf_counter() - t0)


def test_c09_hard_instance_sign():
    t0 = time.perf_counter()
    data = gen_hard_instance(4, 16, 25, seed=0)
    words = np.unique(data.points, axis=0)
    opt = kmeans_cost(data, words)
    params = split_budget(1.0, data.n ** -1.5)
    costs = [run(data, PipelineConfig(k=4, privacy=params, seed=s)).cost for s in range(5)]
    positive = sum(c > 0 for c in costs)
    record(9, opt == 0.0 and positive == 5, f"optimal cost {opt}; private cost > 0 in {positive}/5 seeds",
           time.perf_counter() - t0)


def test_c10_determinism():
    t0 = time.perf_counter()
    data = gen_synthetic(300, 6, 4, seed=3)
    spec = ExperimentSpec(ks=(2, 4), reps=2, seed=11)
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        first = run_experiment(data, spec, a)["summary_csv"].read_bytes()
        second = run_experiment(data, spec, b)["summary_csv"].read_bytes()
    record(10, first == second, f"summary.csv byte-identical ({len(first)} bytes)", time.perf_counter() - t0)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
