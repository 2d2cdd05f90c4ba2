"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a PASS/FAIL line shown in the terminal summary. Criteria
5, 6 and 7 share one benchmark run at p in {200, 400}.
"""

import itertools
import math
import statistics
import time

import numpy as np
import pytest

from gnisel.cli import main
from gnisel.core import AdjacencyGraph, sample_covariance, standardize
from gnisel.evalbench import BenchConfig, gni_f1_study, run_benchmark, simulate_cell
from gnisel.glasso import glasso_fit, kkt_residual, lambda_grid
from gnisel.gni import DiffMatrix, build_diff_matrix, expected_mse_random, gni_score, pair_discrepancy
from gnisel.synthgen import gen_random_graph

pytestmark = pytest.mark.slow


def _diff(values):
    return DiffMatrix(np.asarray(values, dtype=float), source_n=2, seed=0)


def _random_graph(p, rng):
    upper = np.triu(rng.random((p, p)) < 0.5, 1)
    return AdjacencyGraph((upper | upper.T).astype(np.uint8))


def test_c1_permutation_oracle(report):
    rng = np.random.default_rng(20261014)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        m, p = int(rng.integers(2, 7)), int(rng.integers(2, 6))
        xhat, x = rng.normal(size=(m, p)), rng.normal(size=(m, p))
        perms = [list(q) for q in itertools.permutations(range(p))]
        brute = np.mean([np.mean([np.mean((xhat[i, q] - x[i]) ** 2) for q in perms])
                         for i in range(m)])
        worst = max(worst, abs(expected_mse_random(xhat, _diff(x)) - brute))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 10
    report("C1 permutation oracle", ok, f"max_err={worst:.2e} time={elapsed:.2f}s")
    assert ok


def test_c2_closed_form_identity(report):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst, empty_nonzero = 0.0, 0
    for _ in range(1000):
        m, p = int(rng.integers(2, 60)), int(rng.integers(2, 15))
        xb = _diff(rng.normal(size=(m, p)))
        sc = gni_score(xb, _random_graph(p, rng))
        worst = max(worst, abs(sc.total - (sc.expected_mse_random - sc.mse_model)))
        empty_nonzero += gni_score(xb, AdjacencyGraph.empty(p)).total != 0.0
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and empty_nonzero == 0 and elapsed < 10
    report("C2 closed-form identity", ok,
           f"max_err={worst:.2e} empty_nonzero={empty_nonzero} time={elapsed:.2f}s")
    assert ok


def test_c3_glasso_correctness(report):
    tol = 1e-4
    t0 = time.perf_counter()
    worst_kkt, worst_inv, fits, unconverged = 0.0, 0.0, 0, 0
    for i in range(50):
        p = 5 if i % 2 == 0 else 10
        rng = np.random.default_rng(1000 + i)
        s = sample_covariance(standardize(rng.normal(size=(2 * p, p)))).entries
        for lam in lambda_grid(s, 10):
            fit = glasso_fit(s, lam, tol=tol)
            if not fit.converged:
                unconverged += 1
                continue
            fits += 1
            worst_kkt = max(worst_kkt, kkt_residual(fit, s))
            worst_inv = max(worst_inv, np.abs(fit.theta.entries @ fit.w.entries - np.eye(p)).max())
    two = glasso_fit(np.array([[1.0, 0.6], [0.6, 1.0]]), 0.2, tol=tol)
    w_err = abs(two.w.entries[0, 1] - 0.4)
    t_err = np.abs(two.theta.entries - np.linalg.inv([[1.2, 0.4], [0.4, 1.2]])).max()
    elapsed = time.perf_counter() - t0
    ok = (worst_kkt <= 10 * tol and worst_inv <= 1e-6 and w_err <= 1e-6 and t_err <= 1e-6
          and elapsed < 60)
    report("C3 glasso correctness", ok,
           f"fits={fits} unconverged={unconverged} kkt={worst_kkt:.2e} theta_w={worst_inv:.2e} "
           f"p2_err={max(w_err, t_err):.2e} time={elapsed:.1f}s")
    assert ok


def test_c4_gni_f1_correlation(report):
    thresholds = {50: 0.6, 200: 0.85, 400: 0.85}
    t0 = time.perf_counter()
    passed_seeds, lines = 0, []
    for seed in range(5):
        cfg = BenchConfig(master_seed=seed)
        corr = {}
        for p in thresholds:
            cell = simulate_cell(cfg, "random", p, 0)
            corr[p] = gni_f1_study(cell.data, cell.path, cell.truth).correlation
        ok_seed = all(corr[p] >= thresholds[p] for p in thresholds)
        passed_seeds += ok_seed
        lines.append(f"seed{seed}:" + "/".join(f"{corr[p]:.3f}" for p in thresholds))
    elapsed = time.perf_counter() - t0
    ok = passed_seeds >= 4 and elapsed < 15 * 60
    report("C4 GNI-F1 correlation", ok,
           f"seeds_passing={passed_seeds}/5 {' '.join(lines)} time={elapsed:.0f}s")
    assert ok


@pytest.fixture(scope="module")
def high_dim_run():
    t0 = time.perf_counter()
    res = run_benchmark(BenchConfig(ps=(200, 400), master_seed=0))
    return res, time.perf_counter() - t0


def _mean(records, kind, p, criterion, attr):
    vals = [getattr(r, attr) for r in records
            if r.kind == kind and r.p == p and r.criterion == criterion and r.status == "ok"]
    return float(np.mean(vals)) if vals else math.nan


def test_c5_near_oracle(report, high_dim_run):
    res, elapsed = high_dim_run
    gaps = {}
    for kind in ("random", "hub"):
        for p in (200, 400):
            gaps[(kind, p)] = (_mean(res.records, kind, p, "oracle", "f1")
                               - _mean(res.records, kind, p, "gni", "f1"))
    ok = all(g <= 0.05 for g in gaps.values()) and elapsed < 30 * 60
    detail = " ".join(f"{k}{p}:gap={g:.3f}" for (k, p), g in gaps.items())
    report("C5 near-oracle selection", ok, f"{detail} time={elapsed:.0f}s")
    assert ok


def test_c6_high_dimension_ordering(report, high_dim_run):
    res, _ = high_dim_run
    rec = res.records
    f1_gni, f1_stars = _mean(rec, "hub", 400, "gni", "f1"), _mean(rec, "hub", 400, "stars", "f1")
    shd_gni, shd_stars = _mean(rec, "hub", 400, "gni", "shd"), _mean(rec, "hub", 400, "stars", "shd")
    f1_ric = _mean(rec, "random", 400, "ric", "f1")
    ok = f1_gni > f1_stars and shd_gni < shd_stars and f1_ric < 0.05
    report("C6 ordering at p=400", ok,
           f"hub F1 gni={f1_gni:.3f} stars={f1_stars:.3f}; SHD gni={shd_gni:.1f} "
           f"stars={shd_stars:.1f}; random RIC F1={f1_ric:.4f}")
    assert ok


def test_c7_ebic_under_selection(report, high_dim_run):
    res, _ = high_dim_run
    gni_edges = {(r.kind, r.p, r.replicate): r.edges for r in res.records if r.criterion == "gni"}
    violations, worst = [], 0.0
    checked = 0
    for r in res.records:
        if r.criterion != "ebic" or r.status != "ok":
            continue
        checked += 1
        pairs = r.p * (r.p - 1) / 2
        worst = max(worst, r.edges / pairs)
        if r.edges > 0.01 * pairs or r.edges > gni_edges[(r.kind, r.p, r.replicate)]:
            violations.append(f"{r.kind}{r.p}r{r.replicate}g{r.gamma}:{r.edges}")
    ok = checked == 2 * 2 * 5 * 3 and not violations
    report("C7 EBIC under-selection", ok,
           f"records={checked} max_frac={worst:.4f} violations={violations or 'none'}")
    assert ok


def test_c8_scaling(report):
    def median_time(p):
        x = np.random.default_rng(p).normal(size=(50, p))
        xb = build_diff_matrix(x, m=2500, seed=1)
        g = gen_random_graph(p, 3 / p, seed=p)
        gni_score(xb, g)
        times = []
        for _ in range(20):
            t0 = time.perf_counter()
            gni_score(xb, g)
            times.append(time.perf_counter() - t0)
        return statistics.median(times)

    t50, t400 = median_time(50), median_time(400)
    ratio = t400 / t50
    ok = ratio <= 12
    report("C8 scaling", ok, f"t50={t50 * 1e3:.2f}ms t400={t400 * 1e3:.2f}ms ratio={ratio:.2f}")
    assert ok


def test_c9_monotonicity(report):
    est = [pair_discrepancy(r, 0.1, 100_000, seed=9) for r in (0.0, 0.3, 0.6, 0.9)]
    margins = [(a.mean - b.mean) / math.hypot(a.std_error, b.std_error) for a, b in zip(est, est[1:])]
    ok = all(z > 3 for z in margins)
    report("C9 monotonicity", ok,
           "means=" + "/".join(f"{e.mean:.4f}" for e in est)
           + " z=" + "/".join(f"{z:.1f}" for z in margins))
    assert ok


def test_c10_determinism(report, tmp_path):
    cfg = tmp_path / "bench.ini"
    cfg.write_text("[bench]\np = 50\nreplicates = 2\nseed = 3\n[stars]\nsubsamples = 8\n")
    outputs = []
    for i, jobs in enumerate(("1", "1", "3")):
        out = tmp_path / f"run{i}"
        assert main(["bench", "--config", str(cfg), "--out-dir", str(out), "--jobs", jobs]) == 0
        outputs.append((out / "runs.csv").read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2] and len(outputs[0]) > 0
    report("C10 determinism", ok, f"runs.csv bytes={len(outputs[0])} jobs=1,1,3")
    assert ok
