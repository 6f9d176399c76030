"""One test per acceptance criterion, each at its stated tolerance."""

import itertools
import math
import os
import time

import numpy as np

from conftest import acceptance_report, complete, random_graph
from oracles import fairness_monte_carlo, lp_grid, mip_enumerate, qp_projected_gradient
from p2pshare.analytics import SweepConfig, fairness_exact, format_csv, run_sweep
from p2pshare.lossmodel import (ClaimSample, LossModel, Point, ShiftedGamma, Uniform,
                                loss_moments, sample_claims)
from p2pshare.netgen import Graph
from p2pshare.optimize import (LpProblem, solve_engagement_lp, solve_min_variance_qp,
                               solve_sparse_mip, solve_two_stage)
from p2pshare.ordering import (DiscreteDist, classify_matrix, clique_share_matrix,
                               convex_order_compare, share_marginals, trace_variance)
from p2pshare.sharing import (settle_personalized, settle_shares, settle_two_layer,
                              settle_uniform, settle_uniform_with_self, uniform_kernel)

BASE_SEV = ShiftedGamma(100.0, 1000.0, 2000.0)
WORKERS = os.cpu_count() or 1


def _toy():
    return Graph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)])


def _cycle():
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


def test_criterion_01_toy_settlements():
    t0 = time.perf_counter()
    a = settle_uniform(_cycle(), ClaimSample.from_severities([0, 200, 0, 60], 100), 100, 50).xi
    b = settle_uniform(_toy(), ClaimSample.from_severities([0, 200, 0, 60], 100), 100, 50).xi
    c = settle_uniform_with_self(_toy(), ClaimSample.from_severities([60, 200, 0, 0], 100),
                                 100, 0.0, dbar=2).xi
    dt = time.perf_counter() - t0
    ok = (a.tolist() == [80, 0, 80, 0] and b.tolist() == [100, 0, 50, 10]
          and c.tolist() == [50, 20, 70, 20] and dt < 1.0)
    assert acceptance_report(1, "toy settlement", ok,
                             f"{a.tolist()} {b.tolist()} {c.tolist()} in {dt:.3f}s")


def test_criterion_02_four_node_moments():
    g = _cycle()
    p = 0.1
    mean = np.zeros(4)
    m2 = np.zeros(4)
    for Z in itertools.product([0, 1], repeat=4):
        w = np.prod([p if z else 1 - p for z in Z])
        xi = settle_uniform(g, ClaimSample.from_severities(np.array(Z) * 100.0, 100), 100, 50).xi
        mean += w * xi
        m2 += w * xi**2
    sd = np.sqrt(m2 - mean**2)
    ok1 = np.all(np.abs(mean - 10.0) <= 0.01) and np.all(np.abs(sd - 21.21) <= 0.01)
    # uniform severity: Gauss-Legendre on the continuous part of X plus the atom at s,
    # pushed through the settlement kernel for every joint state of the four nodes
    xq, wq = np.polynomial.legendre.leggauss(12)
    vals = np.concatenate([[0.0], 50.0 * (xq + 1), [100.0]])
    probs = np.concatenate([[1 - p], p * 0.5 * wq / 2, [p * 0.5]])
    idx = np.array(list(itertools.product(range(len(vals)), repeat=4)))
    W = np.prod(probs[idx], axis=1)
    xi = uniform_kernel(g, vals[idx], 50).xi
    um = W @ xi
    usd = np.sqrt(W @ xi**2 - um**2)
    ok2 = np.all(np.abs(um - 7.5) <= 0.05) and np.all(np.abs(usd - 17.47) <= 0.05)
    assert acceptance_report(2, "four-node moments", ok1 and ok2,
                             f"point mean {mean.round(4).tolist()} sd {sd.round(4).tolist()}; "
                             f"uniform mean {um.round(3).tolist()} sd {usd.round(3).tolist()}")


def test_criterion_03_loss_model():
    t0 = time.perf_counter()
    um, usd = loss_moments(LossModel(0.1, Uniform(0, 200), 100))
    pm, psd = loss_moments(LossModel(0.1, Point(100), 100))
    model = LossModel(0.1, BASE_SEV, 1000)
    gm, gsd = loss_moments(model)
    X = sample_claims(model, 10**6, np.random.default_rng(11)).X
    se = gsd / 1000.0
    mc_ok = abs(X.mean() - gm) <= 4 * se
    dt = time.perf_counter() - t0
    checks = {
        "uniform": um == 7.5 and abs(usd - 24.71) <= 0.01,
        "point": abs(pm - 10) < 1e-12 and abs(psd - 30) < 1e-12,
        "gamma mean in [44.5, 46]": 44.5 <= gm <= 46.0,
        "gamma sd in [168, 178]": 168 <= gsd <= 178,
        "monte carlo within 4 SE": mc_ok,
        "runtime": dt < 10,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"uniform ({um}, {usd:.4f}) point ({pm}, {psd}) gamma ({gm:.4f}, {gsd:.4f}) "
              f"MC mean {X.mean():.4f} in {dt:.2f}s"
              + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert acceptance_report(3, "loss model", not failed, detail)


def _sweep_cfg(**kw):
    base = dict(n=5000, dbar=20.0, seeds=1, master_seed=20240101, p=0.1, severity=BASE_SEV,
                s=1000.0, gamma="s/dbar", reps=None, max_reps=100, batch=10)
    base.update(kw)
    return SweepConfig(**base)


def test_criterion_04_regular_mesh():
    t0 = time.perf_counter()
    rows = run_sweep(_sweep_cfg(sigmas=(0.0,), mechanisms=("none", "uniform")), WORKERS)
    dt = time.perf_counter() - t0
    r = {row.mechanism: row for row in rows}
    u, n = r["uniform"].stdev_ratio, r["none"].stdev_ratio
    ok = 0.035 <= u <= 0.043 and 0.165 <= n <= 0.182 and dt < 60
    ok &= max(row.reps for row in rows) <= 100
    assert acceptance_report(4, "regular mesh", ok,
                             f"uniform {u:.4f} none {n:.4f} reps {r['uniform'].reps} in {dt:.1f}s")


def test_criterion_05_heterogeneity_crossover():
    t0 = time.perf_counter()
    sigmas = (0.0, 20.0, 40.0, 80.0)
    rows = run_sweep(_sweep_cfg(sigmas=sigmas, mechanisms=("none", "uniform", "lp")), WORKERS)
    dt = time.perf_counter() - t0
    tab = {(row.sigma, row.mechanism): row.stdev_ratio for row in rows}
    cross = tab[(80.0, "uniform")] > tab[(80.0, "none")]
    lp_ok = all(tab[(sg, "lp")] <= tab[(sg, "none")] + 0.005 for sg in sigmas)
    ok = cross and lp_ok and dt < 300
    detail = "; ".join(f"σ={sg:g}: none {tab[(sg, 'none')]:.4f} uniform {tab[(sg, 'uniform')]:.4f} "
                       f"lp {tab[(sg, 'lp')]:.4f}" for sg in sigmas)
    assert acceptance_report(5, "heterogeneity crossover", ok, f"{detail} in {dt:.1f}s")


def _small_graph(rng, max_edges, n_max):
    n = int(rng.integers(2, n_max + 1))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    k = int(rng.integers(1, min(max_edges, len(pairs)) + 1))
    pick = rng.choice(len(pairs), k, replace=False)
    return Graph.from_edges(n, [pairs[i] for i in pick])


def test_criterion_06_lp_optimality():
    t0 = time.perf_counter()
    toy = solve_engagement_lp(LpProblem(_toy(), 50, 100)).info["objective"]
    rng = np.random.default_rng(606)
    worst = 0.0
    settings = [(100, 50), (100, 30), (4, 1)]
    for k in range(50):
        g = _small_graph(rng, 6, 6)
        s, gamma = settings[k % 3]
        got = solve_engagement_lp(LpProblem(g, gamma, s)).total
        worst = max(worst, abs(got - lp_grid(g.n, g.edges, gamma, s)))
    dt = time.perf_counter() - t0
    ok = abs(toy - 150) < 1e-9 and worst <= 1e-6 and dt < 10
    assert acceptance_report(6, "LP optimality", ok,
                             f"toy {toy!r}; max |LP - grid| {worst:.2e} over 50 graphs in {dt:.2f}s")


def test_criterion_07_mip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    worst_full, worst_enum, checked = 0.0, 0.0, 0
    for _ in range(30):
        g = _small_graph(rng, 8, 7)
        s, gamma = 100.0, float(rng.choice([30.0, 50.0, 70.0]))
        p = LpProblem(g, gamma, s)
        lp = solve_engagement_lp(p).total
        worst_full = max(worst_full, abs(solve_sparse_mip(p, g.m + 1).total - lp))
        for m in range(1, g.m + 1):
            eng = solve_sparse_mip(p, m)
            ref = mip_enumerate(g.n, g.edges, gamma, s, m)
            ok_support = (eng.gamma > 1e-12).sum() <= m and eng.info["exact"]
            worst_enum = max(worst_enum, abs(eng.total - ref) + (0 if ok_support else 1))
            checked += 1
    dt = time.perf_counter() - t0
    ok = worst_full <= 1e-7 and worst_enum <= 1e-6 and dt < 30
    assert acceptance_report(7, "MIP", ok, f"m>=|E| gap {worst_full:.1e}; enumeration gap "
                                           f"{worst_enum:.1e} over {checked} cases in {dt:.2f}s")


def test_criterion_08_qp():
    k4 = solve_min_variance_qp(complete(4), 100, 40).objective
    cyc = solve_min_variance_qp(_cycle(), 100, 40).objective
    rng = np.random.default_rng(808)
    bound_ok = True
    for _ in range(100):
        g = random_graph(rng, int(rng.integers(2, 20)), float(rng.uniform(0.05, 0.8)))
        bound_ok &= solve_min_variance_qp(g, 100, float(rng.uniform(0, 100))).objective <= g.n + 1e-9
    worst = 0.0
    for _ in range(20):
        g = random_graph(rng, int(rng.integers(3, 8)), 0.5)
        gamma = float(rng.uniform(5, 60))
        ref, _, _ = qp_projected_gradient(g.n, g.edges, 100, gamma)
        worst = max(worst, abs(solve_min_variance_qp(g, 100, gamma).objective - ref))
    ok = abs(k4 - 1) <= 1e-6 and abs(cyc - 4 / 3) <= 1e-6 and bound_ok and worst <= 1e-5
    assert acceptance_report(8, "QP", ok, f"K4 {k4:.9f} cycle {cyc:.9f} bound {bound_ok} "
                                          f"max |QP - PG| {worst:.2e}")


def test_criterion_09_fairness():
    r = fairness_exact(20, 0.1)
    draws = 10**6
    mc = fairness_monte_carlo(20, 0.1, draws, np.random.default_rng(909))
    within = all(abs(mc[k] - getattr(r, k)) <= 4 * math.sqrt(getattr(r, k) * (1 - getattr(r, k)) / draws)
                 for k in ("p_zero", "p_strict", "p_weak"))
    ok = (abs(r.p_zero - 0.1216) <= 1e-4 and abs(r.p_strict - 0.59) <= 0.005
          and abs(r.p_weak - 0.78) <= 0.005 and within)
    assert acceptance_report(9, "fairness", ok,
                             f"p_zero {r.p_zero:.5f} p_strict {r.p_strict:.5f} p_weak {r.p_weak:.5f}; "
                             f"MC {mc['p_zero']:.5f}/{mc['p_strict']:.5f}/{mc['p_weak']:.5f}")


def test_criterion_10_order_toolkit():
    t0 = time.perf_counter()
    ds_ok = all(classify_matrix(clique_share_matrix(sz)) == "doubly_stochastic"
                for sz in ([2, 2], [1, 3], [4], [1, 1, 2]))
    d = DiscreteDist.from_atoms({0: 0.6, 1: 0.3, 5: 0.1})
    dom_ok = all(convex_order_compare(m, d) in ("X_below", "equal")
                 for sz in ([2, 2], [1, 3], [4]) for m in share_marginals(clique_share_matrix(sz), [d] * 4))
    unit = DiscreteDist.from_atoms({-1: 0.5, 1: 0.5})
    D = np.array([[1, 0, 0], [0, .5, .5], [0, .5, .5]])
    var = float(np.mean([m.var for m in share_marginals(D, [unit] * 3)]))
    ex_ok = var == 2 / 3

    def M(x, y):
        return np.array([[1 - x, y], [x, 1 - y]])

    def S(r):
        return np.array([[1.0, r], [r, 1.0]])

    grid = np.linspace(0, 1, 21)
    found = all(any(trace_variance(M(x, y), S(r)) > 2 + 1e-12 for x in grid for y in grid)
                for r in (0.2, 0.5, 0.9))
    never = not any(trace_variance(M(x, x), S(r)) > 2 + 1e-12
                    for x in grid for r in np.linspace(-1, 1, 21))
    dt = time.perf_counter() - t0
    ok = ds_ok and dom_ok and ex_ok and found and never and dt < 10
    assert acceptance_report(10, "order toolkit", ok,
                             f"doubly stochastic {ds_ok}; dominance {dom_ok}; variance {var!r}; "
                             f"exceedance found {found}, never for doubly stochastic {never}; {dt:.2f}s")


def test_criterion_11_global_properties():
    rng = np.random.default_rng(1111)
    count, worst, enrich = 0, 0.0, 0.0
    while count < 1200:
        g = random_graph(rng, int(rng.integers(4, 12)), float(rng.uniform(0.25, 0.9)))
        if g.degrees.min() == 0:
            continue
        s = float(rng.uniform(10, 500))
        gamma, z = float(rng.uniform(0, s)), float(rng.uniform(0, s))
        X = np.minimum(s, rng.exponential(s, g.n) * (rng.random(g.n) < 0.4))
        c = ClaimSample.from_severities(X, s)
        eng = solve_engagement_lp(LpProblem(g, gamma, s))
        e1, fof, e2 = solve_two_stage(g, s, gamma, gamma / 2, z)
        q = solve_min_variance_qp(g, s, gamma)
        results = [settle_uniform(g, c, s, gamma), settle_uniform_with_self(g, c, s, z),
                   settle_personalized(g, eng, c, s), settle_two_layer(g, e1, fof, e2, c, s, z),
                   settle_shares(g, q.self_share, q.edge_share, c.X)]
        for r in results:
            tot = c.X.sum()
            worst = max(worst, abs(r.xi.sum() - tot) / max(1.0, tot))
            rec = r.layers["from_friends_received"] + r.layers["from_fof_received"]
            enrich = max(enrich, float(np.max(rec - c.X)))
            count += 1
    cfg = SweepConfig(n=400, dbar=10.0, sigmas=(0.0, 5.0, 10.0), seeds=2, master_seed=5, p=0.1,
                      severity=BASE_SEV, s=1000.0, mechanisms=("none", "uniform", "lp", "qp",
                                                                "fof(50,20)"), reps=8, batch=4)
    csvs = {format_csv(run_sweep(cfg, w), cfg).encode() for w in (1, 2, 4)}
    ok = worst <= 1e-9 and enrich <= 1e-9 and len(csvs) == 1
    assert acceptance_report(11, "global properties", ok,
                             f"{count} settlements, max relative conservation gap {worst:.1e}, "
                             f"max enrichment {enrich:.1e}; CSV identical across 1/2/4 workers "
                             f"{len(csvs) == 1}")
