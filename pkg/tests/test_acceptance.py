"""Acceptance suite: one test per numbered criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts at the criterion's own tolerance.  Criteria 5 and 6 share one Case 1
sweep and are marked slow; criterion 11 needs a user-supplied dataset, given
through AHGR_EDGES, AHGR_LABELS and optionally AHGR_ATTRS and AHGR_PROFILE.
"""

import itertools
import math
import os
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from ahgr import basic, evaluation, fusion
from ahgr.cli import main
from ahgr.graph import load_embedding, load_labels
from ahgr.reweighting import mnorm, modularity_view, znorm
from ahgr.synthetic import SweepConfig, run_case_sweep


# 1 -----------------------------------------------------------------------

def test_c01_consistency_bounds(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    lo_ok = hi_ok = True
    for K in (2, 4, 8, 16):
        for _ in range(1000):
            U = rng.random((K, K)) ** rng.uniform(0.2, 8)
            s = fusion.column_sq_norms(U)
            lo_ok &= bool(s.min() >= 1 / K - 1e-12)
            hi_ok &= bool(s.max() <= 1 + 1e-12)
    exact = all(fusion.consistency_indicator(np.eye(K)) == 1.0
                and fusion.consistency_indicator(np.ones((K, K))) == 0.0 for K in (2, 4, 8, 16))
    elapsed = time.perf_counter() - start
    ok = lo_ok and hi_ok and exact and elapsed < 5
    criterion(1, ok, f"bounds={lo_ok and hi_ok} extremes exact={exact} time={elapsed:.2f}s")
    assert ok


# 2 -----------------------------------------------------------------------

def _fd(f, Z, h=1e-6):
    G = np.zeros_like(Z)
    for idx in np.ndindex(*Z.shape):
        E = np.zeros_like(Z)
        E[idx] = h
        G[idx] = (f(Z + E) - f(Z - E)) / (2 * h)
    return G


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def test_c02_gradient_checks(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    N, K, L = 15, 3, 2
    for _ in range(20):
        Y = rng.random((N, K))
        U = [rng.random((K, K)) for _ in range(L)]
        X = [rng.random((N, K)) for _ in range(L)]
        dy, d = rng.uniform(0, 2), rng.uniform(0, 2)
        worst = max(worst, _rel(fusion.y_gradient(Y, U, X, dy),
                                _fd(lambda Z: fusion.y_objective(Z, U, X, dy), Y)))
        worst = max(worst, _rel(fusion.u_gradient(Y, U[0], X[0], d),
                                _fd(lambda Z: fusion.u_objective(Y, Z, X[0], d), U[0])))
        B = rng.random((N, N))
        M, W, lam = B + B.T, rng.random((N, K)), rng.uniform(0, 2)
        worst = max(worst, _rel(basic.snmf_gradient(M, W, lam),
                                _fd(lambda Z: basic.snmf_objective(M, Z, lam), W)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 30
    criterion(2, ok, f"max relative error={worst:.2e} time={elapsed:.2f}s")
    assert ok


# 3 -----------------------------------------------------------------------

def test_c03_fusion_descent(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    monotone = best = True
    worst_rise = 0.0
    for i in range(50):
        X = [rng.random((30, 4)) for _ in range(3)]
        res = fusion.fit(X, fusion.FusionConfig(4, [1.0, 1.0, 1.0], 1.0, seed=i))
        t = np.array(res.objective_trace)
        rise = np.max((t[1:] - t[:-1]) / t[:-1])
        worst_rise = max(worst_rise, rise)
        monotone &= bool(rise <= 1e-9)
        best &= res.objective == min(res.restart_objectives)
    elapsed = time.perf_counter() - start
    ok = monotone and best and elapsed < 60
    criterion(3, ok, f"largest relative rise={worst_rise:.1e} min-over-restarts={best} time={elapsed:.1f}s")
    assert ok


# 4 -----------------------------------------------------------------------

def test_c04_snmf_recovery(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    residuals = []
    for _ in range(10):
        Xs = rng.random((40, 3))
        M = Xs @ Xs.T
        emb = basic.snmf_embed(M, basic.SnmfConfig(3, lam=0.0))
        residuals.append(np.linalg.norm(M - emb.X @ emb.X.T) / np.linalg.norm(M))
    elapsed = time.perf_counter() - start
    worst = max(residuals)
    ok = worst < 5e-2 and elapsed < 30
    criterion(4, ok, f"max relative residual={worst:.4f} over 10 draws time={elapsed:.1f}s")
    assert ok


# 5, 6 --------------------------------------------------------------------

GAMMAS = [round(0.1 * i, 1) for i in range(11)]


@pytest.fixture(scope="module")
def case1_sweep():
    start = time.perf_counter()
    rows = run_case_sweep(1, GAMMAS, 20, SweepConfig(K=8, delta_t=1, delta_a=1, delta_y=1))
    table = {(v, s): m for v, s, m, _ in rows}
    return table, time.perf_counter() - start


@pytest.mark.slow
def test_c05_case1_ordering(criterion, case1_sweep):
    t, elapsed = case1_sweep
    g0 = {s: t[(0.0, s)] for s in ("NMF-T", "NMF-A", "AHGR")}
    g1 = {s: t[(1.0, s)] for s in ("NMF-T", "NMF-A", "AHGR")}
    checks = {
        "g0 vs NMF-T": g0["AHGR"] >= g0["NMF-T"] - 0.02,
        "g0 vs NMF-A": g0["AHGR"] >= g0["NMF-A"] - 0.02,
        "g1 vs NMF-A": g1["AHGR"] >= g1["NMF-A"] + 0.15,
        "g1 vs NMF-T": g1["AHGR"] >= g1["NMF-T"] - 0.10,
        "runtime": elapsed < 15 * 60,
    }
    ok = all(checks.values())
    detail = (f"gamma=0 T/A/AHGR={g0['NMF-T']:.3f}/{g0['NMF-A']:.3f}/{g0['AHGR']:.3f} "
              f"gamma=1 T/A/AHGR={g1['NMF-T']:.3f}/{g1['NMF-A']:.3f}/{g1['AHGR']:.3f} "
              f"failed={[k for k, v in checks.items() if not v]} time={elapsed:.0f}s")
    criterion(5, ok, detail)
    assert ok


@pytest.mark.slow
def test_c06_rho_a_trend(criterion, case1_sweep):
    t, _ = case1_sweep
    rho = [t[(g, "rho_A")] for g in GAMMAS]
    corr = spearmanr(GAMMAS, rho).statistic
    ok = corr <= -0.8 and rho[-1] < rho[0]
    criterion(6, ok, f"spearman={corr:.3f} rho_A(0)={rho[0]:.3f} rho_A(1)={rho[-1]:.3f}")
    assert ok


# 7 -----------------------------------------------------------------------

def test_c07_modularity_rows(criterion):
    rng = np.random.default_rng(4)
    worst, done = 0.0, 0
    while done < 100:
        n = int(rng.integers(2, 201))
        A = np.triu(rng.random((n, n)) < rng.uniform(0.01, 0.5), 1)
        A = (A | A.T).astype(float)
        if A.sum() == 0:
            continue
        worst = max(worst, np.abs(modularity_view(A).sum(axis=1)).max())
        done += 1
    ok = worst <= 1e-10
    criterion(7, ok, f"max |row sum|={worst:.1e}")
    assert ok


# 8 -----------------------------------------------------------------------

def test_c08_normalisation_identity(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 60))
        M = rng.normal(rng.uniform(-5, 5), rng.uniform(1e-3, 1e3), size=(n, n))
        worst = max(worst, np.abs(mnorm(znorm(M)) - mnorm(M)).max())
    ok = worst <= 1e-12
    criterion(8, ok, f"max deviation={worst:.1e}")
    assert ok


# 9 -----------------------------------------------------------------------

def _brute_nmi(a, b):
    n = len(a)
    pa = {x: a.count(x) / n for x in set(a)}
    pb = {y: b.count(y) / n for y in set(b)}
    ha = -sum(p * math.log(p) for p in pa.values())
    hb = -sum(p * math.log(p) for p in pb.values())
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    joint = {}
    for u, v in zip(a, b):
        joint[u, v] = joint.get((u, v), 0) + 1 / n
    mi = sum(p * math.log(p / (pa[u] * pb[v])) for (u, v), p in joint.items())
    return 2 * mi / (ha + hb)


def _brute_ac(pred, truth):
    ps, ts = sorted(set(pred)), sorted(set(truth))
    size = max(len(ps), len(ts))
    best = 0
    for perm in itertools.permutations(range(size), len(ps)):
        m = {p: ts[j] for p, j in zip(ps, perm) if j < len(ts)}
        best = max(best, sum(1 for p, t in zip(pred, truth) if m.get(p) == t))
    return best / len(pred)


def _brute_f1(pred, truth):
    scores = []
    for c in sorted(set(truth)):
        tp = sum(p == c and t == c for p, t in zip(pred, truth))
        fp = sum(p == c and t != c for p, t in zip(pred, truth))
        fn = sum(p != c and t == c for p, t in zip(pred, truth))
        scores.append(2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0)
    return sum(scores) / len(scores)


def test_c09_metric_oracles(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 20))
        a = rng.integers(0, int(rng.integers(1, 7)), n).tolist()
        b = rng.integers(0, int(rng.integers(1, 7)), n).tolist()
        worst = max(worst,
                    abs(evaluation.nmi(a, b) - _brute_nmi(a, b)),
                    abs(evaluation.clustering_accuracy(a, b) - _brute_ac(a, b)),
                    abs(evaluation.macro_f1(a, b) - _brute_f1(a, b)))
    perms = np.array(list(itertools.permutations(range(8))))
    hung = 0.0
    for _ in range(50):
        C = rng.random((8, 8))
        r, c = evaluation.best_assignment(C)
        hung = max(hung, abs(C[r, c].sum() - C[np.arange(8), perms].sum(axis=1).min()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and hung <= 1e-12 and elapsed < 60
    criterion(9, ok, f"metric deviation={worst:.1e} assignment deviation={hung:.1e} time={elapsed:.1f}s")
    assert ok


# 10 ----------------------------------------------------------------------

def _per_iter(N, L, K=32, iters=20, reps=5):
    rng = np.random.default_rng(7)
    X = [rng.random((N, K)) for _ in range(L)]
    cfg = fusion.FusionConfig(K, [1.0] * L, 1.0, tol=0.0, max_iter=iters, restarts=1)
    Y0, U0 = fusion.random_init(N, K, L, rng)
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        fusion.run_single(Y0, U0, X, cfg)
        times.append((time.perf_counter() - t) / iters)
    return float(np.median(times))


def test_c10_complexity_scaling(criterion):
    l1, l2, l4 = (_per_iter(500, L) for L in (1, 2, 4))
    n1, n2 = _per_iter(500, 2), _per_iter(1000, 2)
    ratios = {"L1->2": l2 / l1, "L2->4": l4 / l2, "N500->1000": n2 / n1}
    ok = all(r <= 2 * 1.3 for r in ratios.values())
    criterion(10, ok, " ".join(f"{k}={v:.2f}" for k, v in ratios.items()) + " (limit 2.60)")
    assert ok


# 11 ----------------------------------------------------------------------

@pytest.mark.skipif(not (os.environ.get("AHGR_EDGES") and os.environ.get("AHGR_LABELS")),
                    reason="set AHGR_EDGES and AHGR_LABELS (and optionally AHGR_ATTRS, AHGR_PROFILE)")
def test_c11_real_graph(criterion, tmp_path):
    args = ["pipeline", "--edges", os.environ["AHGR_EDGES"], "--labels", os.environ["AHGR_LABELS"],
            "--community", "--out", str(tmp_path)]
    if os.environ.get("AHGR_ATTRS"):
        args += ["--attrs", os.environ["AHGR_ATTRS"], "--attributes"]
    if os.environ.get("AHGR_PROFILE"):
        args += ["--profile", os.environ["AHGR_PROFILE"]]
    assert main(args) == 0
    Y = load_embedding(tmp_path / "Y.emb")
    labels = load_labels(os.environ["AHGR_LABELS"], Y.shape[0])
    fused = evaluation.evaluate_clustering(Y, labels).nmi_mean
    single = {p.stem: evaluation.evaluate_clustering(load_embedding(p), labels).nmi_mean
              for p in sorted(tmp_path.glob("basic_*.emb"))}
    best = max(single.values())
    ok = fused >= best - 0.02
    criterion(11, ok, f"fused NMI={fused:.3f} best single={best:.3f} ({max(single, key=single.get)})")
    assert ok
