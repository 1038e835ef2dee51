"""Acceptance suite: every criterion printed as its own pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report lines as they complete.
"""

import time

import numpy as np
from oracles import (
    brute_force_accuracy,
    column_objective,
    column_quadratic,
    hand_nmi,
    sign_enumeration_minimum,
)
from scipy import stats

from spsc.cluster import clustering_accuracy, evaluate_repeated, nmi
from spsc.data import DataMatrix, normalize_columns_unit_l2, synth_blobs
from spsc.engine import SPSCConfig, fit_csc_init, fit_spsc
from spsc.hypergraph import Hypergraph, compute_weight_and_laplacian, knn_hypergraph_laplacian
from spsc.selfpace import (
    LossField,
    Variant,
    WeightState,
    hard_weight_update,
    soft_weight_update,
)
from spsc.solvers import (
    RegularizationConfig,
    b_step_lagrange_dual,
    b_step_projected_gradient,
    objective_value,
    project_columns_unit_ball,
    q_step,
    s_step_column,
    s_step_sweep,
)


def _report(num, name, ok, t0, limit):
    elapsed = time.perf_counter() - t0
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num}] {name}: {status} ({elapsed:.1f}s / limit {limit:.0f}s)")


def test_criterion_1_weight_closed_forms():
    t0 = time.perf_counter()
    ok = False
    try:
        rng = np.random.default_rng(100)
        grid = np.arange(0.0, 1.0 + 5e-5, 1e-4)
        for _ in range(1000):
            loss = float(rng.uniform(0.0, 5.0))
            lam = float(rng.uniform(0.01, 5.0))
            field = LossField(Variant.SAMPLE, np.array([loss]))
            v_soft = soft_weight_update(field, lam).weights[0]
            v_grid = grid[int(np.argmin(grid * loss + lam * (0.5 * grid * grid - grid)))]
            assert abs(v_soft - v_grid) <= 1e-4
            v_hard = hard_weight_update(field, lam).weights[0]
            v_enum = min((v * loss - lam * v, v) for v in (0.0, 1.0))[1]
            assert v_hard == v_enum
        assert time.perf_counter() - t0 < 5.0
        ok = True
    finally:
        _report(1, "weight closed forms match grid/enumeration oracles", ok, t0, 5)


def test_criterion_2_s_step_exactness():
    t0 = time.perf_counter()
    ok = False
    try:
        rng = np.random.default_rng(200)
        for trial in range(50):
            r = int(rng.integers(2, 7))
            m = int(rng.integers(r, r + 4))  # m >= r keeps the quadratic strictly convex
            n = int(rng.integers(5, 9))
            X = rng.standard_normal((m, n))
            B = project_columns_unit_ball(rng.standard_normal((m, r)))
            S = 0.5 * rng.standard_normal((r, n))
            H = knn_hypergraph_laplacian(rng.standard_normal((3, n)), 2)
            Q = rng.standard_normal((n, r))
            alpha = float(rng.uniform(0.0, 1.0)) if trial % 2 else 0.0
            gamma = float(rng.uniform(0.0, 1.0)) if trial % 3 else 0.0
            cfg = RegularizationConfig(alpha=alpha, beta=float(rng.uniform(0.05, 0.5)), gamma=gamma)
            w_col = rng.uniform(0.05, 1.0, size=m)
            V = WeightState(Variant.ELEMENT, np.broadcast_to(w_col[:, None], (m, n)).copy(), 1.0)
            i = int(rng.integers(n))
            s_cd = s_step_column(i, X, B, Q, H, V, cfg, S)
            A, b = column_quadratic(i, X, B, Q, H, w_col, cfg.alpha, cfg.gamma, S)
            _, s_or = sign_enumeration_minimum(A, b, cfg.beta)
            f_cd = column_objective(s_cd, i, X, B, Q, H, w_col, cfg.alpha, cfg.beta, cfg.gamma, S)
            f_or = column_objective(s_or, i, X, B, Q, H, w_col, cfg.alpha, cfg.beta, cfg.gamma, S)
            assert abs(f_cd - f_or) <= 1e-6
        assert time.perf_counter() - t0 < 30.0
        ok = True
    finally:
        _report(2, "coordinate descent matches sign-pattern enumeration", ok, t0, 30)


def test_criterion_3_b_step_cross_validation():
    t0 = time.perf_counter()
    ok = False
    try:
        rng = np.random.default_rng(300)
        for _ in range(20):
            m, r, n = (int(v) for v in rng.integers(2, 7, size=3))
            X = 3.0 * rng.standard_normal((m, n))
            S = rng.standard_normal((r, n))
            Bd = b_step_lagrange_dual(X, S)
            ones = WeightState(Variant.ELEMENT, np.ones((m, n)), 1.0)
            Bp = b_step_projected_gradient(X, S, ones, rng.standard_normal((m, r)))
            fd = float(np.sum((X - Bd @ S) ** 2))
            fp = float(np.sum((X - Bp @ S) ** 2))
            assert abs(fd - fp) <= 1e-6 * max(fd, fp)
            assert np.linalg.norm(Bd, axis=0).max() <= 1.0 + 1e-10
            assert np.linalg.norm(Bp, axis=0).max() <= 1.0 + 1e-10
        assert time.perf_counter() - t0 < 30.0
        ok = True
    finally:
        _report(3, "Lagrange dual and projected gradient B-steps agree", ok, t0, 30)


def test_criterion_4_monotone_descent():
    t0 = time.perf_counter()
    ok = False
    try:
        X, _ = synth_blobs(20, 3, 30, 9, 0.2, seed=4)
        Xn = normalize_columns_unit_l2(X)
        H = knn_hypergraph_laplacian(Xn, 3)
        cfg = SPSCConfig(
            variant=Variant.ELEMENT,
            reg=RegularizationConfig(alpha=0.5, beta=0.05, gamma=0.5),
            r=10,
            seed=0,
            max_outer_iters=40,
        )
        res = fit_spsc(Xn, H, cfg)
        assert res.iterations >= 1
        for row in res.trace.rows:
            assert row.obj_after_v <= row.obj_start + 1e-9
            assert row.obj_after_b <= row.obj_after_v + 1e-9
            assert row.obj_after_s <= row.obj_after_b + 1e-9
        assert time.perf_counter() - t0 < 60.0
        ok = True
    finally:
        _report(4, "objective non-increasing across V/B/S sub-steps", ok, t0, 60)


def test_criterion_5_reduction_to_sc():
    t0 = time.perf_counter()
    ok = False
    try:
        X, _ = synth_blobs(20, 3, 30, 9, 0.0, seed=2)
        Xn = normalize_columns_unit_l2(X)
        H = knn_hypergraph_laplacian(Xn, 3)
        reg = RegularizationConfig(alpha=0.5, beta=0.05, gamma=0.5)
        cfg = SPSCConfig(
            variant=Variant.SAMPLE,
            reg=reg,
            r=10,
            seed=3,
            select_fraction0=1.0,
            lambda0_scale=1e10,
            max_outer_iters=40,
        )
        res = fit_spsc(Xn, H, cfg)
        assert res.V_final.weights.min() >= 1.0 - 1e-9
        final_sc = res.trace.rows[-1].sc_objective

        # all-selected continuation: the same number of plain alternation steps
        B, S, Q = fit_csc_init(Xn, H, cfg)
        for _ in range(res.iterations):
            cand = b_step_lagrange_dual(Xn.values, S)
            if objective_value(Xn, cand, S, Q, H, None, reg) <= objective_value(
                Xn, B, S, Q, H, None, reg
            ):
                B = cand
            S = s_step_sweep(Xn, B, Q, H, None, reg, S)
            Q = q_step(H.incidence, S)
        baseline = objective_value(Xn, B, S, Q, H, None, reg)
        assert abs(final_sc - baseline) <= 1e-6 * abs(baseline)
        assert time.perf_counter() - t0 < 60.0
        ok = True
    finally:
        _report(5, "all-selected run matches plain sparse coding", ok, t0, 60)


def test_criterion_6_weight_trace_qualitative():
    t0 = time.perf_counter()
    ok = False
    try:
        # twin draws share every clean column, isolating the injected noise
        noisy, idx = synth_blobs(20, 3, 30, 9, 0.2, seed=11)
        clean, _ = synth_blobs(20, 3, 30, 9, 0.0, seed=11)
        magnitude = np.mean(np.abs(noisy.values - clean.values), axis=0)
        assert np.array_equal(np.flatnonzero(magnitude > 0), idx)

        Xn = normalize_columns_unit_l2(noisy)
        H = knn_hypergraph_laplacian(Xn, 3)
        cfg = SPSCConfig(
            variant=Variant.SAMPLE,
            reg=RegularizationConfig(alpha=0.5, beta=0.05, gamma=0.5),
            r=10,
            seed=0,
            max_outer_iters=100,
        )
        res = fit_spsc(Xn, H, cfg)
        first = float(stats.spearmanr(magnitude, res.trace.rows[0].weights)[0])
        assert first < -0.2
        means = [row.mean_weight for row in res.trace.rows]
        assert all(b >= a - 1e-12 for a, b in zip(means, means[1:]))
        assert means[-1] >= 0.95
        assert time.perf_counter() - t0 < 120.0
        ok = True
    finally:
        _report(6, "noise-weight anticorrelation early, saturation late", ok, t0, 120)


def test_criterion_7_robustness_direction():
    t0 = time.perf_counter()
    ok = False
    try:
        wins = 0
        for s in range(10):
            X, _ = synth_blobs(20, 3, 24, 6, 0.0, seed=s)
            rng = np.random.default_rng(1000 + s)
            values = X.values.copy()
            mask = rng.random(values.shape) < 0.3  # gross errors on 30% of entries
            values[mask] += rng.normal(0.0, 4.0 * np.sqrt(np.mean(values**2)), size=mask.sum())
            Xn = normalize_columns_unit_l2(DataMatrix(values, X.labels))
            H = knn_hypergraph_laplacian(Xn, 3)
            reg = RegularizationConfig(alpha=0.0, beta=0.05, gamma=0.0)
            _, S_sc, _ = fit_csc_init(Xn, None, SPSCConfig(variant=Variant.ELEMENT, reg=reg, r=6, seed=s))
            res = fit_spsc(
                Xn, H, SPSCConfig(variant=Variant.ELEMENT, reg=reg, r=6, seed=s, max_outer_iters=60)
            )
            acc_sc = evaluate_repeated(S_sc, 3, X.labels, 20, seed=s).acc
            acc_spsc = evaluate_repeated(res.S, 3, X.labels, 20, seed=s).acc
            wins += acc_spsc >= acc_sc
        assert wins >= 8
        ok = True
    finally:
        _report(7, f"element-wise selection beats plain SC ({wins}/10 seeds)", ok, t0, 300)


def test_criterion_8_evaluation_metrics():
    t0 = time.perf_counter()
    ok = False
    try:
        import itertools

        # exhaustive small cases
        for n in (1, 2, 3, 4):
            for pred in itertools.product(range(3), repeat=n):
                for truth in itertools.product(range(3), repeat=n):
                    assert clustering_accuracy(pred, truth) == brute_force_accuracy(pred, truth)
                    assert abs(nmi(pred, truth) - hand_nmi(pred, truth)) <= 1e-12
        # random longer vectors up to the stated bounds
        rng = np.random.default_rng(800)
        for _ in range(500):
            n = int(rng.integers(2, 9))
            pred = rng.integers(0, 4, size=n)
            truth = rng.integers(0, 4, size=n)
            assert clustering_accuracy(pred, truth) == brute_force_accuracy(pred, truth)
            assert abs(nmi(pred, truth) - hand_nmi(pred, truth)) <= 1e-12
        assert time.perf_counter() - t0 < 10.0
        ok = True
    finally:
        _report(8, "ACC/NMI match exhaustive small-case oracles", ok, t0, 10)


def test_criterion_9_hypergraph_laplacian():
    t0 = time.perf_counter()
    ok = False
    try:
        H = compute_weight_and_laplacian(Hypergraph(np.array([[1.0, 1.0]]), np.array([1.0])))
        assert np.array_equal(H.W, [[0.5, 0.5], [0.5, 0.5]])
        assert np.array_equal(H.L, [[0.5, -0.5], [-0.5, 0.5]])
        rng = np.random.default_rng(900)
        for _ in range(20):
            n = int(rng.integers(6, 20))
            X = rng.standard_normal((int(rng.integers(2, 8)), n))
            G = knn_hypergraph_laplacian(X, int(rng.integers(1, min(5, n - 1) + 1)))
            assert np.abs(G.W - G.W.T).max() <= 1e-10
            assert np.linalg.eigvalsh(G.L).min() >= -1e-8
        ok = True
    finally:
        _report(9, "hypergraph weight/Laplacian worked example and PSD", ok, t0, 30)
