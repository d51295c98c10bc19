"""Acceptance criteria, each run at its stated size and tolerance.

Every test prints one ``[criterion N] PASS|FAIL ...`` line, also under capture.
"""
import time

import pytest

from winpauc.simulation import ExperimentConfig, is_unimodal_dominant, simulate_correlation
from winpauc.tawin import TAWinConfig
from winpauc.trainer import SyntheticTask, TrainConfig, evaluate, metric_value, train
from winpauc.verify import run_claim

SEED = 0


@pytest.fixture
def report(capsys):
    def emit(n, title, passed, detail, elapsed):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if passed else 'FAIL'} {title}: {detail} ({elapsed:.1f}s)")
    return emit


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def claim_criterion(report, n, title, claim, limit=None):
    res, elapsed = timed(run_claim, claim, SEED)
    within = limit is None or elapsed < limit
    detail = f"checked={res.checked} failures={res.failures} max_dev={res.max_deviation:.2e}; {res.detail}"
    if limit is not None:
        detail += f"; time limit {limit}s"
    report(n, title, res.passed and within, detail, elapsed)
    assert res.passed, res.line()
    assert within, f"took {elapsed:.1f}s, limit {limit}s"


def test_c01_wpauc_oracle(report):
    claim_criterion(report, 1, "windowed AUC equals pair counting (1,000 instances)", "wpauc", limit=5)


def test_c02_single_positive_identity(report):
    claim_criterion(report, 2, "single-positive window equals Recall@K (10,000 rankings)", "single-positive")


def test_c03_recall_bound(report):
    claim_criterion(report, 3, "Recall@K inside the window bound (10,000 rankings)", "recall-bound")


def test_c04_pairwise_form(report):
    claim_criterion(report, 4, "surrogate expectation equals pairwise form (500 envs)", "pairwise-form", limit=10)


def test_c05_beam_topk(report):
    claim_criterion(report, 5, "wide beam returns the exact top-k items (100 pairs)", "beam-topk")


def test_c06_soft_topk(report):
    claim_criterion(report, 6, "soft Top-K mass, order and sharp limit (10,000 vectors)", "softtopk")


def test_c07_tawin(report):
    claim_criterion(report, 7, "TAWin mass, identity and sharp window (10,000 groups)", "tawin")


def test_c08_ranking_reward(report):
    claim_criterion(report, 8, "shaped advantages equal weighted rule-only ones (1,000 groups)", "ranking-reward")


def test_c09_correlation_study(report):
    cfg = ExperimentConfig(seed=SEED)
    grids, elapsed = timed(simulate_correlation, cfg)
    best = {k: grids[k].argmax() for k in cfg.k_list}
    unimodal = {k: is_unimodal_dominant(grids[k]) for k in cfg.k_list}
    shift = best[20][0] > best[5][0]
    passed = all(unimodal.values()) and shift and elapsed < 60
    detail = "; ".join(f"K={k} argmax alpha={best[k][0]:.3f} d={best[k][1]:.3f} "
                       f"corr={best[k][2]:.3f} unimodal={unimodal[k]}" for k in cfg.k_list)
    report(9, "correlation grid unimodal, optimum moves right with K", passed, detail, elapsed)
    assert all(unimodal.values()), unimodal
    assert shift, best
    assert elapsed < 60


def test_c10_gradient(report):
    claim_criterion(report, 10, "analytic gradient equals finite differences (50 points)", "grad")


def test_c11_sampling(report):
    claim_criterion(report, 11, "constrained sampling frequencies (chi-squared, 1e5 draws)", "sampling")


def test_c12_training_smoke(report):
    task = SyntheticTask(seed=SEED)
    cfg = TrainConfig(tawin=TAWinConfig(), seed=SEED)
    t0 = time.perf_counter()
    before = metric_value(evaluate(task.initial_policy(), task, (3,)), "recall", 3)
    policy, _ = train(task, cfg, k_list=(3,))
    after = metric_value(evaluate(policy, task, (3,)), "recall", 3)
    elapsed = time.perf_counter() - t0
    passed = after > before and elapsed < 120
    report(12, "200 TAWin-GRPO steps improve Recall@3", passed,
           f"Recall@3 {before:.3f} -> {after:.3f}", elapsed)
    assert after > before
    assert elapsed < 120
