import math

import numpy as np
import pytest

from winpauc.ranking import RankedInstance, WindowSpec, recall_at_k, window_for_k, wpauc
from winpauc.simulation import (
    CorrelationGrid,
    ExperimentConfig,
    _window_stats,
    is_unimodal_dominant,
    pearson,
    random_rankings,
    ranking_scores,
    simulate_correlation,
)


def test_rankings_have_right_counts(rng):
    labels = random_rankings(rng, 50, 3, 17)
    assert labels.shape == (50, 20) and np.all(labels.sum(axis=1) == 3)


def test_vectorized_window_matches_metric(rng):
    n_pos, n_neg = 4, 30
    labels = random_rankings(rng, 40, n_pos, n_neg)
    cum_pos, prefix = _window_stats(labels, n_pos, n_neg)
    for t in range(labels.shape[0]):
        inst = RankedInstance(*ranking_scores(labels[t]))
        for a, d in [(0.0, 1.0), (0.1, 0.2), (0.3, 0.05)]:
            lo, hi = WindowSpec(a, d).rank_bounds(n_neg)
            fast = (prefix[t, hi] - prefix[t, lo]) / (n_pos * (hi - lo))
            assert fast == pytest.approx(wpauc(inst, WindowSpec(a, d)), abs=1e-15)
        for k in (1, 5, 10):
            assert cum_pos[t, k - 1] / n_pos == recall_at_k(inst, k)


def test_single_positive_identity_cell_is_perfect():
    cfg = ExperimentConfig(trials=2000, n_pos=1, n_neg=200, k_list=(5,),
                           alphas=[0.02, 0.05], ds=[0.005, 0.01])
    grid = simulate_correlation(cfg)[5]
    w = window_for_k(1, 200, 5)
    assert (w.alpha, w.d) == pytest.approx((0.02, 0.005))
    assert grid.corr[0, 0] == pytest.approx(1.0)


def test_single_trial_is_undefined():
    grids = simulate_correlation(ExperimentConfig(trials=1))
    for g in grids.values():
        assert not g.defined.any() and g.argmax() is None
        assert all(row["correlation"] is None for row in g.rows())


def test_correlations_in_range_and_deterministic():
    cfg = ExperimentConfig(trials=500, seed=3)
    a, b = simulate_correlation(cfg), simulate_correlation(cfg)
    for k in cfg.k_list:
        c = a[k].corr[a[k].defined]
        assert np.all((c >= -1) & (c <= 1))
        assert np.array_equal(a[k].corr, b[k].corr, equal_nan=True)


def test_grid_skips_cells_past_one():
    cfg = ExperimentConfig(trials=10, alphas=[0.9], ds=[0.05, 0.2])
    grid = simulate_correlation(cfg)[5]
    assert math.isnan(grid.corr[0, 1])


def test_pearson_zero_variance():
    assert math.isnan(pearson(np.ones(5), np.arange(5.0)))
    assert pearson(np.arange(5.0), 2 * np.arange(5.0)) == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)


def grid_from_profile(profile):
    p = np.array(profile, dtype=float)
    return CorrelationGrid(5, np.arange(p.size) * 0.01, np.array([0.01]), p[:, None])


@pytest.mark.parametrize("profile,expected", [
    ([0.1, 0.5, 0.9, 0.6, 0.2], True),
    ([0.9, 0.6, 0.3], True),
    ([0.1, 0.8, 0.2, 0.8, 0.1], False),
    ([0.5, 0.51, 0.5], False),
    ([math.nan, math.nan], False),
])
def test_unimodal_check(profile, expected):
    assert is_unimodal_dominant(grid_from_profile(profile)) is expected
