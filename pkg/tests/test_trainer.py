import math

import numpy as np
import pytest

from winpauc.decode import EOS, TabularPolicy, item_score, sequence_probability
from winpauc.grpo import GrpoConfig
from winpauc.tawin import TAWinConfig
from winpauc.trainer import (
    METRICS,
    RolloutMode,
    SyntheticTask,
    TrainConfig,
    evaluate,
    grpo_step,
    metric_value,
    prepare_rollouts,
    rollout_group,
    train,
)
from winpauc.verify import gradient_relative_error, random_batch


@pytest.fixture(scope="module")
def small_task():
    return SyntheticTask(n_items=6, n_contexts=10, dim=4, seed=3)


def test_task_shape(small_task):
    assert len(small_task.trie) == 6
    assert set(small_task.targets.values()) <= set(small_task.trie.items)
    assert all(s[-1] == EOS for s in map(small_task.trie.serialize, small_task.trie.items))


def test_single_item_rollouts_are_identical():
    task = SyntheticTask(n_items=1, n_contexts=1)
    cfg = TrainConfig(group_size=4, rollout_mode="sample")
    g = rollout_group(task.initial_policy(), task.trie, 0, task.targets[0], cfg, 0)
    assert len(set(g.items)) == 1 and g.rewards.tolist() == [1, 1, 1, 1]
    assert prepare_rollouts(task.initial_policy(), task, [0], cfg, 0)[0].advantages.tolist() == [0] * 4


def test_full_width_beam_returns_all_items_in_order(small_task):
    pol = small_task.initial_policy(scale=1.0)
    cfg = TrainConfig(group_size=6, rollout_mode=RolloutMode.BEAM)
    g = rollout_group(pol, small_task.trie, 0, small_task.targets[0], cfg, 0)
    assert sorted(g.items) == sorted(small_task.trie.items)
    assert np.all(np.diff(g.scores_old) <= 0)
    assert all(np.all(r == 1) for r in g.token_ratios)


def test_sampled_reward_rate_matches_target_probability(small_task):
    pol = small_task.initial_policy(scale=1.0)
    target = small_task.targets[0]
    cfg = TrainConfig(group_size=50, rollout_mode="sample")
    rng = np.random.default_rng(0)
    hits = sum(rollout_group(pol, small_task.trie, 0, target, cfg, rng).rewards.sum() for _ in range(100))
    p = sequence_probability(pol, small_task.trie, 0, small_task.trie.serialize(target))
    n = 50 * 100
    assert abs(hits / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_zero_advantages_leave_policy_unchanged(small_task):
    task = SyntheticTask(n_items=6, n_contexts=10, dim=4, seed=3)
    task.targets[0] = "not-an-item"
    pol = task.initial_policy()
    cfg = TrainConfig(group_size=4, batch_size=1)
    new, obj = grpo_step(pol, task, cfg, 0, contexts=[0])
    assert obj == 0.0
    for key in pol.keys():
        assert np.array_equal(new.logits(*key), pol.logits(*key))


def test_positive_rollout_gains_probability(small_task):
    pol = small_task.initial_policy()
    target = small_task.targets[0]
    cfg = TrainConfig(group_size=6, learning_rate=0.05, epochs=1)
    new, _ = grpo_step(pol, small_task, cfg, 0, contexts=[0])
    before = item_score(pol, small_task.trie, target, 0)
    assert item_score(new, small_task.trie, target, 0) > before


@pytest.mark.parametrize("weighted", [False, True])
def test_gradient_matches_finite_differences(weighted):
    rng = np.random.default_rng(7 + weighted)
    for _ in range(5):
        pol, batch = random_batch(rng, weighted=weighted)
        assert gradient_relative_error(pol, batch, GrpoConfig()) < 1e-4


def test_rows_stay_normalized(small_task):
    cfg = TrainConfig(group_size=6, steps=3, batch_size=4, tawin=TAWinConfig(window_mass=2))
    pol, _ = train(small_task, cfg, k_list=(1,))
    for key in pol.keys():
        assert abs(pol.probs(*key).sum() - 1) <= 1e-10


def test_training_is_deterministic(small_task):
    cfg = TrainConfig(group_size=4, steps=4, batch_size=3, rollout_mode="sample", seed=5,
                      tawin=TAWinConfig())
    a_pol, a_log = train(small_task, cfg, k_list=(1, 3))
    b_pol, b_log = train(small_task, cfg, k_list=(1, 3))
    assert a_log == b_log
    for key in a_pol.keys():
        assert np.array_equal(a_pol.logits(*key), b_pol.logits(*key))


def test_near_uniform_policy_recall():
    task = SyntheticTask()
    rows = evaluate(task.initial_policy(), task, (1, 3, 5))
    for k in (1, 3, 5):
        p = k / task.n_items
        assert abs(metric_value(rows, "recall", k) - p) < 3 * math.sqrt(p * (1 - p) / task.n_contexts)


def test_perfect_policy_metrics():
    task = SyntheticTask(n_items=3, n_contexts=4, seed=1)
    rows = {}
    for c in task.contexts:
        seq = task.trie.serialize(task.targets[c])
        for j in range(len(seq)):
            p = np.full(len(task.vocab), 1e-3)
            p[task.vocab.index(seq[j])] = 1.0
            rows[(c, seq[:j])] = np.log(p / p.sum())
    pol = TabularPolicy(task.vocab, rows)
    ev = evaluate(pol, task, (1, 3))
    assert metric_value(ev, "recall", 1) == 1.0 and metric_value(ev, "ndcg", 3) == 1.0
    assert len(ev) == 2 * len(METRICS)


def test_metric_lookup_missing():
    with pytest.raises(KeyError):
        metric_value([], "recall", 1)


def test_config_from_dict():
    cfg = TrainConfig.from_dict({"grpo": {"epsilon": 0.1}, "tawin": {"anchor": 2},
                                 "rollout_mode": "sample"})
    assert cfg.grpo.epsilon == 0.1 and cfg.tawin.anchor == 2
    assert cfg.rollout_mode is RolloutMode.SAMPLE
    with pytest.raises(ValueError):
        TrainConfig(group_size=1)
