import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from winpauc.errors import ShapeMismatchError
from winpauc.tawin import (
    GroupAdvantages,
    TAWinConfig,
    negative_logits,
    reweight_advantages,
    tawin_flat,
    tawin_weights,
)
from winpauc.verify import sharp_window_ok

SHARP_EXAMPLE = GroupAdvantages([1.7, -0.6, -0.6, -0.6], [0.9, 0.8, 0.5, 0.1])
SHARP_CFG = TAWinConfig(window_mass=2, tau=0.01, anchor=0)


@st.composite
def groups(draw):
    G = draw(st.integers(1, 16))
    adv = draw(arrays(np.float64, G, elements=st.floats(-3, 3)))
    perm = draw(st.permutations(list(range(G))))
    return GroupAdvantages(adv, np.array(perm, dtype=float))


configs = st.builds(TAWinConfig, window_mass=st.floats(0.5, 8.0), tau=st.floats(1 / 6, 1.0),
                    anchor=st.integers(0, 8))


def test_mass_equal_to_count_is_uniform():
    g = GroupAdvantages([1.5, -0.5, -0.5, -0.5], [0.1, 0.2, 0.3, 0.4])
    assert tawin_weights(g, TAWinConfig(window_mass=3)).tolist() == [1, 1, 1, 1]


def test_sharp_window_example():
    w = tawin_weights(SHARP_EXAMPLE, SHARP_CFG)
    assert w[0] == 1.0
    assert np.allclose(w[1:], [1.5, 1.5, 0.0], atol=1e-6)
    out = reweight_advantages(SHARP_EXAMPLE, SHARP_CFG)
    assert np.allclose(out, [1.7, -0.9, -0.9, 0.0], atol=1e-6)


def test_single_negative_gets_weight_one():
    assert tawin_weights(GroupAdvantages([-1.0], [0.3]), TAWinConfig()).tolist() == [1.0]


def test_no_negatives_is_identity():
    g = GroupAdvantages([0.0, 1.0, 2.0], [0.3, 0.2, 0.1])
    assert np.array_equal(reweight_advantages(g, TAWinConfig()), g.advantages)


def test_logits_are_symmetric_about_anchor():
    z = negative_logits(7, 3)
    assert z[2] == z[4] and z[1] == z[5] and z[3] == 0.0
    assert negative_logits(4, 10).tolist() == negative_logits(4, 3).tolist()


def test_flat_blocks_are_independent():
    adv = np.r_[SHARP_EXAMPLE.advantages, 1.0, -1.0, -2.0, 0.5]
    sc = np.r_[SHARP_EXAMPLE.scores, 0.1, 0.4, 0.3, 0.2]
    out = tawin_flat(adv, 4, sc, SHARP_CFG)
    assert np.array_equal(out[:4], reweight_advantages(SHARP_EXAMPLE, SHARP_CFG))
    swapped = tawin_flat(np.r_[adv[4:], adv[:4]], 4, np.r_[sc[4:], sc[:4]], SHARP_CFG)
    assert np.array_equal(swapped, np.r_[out[4:], out[:4]])


def test_flat_passes_positive_groups():
    adv = np.array([1.0, 0.0, 2.0, 0.5])
    assert np.array_equal(tawin_flat(adv, 2, np.arange(4.0), TAWinConfig()), adv)


def test_flat_shape_errors():
    with pytest.raises(ShapeMismatchError):
        tawin_flat(np.ones(5), 2, np.ones(5), TAWinConfig())
    with pytest.raises(ShapeMismatchError):
        tawin_flat(np.ones(4), 2, np.ones(3), TAWinConfig())


@given(groups(), configs)
def test_mass_and_sign(g, cfg):
    w = tawin_weights(g, cfg)
    neg = g.advantages < 0
    if neg.any():
        assert abs(w[neg].sum() - neg.sum()) <= 1e-9
    out = reweight_advantages(g, cfg)
    assert np.array_equal(out[~neg], g.advantages[~neg])
    assert np.all(out[neg] <= 0)


@given(groups(), st.floats(1 / 6, 1.0), st.integers(0, 8), st.integers(0, 3))
def test_wide_window_is_identity(g, tau, anchor, extra):
    n_neg = int((g.advantages < 0).sum())
    cfg = TAWinConfig(window_mass=n_neg + extra + 0.5, tau=tau, anchor=anchor)
    assert np.array_equal(reweight_advantages(g, cfg), g.advantages)


@given(groups(), configs, st.randoms())
def test_permutation_equivariance(g, cfg, rnd):
    perm = list(range(g.size))
    rnd.shuffle(perm)
    shuffled = GroupAdvantages(g.advantages[perm], g.scores[perm])
    assert np.array_equal(tawin_weights(shuffled, cfg), tawin_weights(g, cfg)[perm])


@given(st.integers(1, 16), st.data())
def test_sharp_support_is_nearest_ranks(n_neg, data):
    W = data.draw(st.integers(1, n_neg))
    anchor = data.draw(st.integers(0, 20))
    g = GroupAdvantages(-np.ones(n_neg), np.arange(n_neg, 0, -1.0))
    w = tawin_weights(g, TAWinConfig(window_mass=W, tau=1e-3, anchor=anchor))
    assert sharp_window_ok(w, anchor, W)


@given(st.integers(2, 16), st.data())
def test_support_moves_deeper_with_anchor(n_neg, data):
    W = data.draw(st.integers(1, n_neg))
    g = GroupAdvantages(-np.ones(n_neg), np.arange(n_neg, 0, -1.0))
    prev = None
    for anchor in range(n_neg + 1):
        w = tawin_weights(g, TAWinConfig(window_mass=W, tau=1e-3, anchor=anchor))
        support = np.flatnonzero(w > 1e-6)
        span = (support.min(), support.max())
        if prev is not None:
            assert span[0] >= prev[0] and span[1] >= prev[1]
        prev = span
