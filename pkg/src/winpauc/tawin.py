"""Threshold-adjusted windowed reweighting (TAWin) of group advantages.

Within a rollout group, negative-advantage rollouts are ranked by model score,
each gets a logit equal to minus its normalized distance from an anchor rank,
and a soft Top-K over those logits picks out a window of ranks. The weights are
rescaled so that the negatives keep their total mass.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .softtopk import SoftTopKConfig, soft_topk


@dataclass(frozen=True)
class TAWinConfig:
    window_mass: float = 4.0
    tau: float = 0.25
    anchor: int = 0  # zero-indexed rank among negatives

    def __post_init__(self):
        if not self.window_mass > 0:
            raise ValueError("window_mass must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.anchor < 0 or int(self.anchor) != self.anchor:
            raise ValueError("anchor must be a non-negative integer")


@dataclass(frozen=True)
class GroupAdvantages:
    advantages: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        adv = np.asarray(self.advantages, dtype=np.float64).reshape(-1)
        sc = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if adv.shape != sc.shape:
            raise ShapeMismatchError(
                f"{adv.size} advantages but {sc.size} scores"
            )
        object.__setattr__(self, "advantages", adv)
        object.__setattr__(self, "scores", sc)

    @property
    def positive_mask(self) -> np.ndarray:
        return self.advantages >= 0

    @property
    def size(self) -> int:
        return int(self.advantages.size)


def negative_logits(n_neg: int, anchor: int) -> np.ndarray:
    """Logits ``-|t_sigma - t_anchor|`` for ranks 1..n_neg (in rank order).

    Distances are formed on integer ranks before dividing, so equidistant ranks
    get bit-identical logits.
    """
    if n_neg == 1:
        return np.zeros(1)
    a = min(int(anchor), n_neg - 1)
    return -np.abs(np.arange(n_neg) - a) / (n_neg - 1)


def tawin_weights(g: GroupAdvantages, cfg: TAWinConfig) -> np.ndarray:
    weights = np.ones(g.size)
    neg_idx = np.flatnonzero(g.advantages < 0)
    n_neg = neg_idx.size
    if n_neg == 0:
        return weights
    # rank 1 = highest score; stable on index for equal scores
    ranked = neg_idx[np.argsort(-g.scores[neg_idx], kind="stable")]
    logits = negative_logits(n_neg, cfg.anchor)
    mass = min(float(cfg.window_mass), float(n_neg))
    w = soft_topk(logits, SoftTopKConfig(k_mass=mass, tau=cfg.tau)).weights
    weights[ranked] = w * n_neg / w.sum()
    return weights


def reweight_advantages(g: GroupAdvantages, cfg: TAWinConfig) -> np.ndarray:
    return g.advantages * tawin_weights(g, cfg)


def tawin_flat(advantages, group_size: int, scores, cfg: TAWinConfig) -> np.ndarray:
    """Apply :func:`reweight_advantages` to each contiguous block of ``group_size``."""
    a = np.asarray(advantages, dtype=np.float64).reshape(-1)
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if group_size < 1 or a.size % group_size != 0:
        raise ShapeMismatchError(
            f"length {a.size} is not divisible by group size {group_size}"
        )
    if s.size != a.size:
        raise ShapeMismatchError(f"{a.size} advantages but {s.size} scores")
    out = a.copy()
    for start in range(0, a.size, group_size):
        block = slice(start, start + group_size)
        out[block] = reweight_advantages(GroupAdvantages(a[block], s[block]), cfg)
    return out
