"""Per-user score containers and ranking metrics.

Covers AUC, one-way partial AUC (OPAUC), windowed partial AUC (WPAUC),
Recall@K and NDCG@K, plus the WPAUC -> Recall@K bound machinery.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyWindowError,
    InvalidKError,
    MultiplePositivesError,
    TieViolationError,
)

# Products like ((k - n) / n_neg) * n_neg are not always integers in floating point.
_INT_TOL = 1e-9
TIE_EPS = 1e-12


def ceil_tol(x: float) -> int:
    """Ceiling that snaps values within ``_INT_TOL`` of an integer onto it."""
    r = round(x)
    if abs(x - r) <= _INT_TOL * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def floor_tol(x: float) -> int:
    r = round(x)
    if abs(x - r) <= _INT_TOL * max(1.0, abs(x)):
        return int(r)
    return math.floor(x)


class TiePolicy(str, enum.Enum):
    ERROR = "error"
    PERTURB = "perturb"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RankedInstance:
    """Scores of one user's positive and negative items.

    With ``TiePolicy.PERTURB`` every score gets ``index * 1e-12`` added, indexing
    positives first and then negatives, which breaks exact ties deterministically.
    """

    positives: np.ndarray
    negatives: np.ndarray
    tie_policy: TiePolicy = TiePolicy.ERROR

    def __post_init__(self):
        pos = _frozen(self.positives)
        neg = _frozen(self.negatives)
        if pos.size < 1 or neg.size < 1:
            raise ValueError("need at least one positive and one negative score")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
            raise ValueError("scores must be finite")
        policy = TiePolicy(self.tie_policy)
        if policy is TiePolicy.PERTURB:
            offsets = np.arange(pos.size + neg.size, dtype=np.float64) * TIE_EPS
            pos = _frozen(pos + offsets[: pos.size])
            neg = _frozen(neg + offsets[pos.size:])
        if _has_ties(pos, neg):
            raise TieViolationError(
                "tied scores between a positive and a negative or among negatives"
            )
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)
        object.__setattr__(self, "tie_policy", policy)

    @property
    def n_pos(self) -> int:
        return int(self.positives.size)

    @property
    def n_neg(self) -> int:
        return int(self.negatives.size)


def _has_ties(pos: np.ndarray, neg: np.ndarray) -> bool:
    sorted_neg = np.sort(neg)
    if np.any(sorted_neg[1:] == sorted_neg[:-1]):
        return True
    idx = np.searchsorted(sorted_neg, pos)
    idx = np.clip(idx, 0, sorted_neg.size - 1)
    return bool(np.any(sorted_neg[idx] == pos))


@dataclass(frozen=True)
class WindowSpec:
    """FPR window ``[alpha, alpha + d]`` over the descending negative ranking."""

    alpha: float
    d: float

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not (0.0 < self.d <= 1.0):
            raise ValueError(f"d must lie in (0, 1], got {self.d}")
        if self.alpha + self.d > 1.0 + _INT_TOL:
            raise ValueError(f"alpha + d must be <= 1, got {self.alpha + self.d}")

    def rank_bounds(self, n_neg: int) -> tuple[int, int]:
        """(lo, hi) such that the window holds ranks ``lo < sigma <= hi`` (1-based)."""
        lo = ceil_tol(self.alpha * n_neg)
        hi = min(ceil_tol((self.alpha + self.d) * n_neg), n_neg)
        return lo, hi

    def threshold(self, inst: RankedInstance) -> float:
        """Score of the negative at rank ceil((alpha + d) * n_neg), i.e. eta_{alpha+d}."""
        _, hi = self.rank_bounds(inst.n_neg)
        if hi < 1:
            raise EmptyWindowError("threshold rank is zero")
        return float(np.sort(inst.negatives)[::-1][hi - 1])


FULL_WINDOW = WindowSpec(0.0, 1.0)


@dataclass(frozen=True)
class RecallBound:
    """Closed interval for Recall@K. It is empty (lower > upper) when the
    statistic it came from is not attainable with that many positives."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 <= self.lower <= 1.0 and 0.0 <= self.upper <= 1.0):
            raise ValueError(f"invalid bound ({self.lower}, {self.upper})")

    @property
    def empty(self) -> bool:
        return self.lower > self.upper

    def __contains__(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def window_negatives(inst: RankedInstance, w: WindowSpec) -> np.ndarray:
    """Negatives whose descending rank falls inside the window, in rank order."""
    lo, hi = w.rank_bounds(inst.n_neg)
    if hi <= lo:
        raise EmptyWindowError(
            f"window (alpha={w.alpha}, d={w.d}) is empty for n_neg={inst.n_neg}"
        )
    ranked = np.sort(inst.negatives)[::-1]
    return ranked[lo:hi].copy()


def _concordant_count(positives: np.ndarray, negs: np.ndarray) -> int:
    ascending = np.sort(negs)
    # number of window negatives strictly below each positive
    return int(np.searchsorted(ascending, positives, side="left").sum())


def wpauc(inst: RankedInstance, w: WindowSpec) -> float:
    negs = window_negatives(inst, w)
    count = _concordant_count(inst.positives, negs)
    return count / (inst.n_pos * negs.size)


def wpauc_bruteforce(inst: RankedInstance, w: WindowSpec) -> float:
    """Literal double loop over (positive, window negative) pairs."""
    negs = window_negatives(inst, w)
    count = 0
    for p in inst.positives.tolist():
        for q in negs.tolist():
            if p > q:
                count += 1
    return count / (inst.n_pos * len(negs))


def auc(inst: RankedInstance) -> float:
    return wpauc(inst, FULL_WINDOW)


def opauc(inst: RankedInstance, beta: float) -> float:
    return wpauc(inst, WindowSpec(0.0, beta))


def _overall_order(inst: RankedInstance) -> np.ndarray:
    """Labels (1 = positive) of all items sorted by descending score."""
    scores = np.concatenate([inst.positives, inst.negatives])
    labels = np.concatenate([np.ones(inst.n_pos, dtype=np.int64),
                             np.zeros(inst.n_neg, dtype=np.int64)])
    order = np.argsort(-scores, kind="stable")
    return labels[order]


def recall_at_k(inst: RankedInstance, k: int) -> float:
    if k < 1:
        raise InvalidKError(f"k must be >= 1, got {k}")
    labels = _overall_order(inst)
    return int(labels[:k].sum()) / inst.n_pos


def positive_rank(inst: RankedInstance) -> int:
    """1-based overall rank of the single positive."""
    if inst.n_pos != 1:
        raise MultiplePositivesError(f"expected one positive, got {inst.n_pos}")
    return 1 + int(np.sum(inst.negatives > inst.positives[0]))


def ndcg_at_k(inst: RankedInstance, k: int) -> float:
    if k < 1:
        raise InvalidKError(f"k must be >= 1, got {k}")
    rank = positive_rank(inst)
    if rank > k:
        return 0.0
    return 1.0 / math.log2(rank + 1)


def window_for_k(n_pos: int, n_neg: int, k: int) -> WindowSpec:
    """Window ``alpha=(k-n_pos)/n_neg, d=n_pos/n_neg`` that isolates the rank-k boundary.

    Valid when ``n_pos < k < n_neg``, or for a single positive with ``2 <= k <= n_neg``.
    """
    multi_case = n_pos < k < n_neg
    single_case = n_pos == 1 and 2 <= k <= n_neg
    if n_pos < 1 or not (multi_case or single_case):
        raise InvalidKError(f"no window for n_pos={n_pos}, n_neg={n_neg}, k={k}")
    return WindowSpec(alpha=(k - n_pos) / n_neg, d=n_pos / n_neg)


def recall_bound_from_wpauc(w_value: float, n_pos: int) -> RecallBound:
    if not (0.0 <= w_value <= 1.0):
        raise ValueError(f"WPAUC value must lie in [0, 1], got {w_value}")
    return RecallBound(lower=_recall_lower(w_value, n_pos), upper=_recall_upper(w_value, n_pos))


def _recall_lower(w_value: float, n_pos: int) -> float:
    return ceil_tol(n_pos * (1.0 - math.sqrt(1.0 - w_value))) / n_pos


def _recall_upper(w_value: float, n_pos: int) -> float:
    return floor_tol(n_pos * math.sqrt(w_value)) / n_pos


def opauc_recall_interval(o_value: float, n_pos: int, k: int) -> RecallBound:
    """Recall@K interval consistent with observing only OPAUC(k / n_neg) = o.

    The window statistic can then lie anywhere in ``[o, min(1, k o / n_pos)]``.
    """
    hi_w = min(1.0, k * o_value / n_pos)
    if not (0.0 <= o_value <= 1.0):
        raise ValueError(f"OPAUC value must lie in [0, 1], got {o_value}")
    return RecallBound(lower=_recall_lower(o_value, n_pos), upper=_recall_upper(hi_w, n_pos))
