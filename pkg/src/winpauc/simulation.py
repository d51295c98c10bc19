"""Monte Carlo study of how WPAUC(alpha, d) correlates with Recall@K under
uniformly random rankings."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ranking import WindowSpec


def default_alphas() -> list[float]:
    return [round(0.01 * i, 10) for i in range(31)]


def default_ds() -> list[float]:
    return [round(0.005 * i, 10) for i in range(1, 31)]


@dataclass
class ExperimentConfig:
    trials: int = 10_000
    n_pos: int = 10
    n_neg: int = 200
    k_list: tuple[int, ...] = (5, 10, 20)
    alphas: list[float] = field(default_factory=default_alphas)
    ds: list[float] = field(default_factory=default_ds)
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n_pos < 1 or self.n_neg < 1:
            raise ValueError("need at least one positive and one negative")
        self.k_list = tuple(int(k) for k in self.k_list)


@dataclass
class CorrelationGrid:
    """Pearson correlations indexed by (alpha, d); NaN marks undefined cells."""

    k: int
    alphas: np.ndarray
    ds: np.ndarray
    corr: np.ndarray  # shape (len(alphas), len(ds))

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.corr)

    def argmax(self) -> tuple[float, float, float] | None:
        """(alpha, d, corr) of the best defined cell, or None if nothing is defined."""
        if not self.defined.any():
            return None
        flat = np.where(self.defined, self.corr, -np.inf)
        i, j = np.unravel_index(int(np.argmax(flat)), flat.shape)
        return float(self.alphas[i]), float(self.ds[j]), float(self.corr[i, j])

    def alpha_profile(self) -> np.ndarray:
        """Best correlation over d for every alpha (NaN where a row is undefined)."""
        out = np.full(len(self.alphas), np.nan)
        for i in range(len(self.alphas)):
            row = self.corr[i][self.defined[i]]
            if row.size:
                out[i] = row.max()
        return out

    def rows(self):
        for i, a in enumerate(self.alphas):
            for j, d in enumerate(self.ds):
                c = self.corr[i, j]
                yield {"k": self.k, "alpha": float(a), "d": float(d),
                       "correlation": None if math.isnan(c) else float(c)}


def random_rankings(rng: np.random.Generator, trials: int, n_pos: int, n_neg: int) -> np.ndarray:
    """Boolean (trials, n_pos + n_neg) matrix; True marks a positive, column 0 is the top score."""
    keys = rng.random((trials, n_pos + n_neg))
    perm = np.argsort(keys, axis=1)
    return perm < n_pos


def ranking_scores(labels_row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores (N, N-1, ..., 1 by position) split into positives and negatives."""
    n = labels_row.size
    scores = np.arange(n, 0, -1, dtype=np.float64)
    return scores[labels_row], scores[~labels_row]


def _window_stats(labels: np.ndarray, n_pos: int, n_neg: int):
    cum_pos = np.cumsum(labels, axis=1)
    # positives ranked above each negative, negatives in rank order
    above = cum_pos[~labels].reshape(labels.shape[0], n_neg)
    prefix = np.zeros((labels.shape[0], n_neg + 1))
    np.cumsum(above, axis=1, out=prefix[:, 1:])
    return cum_pos, prefix


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation, NaN when either side has (numerically) zero variance."""
    xc = x - x.mean()
    yc = y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    scale = max(1.0, float(np.abs(x).max()) ** 2, float(np.abs(y).max()) ** 2) * x.size
    if sxx <= 1e-24 * scale or syy <= 1e-24 * scale:
        return math.nan
    return float(np.clip((xc @ yc) / math.sqrt(sxx * syy), -1.0, 1.0))


def simulate_correlation(cfg: ExperimentConfig) -> dict[int, CorrelationGrid]:
    rng = np.random.default_rng(cfg.seed)
    labels = random_rankings(rng, cfg.trials, cfg.n_pos, cfg.n_neg)
    cum_pos, prefix = _window_stats(labels, cfg.n_pos, cfg.n_neg)
    alphas = np.asarray(cfg.alphas, dtype=np.float64)
    ds = np.asarray(cfg.ds, dtype=np.float64)

    values: dict[tuple[int, int], np.ndarray] = {}
    for i, a in enumerate(alphas):
        for j, d in enumerate(ds):
            if a + d > 1.0 + 1e-12:
                continue
            lo, hi = WindowSpec(float(a), float(min(d, 1.0 - a))).rank_bounds(cfg.n_neg)
            if hi <= lo:
                continue
            values[(i, j)] = (prefix[:, hi] - prefix[:, lo]) / (cfg.n_pos * (hi - lo))

    grids = {}
    for k in cfg.k_list:
        recall = cum_pos[:, min(k, labels.shape[1]) - 1] / cfg.n_pos
        corr = np.full((alphas.size, ds.size), np.nan)
        if cfg.trials > 1:
            for (i, j), w in values.items():
                corr[i, j] = pearson(w, recall)
        grids[k] = CorrelationGrid(k, alphas, ds, corr)
    return grids


def is_unimodal_dominant(grid: CorrelationGrid, tol: float = 0.02) -> bool:
    """Whether the best-over-d profile along alpha rises to its peak and then falls.

    Moves against the expected direction are tolerated up to ``tol`` (Monte Carlo
    noise); the peak must also beat both ends of the profile by more than ``tol``
    unless it sits at an end.
    """
    prof = grid.alpha_profile()
    idx = np.flatnonzero(~np.isnan(prof))
    if idx.size == 0:
        return False
    p = prof[idx]
    peak = int(np.argmax(p))
    rising = np.all(np.diff(p[: peak + 1]) >= -tol)
    falling = np.all(np.diff(p[peak:]) <= tol)
    clear_left = peak == 0 or p[peak] > p[0] + tol
    clear_right = peak == p.size - 1 or p[peak] > p[-1] + tol
    return bool(rising and falling and clear_left and clear_right)
