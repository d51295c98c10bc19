"""Threshold-adjusted soft Top-K with a clipped exponential and closed-form threshold."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleMassError, NoValidThresholdError


@dataclass(frozen=True)
class SoftTopKConfig:
    k_mass: float
    tau: float

    def __post_init__(self):
        if not self.k_mass > 0:
            raise ValueError(f"k_mass must be positive, got {self.k_mass}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class SoftWeights:
    weights: np.ndarray
    lambda_threshold: float
    m_index: int


def _bracket_tol(*values: float) -> float:
    finite = [abs(v) for v in values if math.isfinite(v)]
    return 8 * np.finfo(np.float64).eps * max([1.0, *finite])


def soft_topk(x, cfg: SoftTopKConfig) -> SoftWeights:
    """Weights ``min(1, exp((x - lam) / tau))`` whose total is exactly ``cfg.k_mass``.

    ``lam`` is found by scanning how many of the largest entries saturate at 1
    (``m``) and taking the first ``m`` whose closed-form threshold falls between
    the m-th and (m+1)-th largest entries.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.size
    K, tau = float(cfg.k_mass), float(cfg.tau)
    if n < 1:
        raise ValueError("soft_topk needs a non-empty vector")
    if K > n:
        raise InfeasibleMassError(f"k_mass={K} exceeds vector length {n}")

    order = np.argsort(-x, kind="stable")
    xs = x[order]
    if K == n:
        # every weight saturates; lam sits at the smallest entry
        return SoftWeights(np.ones(n), float(xs[-1]), n - 1)

    # suffix log-sum-exp of xs / tau, stable via logaddexp
    suffix = np.logaddexp.accumulate((xs / tau)[::-1])[::-1]
    for m in range(math.ceil(K)):
        lam = tau * suffix[m] - tau * math.log(K - m)
        upper = math.inf if m == 0 else xs[m - 1]
        lower = xs[m]
        tol = _bracket_tol(upper, lower, lam)
        if upper + tol >= lam >= lower - tol:
            w_sorted = np.exp(np.minimum(0.0, (xs - lam) / tau))
            w_sorted[:m] = 1.0
            weights = np.empty(n)
            weights[order] = w_sorted
            return SoftWeights(weights, float(lam), m)
    raise NoValidThresholdError(f"no bracketing index for k_mass={K}, tau={tau}")


def hard_topk(x, k: int) -> np.ndarray:
    """K-hot indicator of the k largest entries; earlier index wins ties."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not 1 <= k <= x.size:
        raise ValueError(f"k must lie in [1, {x.size}], got {k}")
    out = np.zeros(x.size)
    out[np.argsort(-x, kind="stable")[:k]] = 1.0
    return out
