"""Windowed partial AUC metrics, soft Top-K anchor weighting and a tabular
GRPO sandbox for generative recommendation."""
from .decode import EOS, BeamConfig, ItemTrie, TabularPolicy, beam_search, constrained_sample
from .grpo import GrpoConfig, RolloutGroup, clipped_surrogate, group_advantages
from .ranking import (
    RankedInstance,
    RecallBound,
    TiePolicy,
    WindowSpec,
    auc,
    ndcg_at_k,
    opauc,
    recall_at_k,
    recall_bound_from_wpauc,
    window_for_k,
    wpauc,
)
from .softtopk import SoftTopKConfig, hard_topk, soft_topk
from .tawin import TAWinConfig, tawin_flat, tawin_weights

__all__ = [
    "EOS", "BeamConfig", "ItemTrie", "TabularPolicy", "beam_search", "constrained_sample",
    "GrpoConfig", "RolloutGroup", "clipped_surrogate", "group_advantages",
    "RankedInstance", "RecallBound", "TiePolicy", "WindowSpec", "auc", "ndcg_at_k", "opauc",
    "recall_at_k", "recall_bound_from_wpauc", "window_for_k", "wpauc",
    "SoftTopKConfig", "hard_topk", "soft_topk", "TAWinConfig", "tawin_flat", "tawin_weights",
]
__version__ = "0.1.0"
