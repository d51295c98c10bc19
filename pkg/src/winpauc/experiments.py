"""Experiment drivers shared by the command line and the scripts."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .errors import InvalidKError
from .ranking import RankedInstance, WindowSpec, auc, ndcg_at_k, opauc, recall_at_k, window_for_k, wpauc
from .tawin import TAWinConfig
from .trainer import SyntheticTask, TrainConfig, evaluate, metric_value, train

SWEEP_FIELDS = ("anchor", "k", "recall", "ndcg", "seed")


@dataclass(frozen=True)
class MetricsConfig:
    k_list: tuple[int, ...] = (1, 5, 10)
    betas: tuple[float, ...] = (0.1, 0.3)
    windows: tuple[tuple[float, float], ...] = ()

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricsConfig":
        return cls(
            k_list=tuple(int(k) for k in obj.get("k_list", cls.k_list)),
            betas=tuple(float(b) for b in obj.get("betas", cls.betas)),
            windows=tuple((float(a), float(d)) for a, d in obj.get("windows", ())),
        )


def instance_metrics(iid: str, inst: RankedInstance, cfg: MetricsConfig = MetricsConfig()) -> list[dict]:
    """Metric rows for one instance. Windows that are empty for it, and
    per-K windows outside their valid range, are skipped."""
    rows = [{"instance_id": iid, "metric": "auc", "alpha": 0.0, "d": 1.0, "value": auc(inst)}]
    for b in cfg.betas:
        if WindowSpec(0.0, b).rank_bounds(inst.n_neg)[1] > 0:
            rows.append({"instance_id": iid, "metric": "opauc", "alpha": 0.0, "d": b,
                         "value": opauc(inst, b)})
    for a, d in cfg.windows:
        w = WindowSpec(a, d)
        lo, hi = w.rank_bounds(inst.n_neg)
        if hi > lo:
            rows.append({"instance_id": iid, "metric": "wpauc", "alpha": a, "d": d,
                         "value": wpauc(inst, w)})
    for k in cfg.k_list:
        rows.append({"instance_id": iid, "metric": "recall", "k": k, "value": recall_at_k(inst, k)})
        if inst.n_pos == 1:
            rows.append({"instance_id": iid, "metric": "ndcg", "k": k, "value": ndcg_at_k(inst, k)})
        try:
            w = window_for_k(inst.n_pos, inst.n_neg, k)
        except InvalidKError:
            continue
        rows.append({"instance_id": iid, "metric": "wpauc", "alpha": w.alpha, "d": w.d, "k": k,
                     "value": wpauc(inst, w)})
    return rows


def anchor_sweep(task: SyntheticTask, anchors: Iterable[int], k_list: Sequence[int],
                 cfg: TrainConfig) -> list[dict]:
    """Train one TAWin policy per anchor and tabulate Recall@K and NDCG@K."""
    base = cfg.tawin if cfg.tawin is not None else TAWinConfig()
    rows = []
    for a in anchors:
        run_cfg = replace(cfg, tawin=replace(base, anchor=int(a)))
        policy, _ = train(task, run_cfg, k_list=k_list)
        ev = evaluate(policy, task, k_list)
        for k in k_list:
            rows.append({"anchor": int(a), "k": int(k),
                         "recall": metric_value(ev, "recall", k),
                         "ndcg": metric_value(ev, "ndcg", k),
                         "seed": cfg.seed})
    return rows


def best_anchor(rows: list[dict], k: int, metric: str = "recall") -> int:
    """Anchor with the highest metric at ``k``; the smallest anchor wins ties."""
    cands = [r for r in rows if int(r["k"]) == k]
    best = max(float(r[metric]) for r in cands)
    return min(int(r["anchor"]) for r in cands if float(r[metric]) == best)
