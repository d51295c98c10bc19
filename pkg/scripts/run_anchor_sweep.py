"""Recall@K and NDCG@K of TAWin-GRPO policies as the anchor rank varies.

Runs are short on purpose. After a few hundred beam-rollout steps every
context either ranks its target first or never sees it in a rollout group,
and all anchors end at the same Recall@K.
"""
import argparse

from winpauc import io
from winpauc.experiments import SWEEP_FIELDS, anchor_sweep, best_anchor
from winpauc.tawin import TAWinConfig
from winpauc.trainer import SyntheticTask, TrainConfig


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--anchors", default="0,1,2,3,4,5,6")
    p.add_argument("--k-list", default="1,3,5")
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--rollout-mode", choices=["beam", "sample"], default="beam")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="anchor_sweep.csv")
    args = p.parse_args()

    anchors = [int(a) for a in args.anchors.split(",")]
    k_list = [int(k) for k in args.k_list.split(",")]
    cfg = TrainConfig(steps=args.steps, tawin=TAWinConfig(), rollout_mode=args.rollout_mode,
                      seed=args.seed)
    rows = anchor_sweep(SyntheticTask(), anchors, k_list, cfg)
    io.write_csv(args.out, rows, SWEEP_FIELDS)
    for r in rows:
        print(f"anchor={r['anchor']} K={r['k']} recall={r['recall']:.3f} ndcg={r['ndcg']:.3f}")
    for k in k_list:
        print(f"best anchor for Recall@{k}: {best_anchor(rows, k)}")


if __name__ == "__main__":
    main()
