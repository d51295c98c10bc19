"""Desk-scale RL loop: tabular softmax policy over an item trie trained with
GRPO or TAWin-GRPO by gradient ascent on the logits."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable

import numpy as np

from .decode import (
    BeamConfig,
    ItemTrie,
    TabularPolicy,
    beam_search,
    constrained_samples,
    item_log_score,
)
from .grpo import GrpoConfig, RolloutGroup, clipped_surrogate, group_advantages, rule_reward
from .ranking import (
    RankedInstance,
    TiePolicy,
    ndcg_at_k,
    recall_at_k,
    window_for_k,
    wpauc,
)
from .tawin import GroupAdvantages, TAWinConfig, tawin_weights


class RolloutMode(str, enum.Enum):
    SAMPLE = "sample"
    BEAM = "beam"


@dataclass
class SyntheticTask:
    """Synthetic users with latent item affinities.

    Context and item embeddings are standard normal in ``dim`` dimensions; the
    target of a context is its highest-affinity item. Item k is serialized as
    two tokens (a letter block and a digit) followed by eos.
    """

    n_items: int = 20
    n_contexts: int = 200
    dim: int = 8
    seed: int = 0
    trie: ItemTrie = field(init=False)
    affinity: np.ndarray = field(init=False)
    targets: dict = field(init=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        ctx_emb = rng.normal(size=(self.n_contexts, self.dim))
        item_emb = rng.normal(size=(self.n_items, self.dim))
        self.affinity = ctx_emb @ item_emb.T
        width = math.ceil(math.sqrt(self.n_items))
        items = {f"i{k:03d}": [chr(ord("a") + k // width), str(k % width)]
                 for k in range(self.n_items)}
        self.trie = ItemTrie(items)
        names = self.trie.items
        self.targets = {c: names[int(np.argmax(self.affinity[c]))] for c in self.contexts}

    @property
    def contexts(self) -> list[int]:
        return list(range(self.n_contexts))

    @property
    def vocab(self) -> tuple[str, ...]:
        return self.trie.tokens

    def initial_policy(self, scale: float = 0.01, seed: int | None = None) -> TabularPolicy:
        """Near-uniform policy: Gaussian logits with std ``scale`` on every table row."""
        rng = np.random.default_rng(self.seed + 1 if seed is None else seed)
        rows = {}
        for c in self.contexts:
            for prefix in self.trie.prefixes():
                rows[(c, prefix)] = rng.normal(0.0, scale, size=len(self.vocab))
        return TabularPolicy(self.vocab, rows)


@dataclass(frozen=True)
class TrainConfig:
    group_size: int = 16
    learning_rate: float = 0.5
    steps: int = 200
    epochs: int = 2  # gradient updates per rollout batch; pi_old is refrozen after them
    batch_size: int = 32
    grpo: GrpoConfig = GrpoConfig()
    tawin: TAWinConfig | None = None
    rollout_mode: RolloutMode = RolloutMode.BEAM
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        object.__setattr__(self, "rollout_mode", RolloutMode(self.rollout_mode))

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        if "grpo" in obj and isinstance(obj["grpo"], dict):
            obj["grpo"] = GrpoConfig(**obj["grpo"])
        if obj.get("tawin") is not None and isinstance(obj["tawin"], dict):
            obj["tawin"] = TAWinConfig(**obj["tawin"])
        return cls(**obj)


@dataclass
class Rollouts:
    context: Hashable
    group: RolloutGroup
    old_logprobs: list[np.ndarray]  # pi_old log-prob of each token, per rollout
    advantages: np.ndarray
    weights: np.ndarray


def rollout_group(policy_old: TabularPolicy, trie: ItemTrie, context, target,
                  cfg: TrainConfig, rng) -> RolloutGroup:
    G = cfg.group_size
    if cfg.rollout_mode is RolloutMode.SAMPLE:
        draws = constrained_samples(policy_old, trie, context, G, rng)
        seqs = [d.tokens for d in draws]
        items = [d.item for d in draws]
    else:
        beam_cfg = BeamConfig(beam_width=G, return_size=min(G, len(trie)),
                              max_length=trie.max_length)
        hyps = beam_search(policy_old, trie, context, beam_cfg)
        seqs = [h.tokens for h in hyps]
        items = [h.item for h in hyps]
    scores = [math.exp(item_log_score(policy_old, trie, i, context)) for i in items]
    return RolloutGroup(
        rewards=[rule_reward(i, target) for i in items],
        token_ratios=[np.ones(len(s)) for s in seqs],
        scores_old=scores,
        items=items,
        sequences=seqs,
    )


def prepare_rollouts(policy_old: TabularPolicy, task: SyntheticTask, contexts: Iterable,
                     cfg: TrainConfig, rng) -> list[Rollouts]:
    out = []
    for c in contexts:
        group = rollout_group(policy_old, task.trie, c, task.targets[c], cfg, rng)
        adv = group_advantages(group.rewards, cfg.grpo)
        if cfg.tawin is not None:
            w = tawin_weights(GroupAdvantages(adv, group.scores_old), cfg.tawin)
        else:
            w = np.ones(group.G)
        old_lp = [np.array([policy_old.logprobs(c, seq[:j])[policy_old.index[seq[j]]]
                            for j in range(len(seq))]) for seq in group.sequences]
        out.append(Rollouts(c, group, old_lp, adv, w))
    return out


def _token_ratios(policy: TabularPolicy, r: Rollouts) -> list[np.ndarray]:
    ratios = []
    for seq, old_lp in zip(r.group.sequences, r.old_logprobs):
        new_lp = np.array([policy.logprobs(r.context, seq[:j])[policy.index[seq[j]]]
                           for j in range(len(seq))])
        ratios.append(np.exp(new_lp - old_lp))
    return ratios


def batch_objective(policy: TabularPolicy, batch: list[Rollouts], grpo: GrpoConfig) -> float:
    """Mean over groups of the (weighted) clipped surrogate at ``policy``."""
    total = 0.0
    for r in batch:
        group = replace(r.group, token_ratios=_token_ratios(policy, r))
        total += clipped_surrogate(group, r.advantages, grpo, r.weights)
    return total / len(batch)


def batch_gradient(policy: TabularPolicy, batch: list[Rollouts],
                   grpo: GrpoConfig) -> dict[tuple, np.ndarray]:
    """Gradient of :func:`batch_objective` w.r.t. the logits rows it touches.

    A token contributes ``A rho (onehot - p)`` only while the unclipped branch is
    the minimum: ``rho <= 1 + eps`` for A > 0, ``rho > 1 - eps`` for A < 0
    (left derivative at the kinks).
    """
    eps = grpo.epsilon
    grads: dict[tuple, np.ndarray] = {}
    n_groups = len(batch)
    for r in batch:
        G = r.group.G
        ratios = _token_ratios(policy, r)
        for m, seq in enumerate(r.group.sequences):
            a = r.advantages[m] * r.weights[m]
            if a == 0:
                continue
            L = len(seq)
            for j in range(L):
                rho = ratios[m][j]
                if (a > 0 and rho > 1 + eps) or (a < 0 and rho <= 1 - eps):
                    continue
                key = (r.context, seq[:j])
                p = policy.probs(r.context, seq[:j])
                g = -p * (a * rho / (G * L * n_groups))
                g[policy.index[seq[j]]] += a * rho / (G * L * n_groups)
                if key in grads:
                    grads[key] += g
                else:
                    grads[key] = g
    return grads


def ascend(policy: TabularPolicy, grads: dict[tuple, np.ndarray], lr: float) -> TabularPolicy:
    updates = {key: policy.logits(*key) + lr * g for key, g in grads.items()}
    return policy.with_logits(updates)


def grpo_step(policy: TabularPolicy, task: SyntheticTask, cfg: TrainConfig, rng,
              contexts=None) -> tuple[TabularPolicy, float]:
    """One rollout batch followed by ``cfg.epochs`` ascent steps.

    Returns the updated policy and the surrogate objective it reaches on the batch.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if contexts is None:
        size = min(cfg.batch_size, task.n_contexts)
        contexts = rng.choice(task.n_contexts, size=size, replace=False).tolist()
    batch = prepare_rollouts(policy, task, contexts, cfg, rng)
    for _ in range(cfg.epochs):
        grads = batch_gradient(policy, batch, cfg.grpo)
        if not grads:
            break
        policy = ascend(policy, grads, cfg.learning_rate)
    return policy, batch_objective(policy, batch, cfg.grpo)


def context_instance(policy: TabularPolicy, task: SyntheticTask, context) -> RankedInstance:
    target = task.targets[context]
    pos, neg = [], []
    for item in task.trie.items:
        s = item_log_score(policy, task.trie, item, context)
        (pos if item == target else neg).append(s)
    # log scores preserve the ranking and avoid underflow
    return RankedInstance(pos, neg, tie_policy=TiePolicy.PERTURB)


METRICS = ("recall", "ndcg", "wpauc")


def evaluate(policy: TabularPolicy, task: SyntheticTask, k_list=(1, 3, 5),
             contexts=None) -> list[dict]:
    """Mean Recall@K, NDCG@K and WPAUC at the single-positive window for each K."""
    contexts = task.contexts if contexts is None else list(contexts)
    insts = [context_instance(policy, task, c) for c in contexts]
    rows = []
    for k in k_list:
        sums = dict.fromkeys(METRICS, 0.0)
        for inst in insts:
            sums["recall"] += recall_at_k(inst, k)
            sums["ndcg"] += ndcg_at_k(inst, k)
            if 2 <= k <= inst.n_neg:
                sums["wpauc"] += wpauc(inst, window_for_k(1, inst.n_neg, k))
            else:
                sums["wpauc"] = math.nan
        for name in METRICS:
            rows.append({"metric": name, "k": k, "value": sums[name] / len(insts)})
    return rows


def metric_value(rows: list[dict], metric: str, k: int) -> float:
    for row in rows:
        if row["metric"] == metric and row["k"] == k:
            return row["value"]
    raise KeyError((metric, k))


def train(task: SyntheticTask, cfg: TrainConfig, policy: TabularPolicy | None = None,
          k_list=(1, 3, 5), log_every: int = 0):
    """Run ``cfg.steps`` steps. Returns (policy, log rows).

    Log rows are dicts with ``step``, ``objective`` and, every ``log_every``
    steps and at the end, ``recall@k`` entries.
    """
    rng = np.random.default_rng(cfg.seed)
    policy = task.initial_policy() if policy is None else policy
    log = []
    for step in range(1, cfg.steps + 1):
        policy, obj = grpo_step(policy, task, cfg, rng)
        row = {"step": step, "objective": obj}
        if (log_every and step % log_every == 0) or step == cfg.steps:
            ev = evaluate(policy, task, k_list)
            for k in k_list:
                row[f"recall@{k}"] = metric_value(ev, "recall", k)
        log.append(row)
    return policy, log
