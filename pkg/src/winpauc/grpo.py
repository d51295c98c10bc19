"""GRPO rewards, advantages and the clipped surrogate, plus exact checks of
its pairwise (AUC-style) form on small enumerable environments."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable

import numpy as np

from .decode import (
    BeamConfig,
    ItemTrie,
    TabularPolicy,
    beam_search,
    enumerate_items,
    masked_distribution,
    random_trie,
)
from .errors import (
    DegenerateGroupError,
    MultiplePositivesError,
    NoPositiveError,
)


class AdvantageMode(str, enum.Enum):
    EMPIRICAL = "empirical"
    POPULATION = "population"


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = 0.2
    std_floor: float = 1e-8
    advantage_mode: AdvantageMode = AdvantageMode.EMPIRICAL

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.std_floor < 0:
            raise ValueError("std_floor must be non-negative")
        object.__setattr__(self, "advantage_mode", AdvantageMode(self.advantage_mode))


@dataclass
class RolloutGroup:
    """G rollouts for one prompt.

    ``token_ratios[m]`` holds pi_theta / pi_old for every token of rollout m.
    """

    rewards: np.ndarray
    token_ratios: list[np.ndarray]
    scores_old: np.ndarray
    items: list = field(default_factory=list)
    sequences: list = field(default_factory=list)

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=np.float64).reshape(-1)
        self.token_ratios = [np.asarray(r, dtype=np.float64).reshape(-1) for r in self.token_ratios]
        self.scores_old = np.asarray(self.scores_old, dtype=np.float64).reshape(-1)
        G = self.rewards.size
        if len(self.token_ratios) != G or self.scores_old.size != G:
            raise ValueError("rewards, token_ratios and scores_old must have one entry per rollout")
        if not np.all((self.rewards == 0) | (self.rewards == 1)):
            raise ValueError("rewards must be 0 or 1")
        for r in self.token_ratios:
            if r.size < 1 or np.any(r <= 0):
                raise ValueError("every rollout needs >= 1 token and positive ratios")

    @property
    def G(self) -> int:
        return int(self.rewards.size)

    @property
    def seq_lengths(self) -> list[int]:
        return [r.size for r in self.token_ratios]


def rule_reward(generated_item, target_item) -> int:
    """Exact-match indicator; strings compare byte for byte, no normalization."""
    return int(generated_item == target_item)


def group_advantages(rewards, cfg: GrpoConfig = GrpoConfig()) -> np.ndarray:
    r = np.asarray(rewards, dtype=np.float64).reshape(-1)
    G = r.size
    if cfg.advantage_mode is AdvantageMode.EMPIRICAL:
        if G < 2:
            raise ValueError("empirical advantages need at least two rollouts")
        mean = r.mean()
        std = math.sqrt(float(np.mean((r - mean) ** 2)))
        if std == 0 and cfg.std_floor == 0:
            raise DegenerateGroupError("all rewards equal")
        if std < cfg.std_floor:
            return np.zeros(G)
        return (r - mean) / std
    p = float(r.mean())
    if p in (0.0, 1.0):
        if cfg.std_floor == 0:
            raise DegenerateGroupError("success rate is 0 or 1")
        return np.zeros(G)
    return np.where(r == 1, math.sqrt((1 - p) / p), -math.sqrt(p / (1 - p)))


def clipped_term(ratios, advantage: float, epsilon: float) -> np.ndarray:
    ratios = np.asarray(ratios, dtype=np.float64)
    return np.minimum(ratios * advantage, np.clip(ratios, 1 - epsilon, 1 + epsilon) * advantage)


def clipped_surrogate(group: RolloutGroup, advantages, cfg: GrpoConfig = GrpoConfig(),
                      weights=None) -> float:
    """(1/G) sum_m w_m mean_j min(rho A, clip(rho) A); no KL term."""
    adv = np.asarray(advantages, dtype=np.float64).reshape(-1)
    if adv.size != group.G:
        raise ValueError("one advantage per rollout required")
    w = np.ones(group.G) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    total = 0.0
    for m in range(group.G):
        total += w[m] * float(clipped_term(group.token_ratios[m], adv[m], cfg.epsilon).mean())
    return total / group.G


def s_plus_minus(ratios, epsilon: float, sign: int) -> float:
    """Token mean of min(rho, 1+eps) for sign=+1, of max(rho, 1-eps) for sign=-1."""
    ratios = np.asarray(ratios, dtype=np.float64)
    if sign > 0:
        return float(np.minimum(ratios, 1 + epsilon).mean())
    return float(np.maximum(ratios, 1 - epsilon).mean())


@dataclass
class ToyEnvironment:
    """Fully enumerable rollout space for one prompt.

    Per sequence: its tokens, per-token pi_old and pi_theta probabilities, and
    a binary reward. pi_old(Y) is the product of the pi_old token probabilities.
    """

    sequences: list[tuple]
    old_token_probs: list[np.ndarray]
    new_token_probs: list[np.ndarray]
    rewards: np.ndarray

    def __post_init__(self):
        self.old_token_probs = [np.asarray(p, dtype=np.float64) for p in self.old_token_probs]
        self.new_token_probs = [np.asarray(p, dtype=np.float64) for p in self.new_token_probs]
        self.rewards = np.asarray(self.rewards, dtype=np.float64).reshape(-1)
        n = len(self.sequences)
        if not (len(self.old_token_probs) == len(self.new_token_probs) == self.rewards.size == n):
            raise ValueError("inconsistent environment lengths")
        for a, b in zip(self.old_token_probs, self.new_token_probs):
            if a.shape != b.shape or a.size < 1:
                raise ValueError("old/new token tables must align per sequence")
            if np.any(a <= 0) or np.any(b <= 0):
                raise ValueError("token probabilities must be positive")
        total = self.seq_probs_old.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pi_old sequence probabilities sum to {total}, not 1")

    @property
    def seq_probs_old(self) -> np.ndarray:
        return np.array([float(np.prod(p)) for p in self.old_token_probs])

    def ratios(self, idx: int) -> np.ndarray:
        return self.new_token_probs[idx] / self.old_token_probs[idx]

    @property
    def success_prob(self) -> float:
        return float(np.dot(self.seq_probs_old, self.rewards))

    def to_json(self) -> dict:
        return {
            "sequences": [list(s) for s in self.sequences],
            "old_token_probs": [p.tolist() for p in self.old_token_probs],
            "new_token_probs": [p.tolist() for p in self.new_token_probs],
            "rewards": self.rewards.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ToyEnvironment":
        return cls(
            sequences=[tuple(s) for s in obj["sequences"]],
            old_token_probs=obj["old_token_probs"],
            new_token_probs=obj["new_token_probs"],
            rewards=obj["rewards"],
        )

    @classmethod
    def from_policies(cls, trie: ItemTrie, old: TabularPolicy, new: TabularPolicy,
                      context, target) -> "ToyEnvironment":
        """Sequence space of a trie under constrained sampling from two policies."""
        seqs, olds, news, rewards = [], [], [], []
        for item in trie.items:
            seq = trie.serialize(item)
            po, pn = [], []
            for j, tok in enumerate(seq):
                toks, p_old = masked_distribution(old, trie, seq[:j], context)
                _, p_new = masked_distribution(new, trie, seq[:j], context)
                k = toks.index(tok)
                po.append(p_old[k])
                pn.append(p_new[k])
            seqs.append(seq)
            olds.append(po)
            news.append(pn)
            rewards.append(rule_reward(item, target))
        return cls(seqs, olds, news, rewards)


def surrogate_expectation(env: ToyEnvironment, epsilon: float) -> float:
    """E_{Y ~ pi_old}[ A(Y) -weighted token-mean clipped term ] with population advantages."""
    p = env.success_prob
    if p <= 0.0 or p >= 1.0:
        return 0.0
    a_pos, a_neg = math.sqrt((1 - p) / p), -math.sqrt(p / (1 - p))
    probs = env.seq_probs_old
    total = 0.0
    for i in range(len(env.sequences)):
        a = a_pos if env.rewards[i] == 1 else a_neg
        total += probs[i] * float(clipped_term(env.ratios(i), a, epsilon).mean())
    return total


def pairwise_form(env: ToyEnvironment, epsilon: float) -> float:
    """sqrt(p(1-p)) * (E_{Y+}[s+] - E_{Y-}[s-]) by exact enumeration."""
    p = env.success_prob
    if p <= 0.0 or p >= 1.0:
        return 0.0
    probs = env.seq_probs_old
    pos = env.rewards == 1
    e_plus = sum(probs[i] * s_plus_minus(env.ratios(i), epsilon, +1)
                 for i in np.flatnonzero(pos)) / probs[pos].sum()
    e_minus = sum(probs[i] * s_plus_minus(env.ratios(i), epsilon, -1)
                  for i in np.flatnonzero(~pos)) / probs[~pos].sum()
    return math.sqrt(p * (1 - p)) * (e_plus - e_minus)


def random_environment(rng, max_sequences: int = 64, spread: float = 0.5) -> ToyEnvironment:
    """Random trie-backed environment with 0 < p < 1.

    pi_theta logits are pi_old logits plus Gaussian noise of scale ``spread``
    so ratios land on both sides of both clip boundaries.
    """
    rng = np.random.default_rng(rng)
    while True:
        n_items = int(rng.integers(2, max_sequences + 1))
        trie = random_trie(rng, n_items, branching=4, depth=3)
        old = _random_trie_policy(rng, trie, None, 1.0)
        new = _random_trie_policy(rng, trie, old, spread)
        items = trie.items
        n_pos = int(rng.integers(1, len(items)))
        targets = set(rng.choice(len(items), size=n_pos, replace=False).tolist())
        env = ToyEnvironment.from_policies(trie, old, new, 0, None)
        env.rewards = np.array([1.0 if i in targets else 0.0 for i in range(len(items))])
        if 0 < env.success_prob < 1:
            return env


def _random_trie_policy(rng, trie: ItemTrie, base: TabularPolicy | None, scale: float) -> TabularPolicy:
    vocab = trie.tokens
    rows = {}
    for prefix in trie.prefixes():
        noise = rng.normal(0.0, scale, size=len(vocab))
        rows[(0, prefix)] = noise if base is None else base.logits(0, prefix) + noise
    return TabularPolicy(vocab, rows)


def _check_one_positive(rewards) -> int:
    r = [int(v) for v in rewards]
    ones = [i for i, v in enumerate(r) if v == 1]
    if not ones:
        raise NoPositiveError("group has no positive rollout")
    if len(ones) > 1 or any(v not in (0, 1) for v in r):
        raise MultiplePositivesError("group must contain exactly one positive")
    return ones[0]


def ranking_reward_weights(rewards, rank_rewards, exact: bool = False):
    """Sequence weights that turn rule-only advantages into rank-shaped ones.

    Shaped rewards are ``rewards + rank_rewards`` with a zero rank reward at the
    positive; advantages are reward minus group mean. Computed in exact rational
    arithmetic; ``exact=True`` returns the ``Fraction`` values, otherwise floats.
    """
    t = _check_one_positive(rewards)
    rank = [Fraction(float(v)) for v in rank_rewards]
    G = len(rank)
    if len(list(rewards)) != G:
        raise ValueError("rewards and rank_rewards differ in length")
    if rank[t] != 0:
        raise ValueError("rank reward at the positive must be zero")
    r_bar = (1 + sum(rank)) / G
    inv_g = Fraction(1, G)
    omega = [(rank[k] - r_bar) / (-inv_g) for k in range(G)]
    omega[t] = (1 - r_bar) / (1 - inv_g)
    if exact:
        return omega
    return np.array([float(w) for w in omega])


def shaped_advantages(rewards, rank_rewards) -> list[Fraction]:
    r0 = [Fraction(int(v)) for v in rewards]
    shaped = [a + Fraction(float(b)) for a, b in zip(r0, rank_rewards)]
    mean = sum(shaped) / len(shaped)
    return [s - mean for s in shaped]


def rule_only_advantages(rewards) -> list[Fraction]:
    r0 = [Fraction(int(v)) for v in rewards]
    mean = sum(r0) / len(r0)
    return [s - mean for s in r0]


def beam_matches_enumeration(policy: TabularPolicy, trie: ItemTrie, context,
                             beam_width: int, k: int) -> bool:
    """True iff the top-k beam outputs equal the k highest-scoring items, in order."""
    k = min(k, len(trie))
    cfg = BeamConfig(beam_width=beam_width, return_size=min(k, beam_width),
                     max_length=trie.max_length)
    beam = [h.item for h in beam_search(policy, trie, context, cfg)]
    top = [item for item, _ in enumerate_items(policy, trie, context)[:k]]
    return beam == top


def beam_negatives_are_quantile(policy: TabularPolicy, trie: ItemTrie, context,
                                beam_width: int, k: int) -> bool:
    return beam_matches_enumeration(policy, trie, context, beam_width, k)


def beam_negative_set(policy: TabularPolicy, trie: ItemTrie, context, target,
                      beam_width: int, k: int) -> list[Hashable]:
    """Non-target items among the top-k beam outputs."""
    cfg = BeamConfig(beam_width=beam_width, return_size=min(k, beam_width),
                     max_length=trie.max_length)
    return [h.item for h in beam_search(policy, trie, context, cfg) if h.item != target]
