"""Randomized verification suites for the identities and bounds the package relies on.

Each suite draws its own seeded instances, checks one claim against an
independent route (brute force, enumeration, finite differences, exact
rational arithmetic) and returns a :class:`ClaimResult`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .decode import (
    ItemTrie,
    TabularPolicy,
    constrained_samples,
    item_log_score,
    random_policy,
    random_trie,
    sequence_probability,
)
from .grpo import (
    GrpoConfig,
    RolloutGroup,
    beam_matches_enumeration,
    beam_negative_set,
    pairwise_form,
    random_environment,
    ranking_reward_weights,
    rule_only_advantages,
    shaped_advantages,
    surrogate_expectation,
)
from .ranking import (
    RankedInstance,
    WindowSpec,
    opauc,
    opauc_recall_interval,
    recall_at_k,
    recall_bound_from_wpauc,
    window_for_k,
    window_negatives,
    wpauc,
    wpauc_bruteforce,
)
from .softtopk import SoftTopKConfig, hard_topk, soft_topk
from .tawin import GroupAdvantages, TAWinConfig, reweight_advantages, tawin_weights
from .trainer import Rollouts, batch_gradient, batch_objective


@dataclass(frozen=True)
class ClaimResult:
    name: str
    passed: bool
    checked: int
    failures: int
    max_deviation: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: checked={self.checked} failures={self.failures} "
                f"max_deviation={self.max_deviation:.3e} {self.detail}").rstrip()


def _result(name, checked, failures, max_dev=0.0, detail="") -> ClaimResult:
    return ClaimResult(name, failures == 0, checked, failures, float(max_dev), detail)


def random_window(rng, n_neg: int) -> WindowSpec:
    """Random window that is non-empty for ``n_neg`` negatives."""
    while True:
        alpha = float(rng.uniform(0.0, 0.95))
        d = float(rng.uniform(0.0, 1.0 - alpha))
        if d <= 0:
            continue
        w = WindowSpec(alpha, d)
        lo, hi = w.rank_bounds(n_neg)
        if hi > lo:
            return w


def check_wpauc_oracle(rng, trials: int = 1000) -> ClaimResult:
    failures = 0
    for _ in range(trials):
        n_pos = int(rng.integers(1, 21))
        n_neg = int(rng.integers(5, 501))
        scores = rng.permutation(n_pos + n_neg).astype(float)
        inst = RankedInstance(scores[:n_pos], scores[n_pos:])
        w = random_window(rng, n_neg)
        if wpauc(inst, w) != wpauc_bruteforce(inst, w):
            failures += 1
    return _result("wpauc", trials, failures, detail="wpauc == pair-counting oracle")


def check_single_positive(rng, trials: int = 10_000) -> ClaimResult:
    failures = 0
    for _ in range(trials):
        k = int(rng.integers(2, 11))
        n_neg = int(rng.integers(20, 501))
        scores = rng.permutation(1 + n_neg).astype(float)
        inst = RankedInstance(scores[:1], scores[1:])
        if wpauc(inst, window_for_k(1, n_neg, k)) != recall_at_k(inst, k):
            failures += 1
    return _result("single-positive", trials, failures,
                   detail="WPAUC((K-1)/n-, 1/n-) == Recall@K, one positive")


def check_recall_bound(rng, trials: int = 10_000) -> ClaimResult:
    """Containment of Recall@K in the WPAUC bound, and that bound sitting inside
    the interval an OPAUC observation alone allows."""
    failures = 0
    loose = 0
    for _ in range(trials):
        n_pos = int(rng.integers(1, 21))
        k = int(rng.integers(n_pos + 1, n_pos + 31))
        n_neg = int(rng.integers(k + 1, 501))
        shift = float(rng.uniform(0.0, 4.0))
        pos = rng.normal(shift, 1.0, size=n_pos)
        neg = rng.normal(0.0, 1.0, size=n_neg)
        inst = RankedInstance(pos, neg)
        w = window_for_k(n_pos, n_neg, k)
        value = wpauc(inst, w)
        bound = recall_bound_from_wpauc(value, n_pos)
        if recall_at_k(inst, k) not in bound:
            failures += 1
        wide = opauc_recall_interval(opauc(inst, k / n_neg), n_pos, k)
        if not (wide.lower <= bound.lower and bound.upper <= wide.upper):
            loose += 1
    return _result("recall-bound", trials, failures + loose,
                   detail=f"containment violations={failures}, opauc-tighter violations={loose}")


def check_pairwise_form(rng, trials: int = 500, epsilon: float = 0.2) -> ClaimResult:
    max_dev = 0.0
    failures = 0
    for _ in range(trials):
        env = random_environment(rng, max_sequences=64)
        dev = abs(surrogate_expectation(env, epsilon) - pairwise_form(env, epsilon))
        max_dev = max(max_dev, dev)
        if dev > 1e-8:
            failures += 1
    return _result("pairwise-form", trials, failures, max_dev,
                   detail="|surrogate expectation - pairwise form| <= 1e-8")


def check_beam_topk(rng, trials: int = 100) -> ClaimResult:
    """Beam search with B >= |I| returns exactly the top-k items; the non-target
    beam outputs are exactly the top-quantile negative set."""
    failures = 0
    bridge_fail = 0
    for _ in range(trials):
        n_items = int(rng.integers(2, 51))
        trie = random_trie(rng, n_items, branching=4, depth=3)
        policy = random_policy(rng, trie, scale=1.5)
        B = n_items + int(rng.integers(0, 4))
        k = int(rng.integers(1, n_items + 1))
        if not beam_matches_enumeration(policy, trie, 0, B, k):
            failures += 1
        target = trie.items[int(rng.integers(len(trie)))]
        negs = beam_negative_set(policy, trie, 0, target, B, k)
        scores = {i: item_log_score(policy, trie, i, 0) for i in trie.items}
        if negs and len(trie) > 1:
            inst = RankedInstance([scores[target]],
                                  [s for i, s in scores.items() if i != target])
            quantile = window_negatives(inst, WindowSpec(0.0, len(negs) / inst.n_neg))
            if sorted(quantile.tolist()) != sorted(scores[i] for i in negs):
                bridge_fail += 1
    return _result("beam-topk", trials, failures + bridge_fail,
                   detail=f"beam != enumeration: {failures}, beam negatives != quantile set: {bridge_fail}")


def check_ranking_reward(rng, trials: int = 1000) -> ClaimResult:
    failures = 0
    for _ in range(trials):
        G = int(rng.integers(2, 17))
        t = int(rng.integers(G))
        rewards = [1 if i == t else 0 for i in range(G)]
        rank = rng.uniform(-1.0, 1.0, size=G)
        rank[t] = 0.0
        omega = ranking_reward_weights(rewards, rank, exact=True)
        shaped = shaped_advantages(rewards, rank)
        base = rule_only_advantages(rewards)
        if any(s != w * b for s, w, b in zip(shaped, omega, base)):
            failures += 1
    return _result("ranking-reward", trials, failures,
                   detail="shaped advantages == omega * rule-only advantages (exact rationals)")


def check_softtopk(rng, trials: int = 10_000) -> ClaimResult:
    mass_fail = mono_fail = limit_fail = bracket_fail = 0
    max_mass = max_limit = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 41))
        x = rng.normal(0.0, float(rng.uniform(0.1, 5.0)), size=n)
        if rng.random() < 0.5:
            K = float(rng.integers(1, n + 1))
        else:
            K = float(rng.uniform(0.05, n))
        tau = float(np.exp(rng.uniform(np.log(1e-3), np.log(10.0))))
        sw = soft_topk(x, SoftTopKConfig(K, tau))
        dev = abs(sw.weights.sum() - K)
        max_mass = max(max_mass, dev)
        mass_fail += dev > 1e-9
        order = np.argsort(-x, kind="stable")
        mono_fail += bool(np.any(np.diff(sw.weights[order]) > 0))
        xs = x[order]
        m = sw.m_index
        hi = math.inf if m == 0 else xs[m - 1]
        lo = xs[m] if m < n else -math.inf
        tail = np.exp((xs[m:] - sw.lambda_threshold) / tau).sum() if m < n else 0.0
        if not (hi >= sw.lambda_threshold - 1e-12 and sw.lambda_threshold >= lo - 1e-12) \
                or (K < n and abs(tail - (K - m)) > 1e-9):
            bracket_fail += 1
        # sharp limit on distinct entries with integer mass
        k_int = int(rng.integers(1, n + 1))
        gaps = np.diff(np.sort(x))
        if gaps.size and gaps.min() <= 0:
            continue
        tau_sharp = (gaps.min() / 50.0) if gaps.size else 1e-3
        sharp = soft_topk(x, SoftTopKConfig(float(k_int), tau_sharp)).weights
        err = float(np.max(np.abs(sharp - hard_topk(x, k_int))))
        max_limit = max(max_limit, err)
        limit_fail += err > 1e-6
    failures = mass_fail + mono_fail + limit_fail + bracket_fail
    return _result("softtopk", trials, failures, max(max_mass, max_limit),
                   detail=(f"mass={mass_fail} monotonicity={mono_fail} limit={limit_fail} "
                           f"threshold={bracket_fail}; max mass err={max_mass:.1e}, "
                           f"max limit err={max_limit:.1e}"))


def sharp_window_ok(weights_by_rank: np.ndarray, anchor: int, window: int) -> bool:
    """Weights (in rank order, after rescale) concentrate on the ``window`` ranks
    nearest the anchor; ranks tied at the boundary share weight equally."""
    n = weights_by_rank.size
    a = min(anchor, n - 1)
    dist = np.abs(np.arange(n) - a)
    cut = np.sort(dist)[window - 1]
    inside, edge, outside = dist < cut, dist == cut, dist > cut
    full = n / window
    ok = np.all(np.abs(weights_by_rank[inside] - full) <= 1e-6 * full)
    ok &= np.all(weights_by_rank[outside] <= 1e-6)
    e = weights_by_rank[edge]
    ok &= bool(np.all(np.abs(e - e[0]) <= 1e-6 * full))
    return bool(ok)


def check_tawin(rng, trials: int = 10_000) -> ClaimResult:
    mass_fail = ident_fail = sharp_fail = sign_fail = 0
    max_mass = 0.0
    for _ in range(trials):
        G = int(rng.integers(1, 17))
        adv = rng.normal(size=G)
        scores = rng.permutation(G).astype(float)
        g = GroupAdvantages(adv, scores)
        cfg = TAWinConfig(window_mass=float(rng.uniform(0.5, 8.0)),
                          tau=float(rng.uniform(1 / 6, 1.0)),
                          anchor=int(rng.integers(0, 8)))
        w = tawin_weights(g, cfg)
        neg = adv < 0
        n_neg = int(neg.sum())
        if n_neg:
            dev = abs(w[neg].sum() - n_neg)
            max_mass = max(max_mass, dev)
            mass_fail += dev > 1e-9
        out = reweight_advantages(g, cfg)
        if np.any(out[~neg] != adv[~neg]) or np.any((out[neg] > 0)):
            sign_fail += 1
        if n_neg == 0:
            continue
        wide = TAWinConfig(window_mass=float(n_neg + rng.integers(0, 3)), tau=cfg.tau,
                           anchor=cfg.anchor)
        if np.any(reweight_advantages(g, wide) != adv):
            ident_fail += 1
        W = int(rng.integers(1, n_neg + 1))
        sharp = TAWinConfig(window_mass=float(W), tau=1e-3, anchor=cfg.anchor)
        ws = tawin_weights(g, sharp)
        neg_idx = np.flatnonzero(neg)
        by_rank = ws[neg_idx[np.argsort(-scores[neg_idx], kind="stable")]]
        sharp_fail += not sharp_window_ok(by_rank, cfg.anchor, W)
    failures = mass_fail + ident_fail + sharp_fail + sign_fail
    return _result("tawin", trials, failures, max_mass,
                   detail=(f"mass={mass_fail} identity={ident_fail} sharp-window={sharp_fail} "
                           f"sign={sign_fail}"))


def random_batch(rng, weighted: bool, epsilon: float = 0.2, spread: float = 0.3,
                 n_contexts: int = 2, group_size: int = 6):
    """Random (policy_new, rollouts) pair away from every clip kink."""
    while True:
        trie = random_trie(rng, int(rng.integers(3, 13)), branching=3, depth=3)
        contexts = list(range(n_contexts))
        old = random_policy(rng, trie, contexts)
        new = old.with_logits({key: old.logits(*key) + rng.normal(0, spread, len(old.vocab))
                               for key in old.keys()})
        batch = []
        for c in contexts:
            items = [trie.items[int(i)] for i in rng.integers(0, len(trie), size=group_size)]
            rewards = rng.integers(0, 2, size=group_size)
            if rewards.min() == rewards.max():
                rewards[0] = 1 - rewards[0]
            seqs = [trie.serialize(i) for i in items]
            old_lp = [np.array([old.logprobs(c, s[:j])[old.index[s[j]]] for j in range(len(s))])
                      for s in seqs]
            adv = (rewards - rewards.mean()) / rewards.std()
            w = rng.uniform(0.2, 2.0, size=group_size) if weighted else np.ones(group_size)
            group = RolloutGroup(rewards, [np.ones(len(s)) for s in seqs],
                                 np.exp([item_log_score(old, trie, i, c) for i in items]),
                                 items=items, sequences=seqs)
            batch.append(Rollouts(c, group, old_lp, adv, w))
        ratios = []
        for r in batch:
            for s, lp in zip(r.group.sequences, r.old_logprobs):
                new_lp = [new.logprobs(r.context, s[:j])[new.index[s[j]]] for j in range(len(s))]
                ratios.extend(np.exp(np.array(new_lp) - lp))
        ratios = np.array(ratios)
        margin = np.min(np.abs(np.concatenate([ratios - (1 - epsilon), ratios - (1 + epsilon)])))
        if margin > 1e-3:
            return new, batch


def finite_difference_gradient(policy: TabularPolicy, batch, grpo: GrpoConfig,
                               keys, h: float = 1e-6) -> dict:
    grads = {}
    for key in keys:
        base = policy.logits(*key)
        g = np.zeros(base.size)
        for v in range(base.size):
            up, dn = base.copy(), base.copy()
            up[v] += h
            dn[v] -= h
            f_up = batch_objective(policy.with_logits({key: up}), batch, grpo)
            f_dn = batch_objective(policy.with_logits({key: dn}), batch, grpo)
            g[v] = (f_up - f_dn) / (2 * h)
        grads[key] = g
    return grads


def gradient_relative_error(policy, batch, grpo: GrpoConfig) -> float:
    analytic = batch_gradient(policy, batch, grpo)
    keys = sorted({(r.context, s[:j]) for r in batch for s in r.group.sequences
                   for j in range(len(s))}, key=repr)
    fd = finite_difference_gradient(policy, batch, grpo, keys)
    zero = np.zeros(len(policy.vocab))
    a = np.concatenate([analytic.get(k, zero) for k in keys])
    b = np.concatenate([fd[k] for k in keys])
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def check_grad(rng, trials: int = 50) -> ClaimResult:
    grpo = GrpoConfig(epsilon=0.2)
    failures = 0
    max_err = 0.0
    for t in range(trials):
        policy, batch = random_batch(rng, weighted=bool(t % 2), epsilon=grpo.epsilon)
        err = gradient_relative_error(policy, batch, grpo)
        max_err = max(max_err, err)
        failures += err >= 1e-4
    return _result("grad", trials, failures, max_err,
                   detail="analytic vs central differences, rel err < 1e-4 (weighted and unweighted)")


def sampling_chi_square(policy: TabularPolicy, trie: ItemTrie, context, draws: int, rng):
    """(statistic, p-value, dof) of sampled item counts against exact masked products."""
    from scipy.stats import chi2

    items = trie.items
    expected_p = np.array([sequence_probability(policy, trie, context, trie.serialize(i))
                           for i in items])
    counts = dict.fromkeys(items, 0)
    for s in constrained_samples(policy, trie, context, draws, rng):
        counts[s.item] += 1
    observed = np.array([counts[i] for i in items], dtype=float)
    expected = expected_p * draws
    stat = float(np.sum((observed - expected) ** 2 / expected))
    dof = len(items) - 1
    return stat, float(chi2.sf(stat, dof)), dof


def check_sampling(rng, draws: int = 100_000) -> ClaimResult:
    trie = random_trie(rng, 10, branching=3, depth=3)
    policy = random_policy(rng, trie, vocab=trie.tokens + ("<unk>",))
    stat, p, dof = sampling_chi_square(policy, trie, 0, draws, rng)
    return _result("sampling", draws, int(p <= 1e-3), stat,
                   detail=f"chi2={stat:.2f} dof={dof} p={p:.4f} (pass if p > 0.001)")


SUITES: dict[str, Callable] = {
    "wpauc": check_wpauc_oracle,
    "pairwise-form": check_pairwise_form,
    "beam-topk": check_beam_topk,
    "single-positive": check_single_positive,
    "recall-bound": check_recall_bound,
    "ranking-reward": check_ranking_reward,
    "softtopk": check_softtopk,
    "tawin": check_tawin,
    "grad": check_grad,
    "sampling": check_sampling,
}


def run_claim(name: str, seed: int = 0) -> ClaimResult:
    idx = list(SUITES).index(name)
    rng = np.random.default_rng([seed, idx])
    return SUITES[name](rng)


def verify_all(seed: int = 0, names=None) -> list[ClaimResult]:
    names = list(SUITES) if names is None else list(names)
    return [run_claim(n, seed) for n in names]
