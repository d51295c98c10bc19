"""Constrained generation over an item vocabulary.

Items are serialized to token sequences that always end with ``EOS``. A prefix
trie gives the admissible next tokens; a tabular policy gives raw next-token
probabilities over the full base vocabulary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InvalidPrefixError,
    NoCompletionError,
    UnknownItemError,
    ZeroMassError,
)

EOS = "<eos>"

Prefix = tuple[str, ...]


class ItemTrie:
    """Prefix trie over item serializations.

    ``items`` maps item id -> token list. ``EOS`` is appended when missing and may
    not appear anywhere else, so no serialization is a prefix of another.
    """

    def __init__(self, items: Mapping[Hashable, Sequence[str]]):
        if not items:
            raise ValueError("trie needs at least one item")
        self._seq: dict[Hashable, Prefix] = {}
        self._item_of: dict[Prefix, Hashable] = {}
        children: dict[Prefix, set[str]] = {}
        for item, tokens in items.items():
            seq = tuple(str(t) for t in tokens)
            if not seq or seq[-1] != EOS:
                seq = seq + (EOS,)
            if EOS in seq[:-1]:
                raise ValueError(f"item {item!r}: eos inside serialization")
            if seq in self._item_of:
                raise ValueError(
                    f"items {self._item_of[seq]!r} and {item!r} share a serialization"
                )
            self._seq[item] = seq
            self._item_of[seq] = item
            for j in range(len(seq)):
                children.setdefault(seq[:j], set()).add(seq[j])
        self._children = {p: tuple(sorted(ts)) for p, ts in children.items()}

    @property
    def items(self) -> list[Hashable]:
        return list(self._seq)

    def __len__(self) -> int:
        return len(self._seq)

    def serialize(self, item) -> Prefix:
        try:
            return self._seq[item]
        except KeyError:
            raise UnknownItemError(item) from None

    def item_of(self, seq: Sequence[str]):
        """phi: exact-match map from a complete sequence to its item (None if invalid)."""
        return self._item_of.get(tuple(seq))

    def admissible(self, prefix: Sequence[str] = ()) -> tuple[str, ...]:
        try:
            return self._children[tuple(prefix)]
        except KeyError:
            raise InvalidPrefixError(f"prefix {tuple(prefix)!r} leaves the trie") from None

    def prefixes(self) -> list[Prefix]:
        """Every non-terminal prefix (the states a decoder can be in)."""
        return list(self._children)

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(sorted({t for ts in self._children.values() for t in ts}))

    @property
    def max_length(self) -> int:
        return max(len(s) for s in self._seq.values())

    def to_json(self) -> dict:
        return {str(item): list(seq) for item, seq in self._seq.items()}


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


class TabularPolicy:
    """Next-token distributions ``pi(y | prefix, context)`` over a fixed vocabulary.

    Parameterized by logits per ``(context, prefix)``; keys without an entry get
    uniform logits. Immutable after construction.
    """

    def __init__(self, vocab: Sequence[str], logits: Mapping[tuple, np.ndarray] | None = None):
        self.vocab: tuple[str, ...] = tuple(vocab)
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("duplicate tokens in vocabulary")
        self.index = {t: i for i, t in enumerate(self.vocab)}
        self._logits: dict[tuple, np.ndarray] = {}
        self._probs: dict[tuple, np.ndarray] = {}
        self._logprobs: dict[tuple, np.ndarray] = {}
        for (context, prefix), z in (logits or {}).items():
            z = np.array(z, dtype=np.float64)
            if z.shape != (len(self.vocab),):
                raise ValueError(f"logit row for {(context, prefix)!r} has shape {z.shape}")
            key = (context, tuple(prefix))
            z.flags.writeable = False
            p = _softmax(z)
            p.flags.writeable = False
            with np.errstate(divide="ignore"):
                lp = np.log(p)
            lp.flags.writeable = False
            self._logits[key], self._probs[key], self._logprobs[key] = z, p, lp
        n = len(self.vocab)
        self._uniform = np.full(n, 1.0 / n)
        self._uniform_log = np.full(n, -math.log(n))
        self._zero_logits = np.zeros(n)
        for arr in (self._uniform, self._uniform_log, self._zero_logits):
            arr.flags.writeable = False

    @classmethod
    def from_probs(cls, vocab: Sequence[str], table: Mapping[tuple, Sequence[float]]) -> "TabularPolicy":
        rows = {}
        for key, p in table.items():
            p = np.asarray(p, dtype=np.float64)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError(f"row {key!r} is not a probability vector")
            with np.errstate(divide="ignore"):
                rows[key] = np.log(p)
        return cls(vocab, rows)

    def probs(self, context, prefix: Sequence[str]) -> np.ndarray:
        return self._probs.get((context, tuple(prefix)), self._uniform)

    def logprobs(self, context, prefix: Sequence[str]) -> np.ndarray:
        return self._logprobs.get((context, tuple(prefix)), self._uniform_log)

    def logits(self, context, prefix: Sequence[str]) -> np.ndarray:
        return self._logits.get((context, tuple(prefix)), self._zero_logits)

    def keys(self) -> list[tuple]:
        return list(self._logits)

    def with_logits(self, updates: Mapping[tuple, np.ndarray]) -> "TabularPolicy":
        """Copy with some logit rows replaced; untouched rows are shared."""
        new = TabularPolicy(self.vocab, updates)
        for src in ("_logits", "_probs", "_logprobs"):
            merged = dict(getattr(self, src))
            merged.update(getattr(new, src))
            setattr(new, src, merged)
        return new

    def prob(self, context, prefix: Sequence[str], token: str) -> float:
        return float(self.probs(context, prefix)[self.index[token]])


def masked_distribution(policy: TabularPolicy, trie: ItemTrie, prefix: Sequence[str],
                        context) -> tuple[tuple[str, ...], np.ndarray]:
    """Policy restricted to admissible tokens and renormalized."""
    tokens = trie.admissible(prefix)
    raw = policy.probs(context, prefix)
    p = np.array([raw[policy.index[t]] for t in tokens])
    total = p.sum()
    if not total > 0:
        raise ZeroMassError(f"no probability mass on admissible tokens after {tuple(prefix)!r}")
    return tokens, p / total


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class Sample:
    tokens: Prefix
    item: Hashable
    prob: float


def constrained_sample(policy: TabularPolicy, trie: ItemTrie, context, rng=None) -> Sample:
    """Draw one item token by token from the masked distribution.

    ``rng`` is a seed or a ``numpy.random.Generator``. The returned probability is
    the product of the masked conditionals along the path.
    """
    return constrained_samples(policy, trie, context, 1, rng)[0]


def constrained_samples(policy: TabularPolicy, trie: ItemTrie, context, n: int,
                        rng=None) -> list[Sample]:
    rng = _as_rng(rng)
    cache: dict[Prefix, tuple[tuple[str, ...], np.ndarray]] = {}
    out = []
    for _ in range(n):
        prefix: Prefix = ()
        prob = 1.0
        while True:
            if prefix not in cache:
                cache[prefix] = masked_distribution(policy, trie, prefix, context)
            tokens, p = cache[prefix]
            j = int(rng.choice(len(tokens), p=p)) if len(tokens) > 1 else 0
            prob *= p[j]
            prefix = prefix + (tokens[j],)
            if tokens[j] == EOS:
                break
        out.append(Sample(prefix, trie.item_of(prefix), float(prob)))
    return out


def sequence_probability(policy: TabularPolicy, trie: ItemTrie, context,
                         seq: Sequence[str], masked: bool = True) -> float:
    """Probability of a full sequence under the masked (or raw) policy."""
    logp = 0.0
    for j in range(len(seq)):
        prefix = tuple(seq[:j])
        if masked:
            tokens, p = masked_distribution(policy, trie, prefix, context)
            if seq[j] not in tokens:
                return 0.0
            logp += math.log(p[tokens.index(seq[j])])
        else:
            logp += float(policy.logprobs(context, prefix)[policy.index[seq[j]]])
    return math.exp(logp)


def item_log_score(policy: TabularPolicy, trie: ItemTrie, item, context) -> float:
    """Sum of raw token log-probabilities along the item's serialization."""
    seq = trie.serialize(item)
    return float(sum(policy.logprobs(context, seq[:j])[policy.index[seq[j]]]
                     for j in range(len(seq))))


def item_score(policy: TabularPolicy, trie: ItemTrie, item, context) -> float:
    return math.exp(item_log_score(policy, trie, item, context))


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int
    return_size: int | None = None
    max_length: int = 64

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.return_size is None:
            object.__setattr__(self, "return_size", self.beam_width)
        if not 1 <= self.return_size <= self.beam_width:
            raise ValueError("return_size must lie in [1, beam_width]")
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")


@dataclass(frozen=True)
class Hypothesis:
    tokens: Prefix
    item: Hashable
    score: float  # cumulative raw log-probability


def beam_search(policy: TabularPolicy, trie: ItemTrie, context, cfg: BeamConfig) -> list[Hypothesis]:
    """Constrained beam search scored by raw (unmasked) log-probabilities.

    Completed hypotheses leave the active beam. Decoding stops at ``max_length``,
    when no active prefix remains, or once ``beam_width`` hypotheses are finished
    and no active prefix can still beat the ``beam_width``-th best of them.
    """
    B = cfg.beam_width
    beam: list[tuple[Prefix, float]] = [((), 0.0)]
    finished: list[Hypothesis] = []
    for _ in range(cfg.max_length):
        candidates = []
        for prefix, score in beam:
            logp = policy.logprobs(context, prefix)
            for tok in trie.admissible(prefix):
                candidates.append((prefix + (tok,), score + float(logp[policy.index[tok]])))
        # stable sort keeps insertion order (beam order, then lexicographic token) on ties
        candidates.sort(key=lambda c: -c[1])
        beam = []
        for seq, score in candidates[:B]:
            if seq[-1] == EOS:
                item = trie.item_of(seq)
                if item is not None:
                    finished.append(Hypothesis(seq, item, score))
                continue
            beam.append((seq, score))
        if not beam:
            break
        if len(finished) >= B:
            kth = sorted((h.score for h in finished), reverse=True)[B - 1]
            if max(s for _, s in beam) < kth:
                break
    if not finished:
        raise NoCompletionError(f"no hypothesis completed within {cfg.max_length} steps")
    finished.sort(key=lambda h: -h.score)
    return finished[: cfg.return_size]


def enumerate_items(policy: TabularPolicy, trie: ItemTrie, context) -> list[tuple[Hashable, float]]:
    """All items with their raw scores, sorted by descending score (stable on trie order)."""
    scored = [(item, item_log_score(policy, trie, item, context)) for item in trie.items]
    scored.sort(key=lambda t: -t[1])
    return [(item, math.exp(s)) for item, s in scored]


def random_trie(rng, n_items: int, branching: int = 4, depth: int = 3) -> ItemTrie:
    """Random trie of ``n_items`` distinct paths with up to ``depth`` content tokens."""
    rng = _as_rng(rng)
    alphabet = [chr(ord("a") + i) for i in range(branching)]
    capacity = sum(branching ** L for L in range(1, depth + 1))
    if n_items > capacity:
        raise ValueError(f"cannot place {n_items} items with branching={branching}, depth={depth}")
    seqs: set[Prefix] = set()
    while len(seqs) < n_items:
        L = int(rng.integers(1, depth + 1))
        seqs.add(tuple(alphabet[int(i)] for i in rng.integers(0, branching, size=L)))
    return ItemTrie({f"item{i:03d}": list(s) for i, s in enumerate(sorted(seqs))})


def random_policy(rng, trie: ItemTrie, contexts: Iterable = (0,), scale: float = 1.0,
                  vocab: Sequence[str] | None = None) -> TabularPolicy:
    """Gaussian logits for every (context, trie prefix) over ``vocab``."""
    rng = _as_rng(rng)
    vocab = tuple(vocab) if vocab is not None else trie.tokens
    rows = {}
    for c in contexts:
        for prefix in trie.prefixes():
            rows[(c, prefix)] = rng.normal(0.0, scale, size=len(vocab))
    return TabularPolicy(vocab, rows)
