"""Readers and writers for the on-disk formats used by the command line."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .decode import ItemTrie, TabularPolicy
from .grpo import ToyEnvironment
from .ranking import RankedInstance, TiePolicy

METRIC_FIELDS = ("instance_id", "metric", "alpha", "d", "k", "value")


def read_scores(path, tie_policy: TiePolicy = TiePolicy.ERROR) -> Iterator[tuple[str, RankedInstance]]:
    """Yield ``(instance_id, instance)`` per non-blank JSONL line.

    Lines hold ``{"positives": [...], "negatives": [...]}`` and an optional ``id``;
    the id defaults to the 0-based line index among non-blank lines.
    """
    with open(path) as fh:
        n = 0
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                inst = RankedInstance(obj["positives"], obj["negatives"], tie_policy=tie_policy)
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad score record ({exc})") from exc
            yield str(obj.get("id", n)), inst
            n += 1


def write_scores(path, instances: Iterable[tuple[str, RankedInstance]]) -> None:
    with open(path, "w") as fh:
        for iid, inst in instances:
            fh.write(json.dumps({"id": iid, "positives": inst.positives.tolist(),
                                 "negatives": inst.negatives.tolist()}) + "\n")


def _blank(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else v


def write_csv(path, rows: Iterable[dict], fields: Iterable[str]) -> None:
    """CSV with a fixed header; None and NaN become empty cells."""
    fields = list(fields)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="raise")
        w.writeheader()
        for row in rows:
            w.writerow({f: _blank(row.get(f)) for f in fields})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_metrics(path, rows: Iterable[dict]) -> None:
    write_csv(path, rows, METRIC_FIELDS)


def read_vocab(path) -> ItemTrie:
    """Item vocabulary: JSON object mapping item id to its token list."""
    with open(path) as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: vocabulary must be a JSON object")
    return ItemTrie(obj)


def write_vocab(path, trie: ItemTrie) -> None:
    with open(path, "w") as fh:
        json.dump(trie.to_json(), fh, indent=1)


def policy_to_json(policy: TabularPolicy) -> dict:
    """Rows carry ``logits`` when finite, otherwise ``probs`` (zero entries)."""
    tables = []
    for context, prefix in policy.keys():
        z = policy.logits(context, prefix)
        row = {"context": context, "prefix": list(prefix)}
        if np.all(np.isfinite(z)):
            row["logits"] = z.tolist()
        else:
            row["probs"] = policy.probs(context, prefix).tolist()
        tables.append(row)
    return {"vocab": list(policy.vocab), "tables": tables}


def policy_from_json(obj: dict) -> TabularPolicy:
    vocab = obj["vocab"]
    rows = {}
    for row in obj["tables"]:
        key = (row["context"], tuple(row["prefix"]))
        if "logits" in row:
            rows[key] = np.asarray(row["logits"], dtype=np.float64)
        else:
            p = np.asarray(row["probs"], dtype=np.float64)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError(f"row {key!r} is not a probability vector")
            with np.errstate(divide="ignore"):
                rows[key] = np.log(p)
    return TabularPolicy(vocab, rows)


def write_policy(path, policy: TabularPolicy) -> None:
    with open(path, "w") as fh:
        json.dump(policy_to_json(policy), fh)


def read_policy(path) -> TabularPolicy:
    with open(path) as fh:
        return policy_from_json(json.load(fh))


def read_environment(path) -> ToyEnvironment:
    with open(path) as fh:
        return ToyEnvironment.from_json(json.load(fh))


def write_environment(path, env: ToyEnvironment) -> None:
    with open(path, "w") as fh:
        json.dump(env.to_json(), fh)


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def read_config(path) -> dict:
    p = Path(path)
    with open(p) as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return obj
