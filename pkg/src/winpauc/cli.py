"""Command-line entry point.

Exit codes: 0 success, 1 a verification check failed, 2 bad input or configuration.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from . import io
from .decode import BeamConfig, beam_search, constrained_samples
from .experiments import SWEEP_FIELDS, MetricsConfig, anchor_sweep, instance_metrics
from .grpo import pairwise_form, surrogate_expectation
from .ranking import TiePolicy
from .simulation import ExperimentConfig, is_unimodal_dominant, simulate_correlation
from .tawin import TAWinConfig
from .trainer import SyntheticTask, TrainConfig, evaluate, train
from .verify import SUITES, verify_all

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# alternate spellings accepted by ``verify``
CLAIM_ALIASES = {
    "lemma1": "pairwise-form",
    "lemma2": "beam-topk",
    "lemma3": "single-positive",
    "theorem1": "recall-bound",
    "prop-f": "ranking-reward",
}


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _load_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    try:
        return io.read_config(args.config)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit_csv(args, rows, fields):
    if args.out:
        io.write_csv(args.out, rows, fields)
    else:
        import csv
        w = csv.DictWriter(sys.stdout, fieldnames=list(fields))
        w.writeheader()
        for row in rows:
            w.writerow({f: io._blank(row.get(f)) for f in fields})


def cmd_metrics(args) -> int:
    try:
        cfg = MetricsConfig.from_dict(_load_config(args))
        rows = []
        for iid, inst in io.read_scores(args.scores, TiePolicy(args.tie_policy)):
            rows.extend(instance_metrics(iid, inst, cfg))
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    _emit_csv(args, rows, io.METRIC_FIELDS)
    return EXIT_OK


def cmd_simulate(args) -> int:
    obj = _load_config(args)
    for key in ("trials", "n_pos", "n_neg", "k_list"):
        val = getattr(args, key)
        if val is not None:
            obj[key] = val
    obj["seed"] = args.seed
    try:
        cfg = ExperimentConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    grids = simulate_correlation(cfg)
    rows = [row for g in grids.values() for row in g.rows()]
    if args.out:
        io.write_csv(args.out, rows, ("k", "alpha", "d", "correlation"))
    for k, g in grids.items():
        best = g.argmax()
        where = "undefined" if best is None else f"alpha={best[0]:.3f} d={best[1]:.3f} corr={best[2]:.4f}"
        print(f"K={k}: argmax {where}; unimodal={is_unimodal_dominant(g)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    claim = CLAIM_ALIASES.get(args.claim, args.claim)
    if args.env:
        if claim != "pairwise-form":
            raise ConfigError("--env applies to the pairwise-form check only")
        try:
            env = io.read_environment(args.env)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        lhs = surrogate_expectation(env, args.epsilon)
        rhs = pairwise_form(env, args.epsilon)
        dev = abs(lhs - rhs)
        ok = dev <= 1e-8
        print(f"{'PASS' if ok else 'FAIL'} pairwise-form: surrogate={lhs:.12g} pairwise={rhs:.12g} "
              f"max_deviation={dev:.3e}")
        return EXIT_OK if ok else EXIT_FAIL
    names = None if claim == "all" else [claim]
    report = verify_all(args.seed, names)
    for r in report:
        print(r.line())
    if args.out:
        io.write_jsonl(args.out, [asdict(r) for r in report])
    return EXIT_OK if all(r.passed for r in report) else EXIT_FAIL


def _resolve_context(policy, text: str):
    for context, _ in policy.keys():
        if str(context) == text:
            return context
    return text


def cmd_decode(args) -> int:
    try:
        trie = io.read_vocab(args.vocab)
        policy = io.read_policy(args.policy)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    context = _resolve_context(policy, args.context)
    rows = []
    try:
        if args.mode == "sample":
            rng = np.random.default_rng(args.seed)
            for s in constrained_samples(policy, trie, context, args.num_samples, rng):
                rows.append({"item": s.item, "tokens": list(s.tokens), "prob": s.prob})
        else:
            cfg = BeamConfig(args.beam_width, max_length=args.max_length)
            for h in beam_search(policy, trie, context, cfg):
                rows.append({"item": h.item, "tokens": list(h.tokens), "log_score": h.score})
    except ValueError as exc:  # bad beam settings, zero admissible mass, no completion
        raise ConfigError(str(exc)) from exc
    if args.out:
        io.write_jsonl(args.out, rows)
    else:
        for row in rows:
            print(json.dumps(row))
    return EXIT_OK


def _task_and_train_config(args, default_steps=None) -> tuple[SyntheticTask, TrainConfig, list[int]]:
    obj = _load_config(args)
    try:
        task = SyntheticTask(**obj.get("task", {}))
        train_obj = dict(obj.get("train", {}))
        if args.steps is not None:
            train_obj["steps"] = args.steps
        elif default_steps is not None:
            train_obj.setdefault("steps", default_steps)
        train_obj["seed"] = args.seed
        cfg = TrainConfig.from_dict(train_obj)
        k_list = [int(k) for k in (args.k_list or obj.get("k_list", (1, 3, 5)))]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return task, cfg, k_list


def cmd_train(args) -> int:
    task, cfg, k_list = _task_and_train_config(args)
    if args.tawin and cfg.tawin is None:
        cfg = TrainConfig.from_dict({**asdict(cfg), "tawin": asdict(TAWinConfig())})
    init = evaluate(task.initial_policy(), task, k_list)
    policy, log = train(task, cfg, k_list=k_list, log_every=args.log_every)
    log = [{"step": 0, "objective": None,
            **{f"recall@{k}": next(r["value"] for r in init if r["metric"] == "recall" and r["k"] == k)
               for k in k_list}}] + log
    if args.out:
        io.write_jsonl(args.out, log)
    if args.policy_out:
        io.write_policy(args.policy_out, policy)
    if args.vocab_out:
        io.write_vocab(args.vocab_out, task.trie)
    first, last = log[0], log[-1]
    for k in k_list:
        print(f"Recall@{k}: {first[f'recall@{k}']:.4f} -> {last[f'recall@{k}']:.4f}")
    return EXIT_OK


def cmd_anchor_sweep(args) -> int:
    # short runs: long ones saturate and every anchor ends at the same policy
    task, cfg, k_list = _task_and_train_config(args, default_steps=20)
    rows = anchor_sweep(task, args.anchors, k_list, cfg)
    _emit_csv(args, rows, SWEEP_FIELDS)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="winpauc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (default: stdout where applicable)")
        if config:
            sp.add_argument("--config", help="JSON config file")

    sp = sub.add_parser("metrics", help="ranking metrics for a JSONL score file")
    sp.add_argument("scores")
    sp.add_argument("--tie-policy", choices=[t.value for t in TiePolicy], default="error")
    common(sp)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("simulate-correlation", help="Monte Carlo WPAUC vs Recall@K correlation grid")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--n-pos", type=int)
    sp.add_argument("--n-neg", type=int)
    sp.add_argument("--k-list", type=_int_list)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="randomized verification suites")
    sp.add_argument("claim", nargs="?", default="all", choices=[*SUITES, *CLAIM_ALIASES, "all"])
    sp.add_argument("--env", help="environment JSON for the pairwise-form check")
    sp.add_argument("--epsilon", type=float, default=0.2)
    common(sp, config=False)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("decode", help="constrained sampling or beam search")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--context", required=True)
    sp.add_argument("--beam-width", type=int, default=4)
    sp.add_argument("--max-length", type=int, default=64)
    sp.add_argument("--num-samples", type=int, default=1)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--sample", dest="mode", action="store_const", const="sample")
    mode.add_argument("--beam", dest="mode", action="store_const", const="beam")
    sp.set_defaults(mode="beam")
    common(sp, config=False)
    sp.set_defaults(func=cmd_decode)

    for name, func, helptext in (("train", cmd_train, "train a tabular policy on the synthetic task"),
                                 ("anchor-sweep", cmd_anchor_sweep, "Recall@K as a function of the TAWin anchor")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--steps", type=int)
        sp.add_argument("--k-list", type=_int_list)
        common(sp)
        sp.set_defaults(func=func)
    train_p = sub.choices["train"]
    train_p.add_argument("--tawin", action="store_true", help="use default TAWin weights")
    train_p.add_argument("--log-every", type=int, default=0)
    train_p.add_argument("--policy-out")
    train_p.add_argument("--vocab-out")
    sub.choices["anchor-sweep"].add_argument("--anchors", type=_int_list, default=[0, 1, 2, 3, 4, 5, 6])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
