import numpy as np

from winpauc.verify import SUITES, ClaimResult, check_beam_topk, check_ranking_reward, run_claim, verify_all


def test_report_has_one_row_per_claim():
    names = ["ranking-reward", "wpauc"]
    report = verify_all(0, names)
    assert [r.name for r in report] == names
    assert all(isinstance(r, ClaimResult) for r in report)


def test_same_seed_same_report():
    assert verify_all(3, ["ranking-reward", "beam-topk"]) == verify_all(3, ["ranking-reward", "beam-topk"])


def test_claims_are_independent_of_selection():
    assert run_claim("ranking-reward", 1) == verify_all(1, ["wpauc", "ranking-reward"])[1]


def test_every_claim_is_registered():
    assert {"wpauc", "pairwise-form", "beam-topk", "single-positive", "recall-bound", "ranking-reward", "softtopk", "tawin",
            "grad", "sampling"} == set(SUITES)


def test_small_suites_pass():
    rng = np.random.default_rng(0)
    assert check_ranking_reward(rng, trials=50).passed
    assert check_beam_topk(rng, trials=10).passed


def test_line_format():
    r = ClaimResult("x", False, 3, 1, 0.5, "detail")
    assert r.line().startswith("FAIL x: checked=3 failures=1")
