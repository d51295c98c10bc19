"""Run every randomized verification suite and print one line per claim."""
import argparse
import sys
import time

from winpauc.verify import SUITES, run_claim


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    ok = True
    for name in SUITES:
        t0 = time.perf_counter()
        res = run_claim(name, args.seed)
        print(f"{res.line()} [{time.perf_counter() - t0:.1f}s]")
        ok &= res.passed
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
