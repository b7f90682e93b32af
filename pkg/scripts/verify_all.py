#!/usr/bin/env python3
"""Run every structure-constant verification suite and print a summary table.

Exits nonzero if any suite fails, so this doubles as a quick health check.
"""

import argparse
import sys

from ksunfold import SUITES, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--verbose", action="store_true",
                    help="print every table entry, not just suite summaries")
    args = ap.parse_args()

    ok = True
    print(f"{'suite':24s} {'entries':>7} {'worst residual':>15}  status")
    print("-" * 58)
    for name in SUITES:
        rep = run_suite(name, samples=args.samples, seed=args.seed)
        worst = max(e["max_residual"] for e in rep["entries"])
        status = "pass" if rep["pass"] else "FAIL"
        ok = ok and rep["pass"]
        print(f"{name:24s} {len(rep['entries']):7d} {worst:15.3e}  {status}")
        if args.verbose:
            for e in rep["entries"]:
                mark = " " if e["pass"] else "!"
                print(f"  {mark} {e['pair']:28s} {e['max_residual']:.3e}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
