#!/usr/bin/env python3
"""Central-difference gradient check of tiny ESIM and K-ESIM models."""
import argparse
import time

from esimrank.harness.gradcheck import tiny_gradcheck


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--tol", type=float, default=1e-6)
    args = ap.parse_args()

    worst = 0.0
    for seed in args.seeds:
        for variant in ("esim", "kesim"):
            t0 = time.perf_counter()
            err, n = tiny_gradcheck(variant, seed)
            worst = max(worst, err)
            print(f"{variant:5s} seed {seed}: {n} parameters, max rel err {err:.3e} "
                  f"({time.perf_counter() - t0:.1f}s)")
    print("PASS" if worst < args.tol else "FAIL", f"worst {worst:.3e} vs tol {args.tol:g}")
    return 0 if worst < args.tol else 1


if __name__ == "__main__":
    raise SystemExit(main())
