#!/usr/bin/env python3
"""Fit a desk-sized ESIM on 20 synthetic dialogs and watch held-out R@1.

Usage: python scripts/overfit_smoke.py --seeds 0 1 2 --workdir /tmp/overfit
"""
import argparse
import json
import tempfile
from pathlib import Path

from esimrank.harness.experiments import overfit_smoke


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--max-steps", type=int, default=2000)
    ap.add_argument("--eval-every", type=int, default=50)
    ap.add_argument("--workdir", help="where corpora are written (default: a temp dir)")
    args = ap.parse_args()

    root = Path(args.workdir or tempfile.mkdtemp(prefix="overfit-"))
    ok = True
    for seed in args.seeds:
        r = overfit_smoke(root / f"seed{seed}", seed=seed, max_steps=args.max_steps,
                          eval_every=args.eval_every, log=print)
        passed = (r.train_fit_step is not None and r.train_fit_step <= 500
                  and r.heldout_step is not None and r.seconds < 600)
        ok &= passed
        print(json.dumps({"seed": seed, "train_fit_step": r.train_fit_step, "heldout_step": r.heldout_step,
                          "best_heldout": r.best_heldout, "seconds": round(r.seconds, 1),
                          "pass": passed}))
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
