"""Mini-batch gradient flow toward the S-curve: m-OT vs m-POT vs m-UOT.

    python scripts/flow_s_curve.py --seeds 5 --steps 2000
"""
import argparse
import time

import numpy as np

from mbpot.apps import gradient_flow
from mbpot.core import SolverParams
from mbpot.datasets import flow_pair
from mbpot.minibatch import SolverKind
from mbpot.partial import PartialParams
from mbpot.unbalanced import UotParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--lr", type=float, default=0.001)
    ap.add_argument("--s-grid", default="0.8,0.9")
    ap.add_argument("--uot", action="store_true", help="also sweep m-UOT over tau in {0.1, 1, 10}, epsilon 0.1")
    args = ap.parse_args()

    losses = {"m-OT": [SolverKind("ot")],
              "m-POT": [SolverKind("pot", pot=PartialParams(float(s))) for s in args.s_grid.split(",")]}
    if args.uot:
        losses["m-UOT"] = [SolverKind("uot", uot=UotParams(t, SolverParams(0.1))) for t in (0.1, 1.0, 10.0)]
    finals = {name: [] for name in losses}
    for seed in range(args.seeds):
        init, tgt = flow_pair(args.n, seed)
        line = [f"seed {seed}"]
        for name, kinds in losses.items():
            t0 = time.perf_counter()
            best = min(gradient_flow(init, tgt, kind, args.k, args.m, args.lr, args.steps, seed, args.steps).final_w2
                       for kind in kinds)
            finals[name].append(best)
            line.append(f"{name} {best:.4f} ({time.perf_counter() - t0:.0f}s)")
        print("  ".join(line), flush=True)
    for name, vals in finals.items():
        print(f"{name}: median final W2 {np.median(vals):.4f}")


if __name__ == "__main__":
    main()
