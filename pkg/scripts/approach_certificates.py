"""Pathwise certificates for the approachability strategy.

Computes the target rate, fits the terminal constant C on calibration
runs (terminal_g >= r_approach - C/B), then checks the per-step distance
recursion and the terminal bound on a disjoint set of verification runs.
"""

import argparse
import json
import time

from asht.approachability import r_approach
from asht.instances import load_instance
from asht.simulate import run_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("instance", help="instance JSON file")
    ap.add_argument("--B", type=int, default=200, help="number of batches")
    ap.add_argument("--T", type=int, default=0,
                    help="samples per run (default: equal to B)")
    ap.add_argument("--calibration-runs", type=int, default=20)
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inst = load_instance(args.instance)
    T = args.T or args.B
    t0 = time.perf_counter()
    rapp, spec = r_approach(inst, seed=args.seed)

    def run(seed, certs):
        return run_trial(inst, ("approach", spec), truth=seed % inst.m,
                         T=T, B=args.B, seed=seed, with_certificates=certs)

    cal = [run(args.seed + 10_000 + k, False)
           for k in range(args.calibration_runs)]
    C = max(0.0, max((rapp - r.terminal_g) * args.B for r in cal))
    floor = rapp - C / args.B

    n_recursion = n_terminal = 0
    min_margin = float("inf")
    for k in range(args.runs):
        rec = run(args.seed + k, True)
        n_recursion += bool(rec.certificates["recursion_ok"])
        margin = rec.terminal_g - floor
        min_margin = min(min_margin, margin)
        n_terminal += margin >= -1e-12

    print(json.dumps({
        "instance": args.instance,
        "r_approach": rapp,
        "B": args.B, "T": T,
        "C": C,
        "terminal_floor": floor,
        "runs": args.runs,
        "recursion_ok": n_recursion,
        "terminal_ok": n_terminal,
        "min_margin": min_margin,
        "runtime_s": round(time.perf_counter() - t0, 3),
    }, indent=2))


if __name__ == "__main__":
    main()
