"""Compute the full exponent ladder for one instance and print it as JSON.

Covers the closed-form and optimization bounds by default; the PDE value
and the approachability rate are switched on by flags because they cost
minutes at fine grids.
"""

import argparse
import json
import time

from asht.approachability import r_approach
from asht.bounds import r_go_1, r_hopf, r_static, r_ub
from asht.instances import load_instance
from asht.pde import default_grid_spec, solve_r_go_inf


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("instance", help="instance JSON file")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pde-nx", type=int, default=0,
                    help="run the PDE at this N_x (0 skips it)")
    ap.add_argument("--approach", action="store_true",
                    help="also compute the approachability rate")
    args = ap.parse_args()

    inst = load_instance(args.instance)
    out = {"instance": args.instance, "m": inst.m, "K": inst.n_arms}
    t0 = time.perf_counter()
    out["r_static"], _ = r_static(inst, seed=args.seed)
    out["r_ub"] = r_ub(inst)
    out["r_go_1"], meta = r_go_1(inst, seed=args.seed)
    out["r_go_1_evals"] = meta.n_evaluations
    out["r_hopf"], _ = r_hopf(inst, seed=args.seed)
    if args.pde_nx:
        spec = default_grid_spec(inst, N_x=args.pde_nx, cfl_fraction=1.0)
        value, est = solve_r_go_inf(inst, spec)
        out["r_go_inf"] = value
        out["r_go_inf_refinement"] = est
        out["pde_grid"] = {"N_x": spec.N_x, "N_t": spec.N_t}
    if args.approach:
        out["r_approach"], _ = r_approach(inst, seed=args.seed)
    out["runtime_s"] = round(time.perf_counter() - t0, 3)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
