"""Grid-refinement study for the PDE game value.

Solves the upwind scheme at a chain of doubled resolutions with CFL-tight
time steps and reports the origin values plus successive differences (the
empirical stand-in for the O(sqrt(dt)) error constant).
"""

import argparse
import json
import time

from asht.instances import load_instance
from asht.pde import default_grid_spec, solve_r_go_inf


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("instance", help="instance JSON file")
    ap.add_argument("--nx", type=int, nargs="+", default=[24, 48, 96],
                    help="spatial resolutions to chain")
    args = ap.parse_args()

    inst = load_instance(args.instance)
    rows = []
    for nx in args.nx:
        spec = default_grid_spec(inst, N_x=nx, cfl_fraction=1.0)
        t0 = time.perf_counter()
        value, _ = solve_r_go_inf(inst, spec, refine=False)
        rows.append({
            "N_x": spec.N_x, "N_t": spec.N_t, "value": value,
            "runtime_s": round(time.perf_counter() - t0, 3),
        })
    for prev, cur in zip(rows, rows[1:]):
        cur["refinement_estimate"] = abs(cur["value"] - prev["value"])
    print(json.dumps({"instance": args.instance, "chain": rows}, indent=2))


if __name__ == "__main__":
    main()
