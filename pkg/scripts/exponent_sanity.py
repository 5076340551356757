"""Monte-Carlo exponent recovery on the two-hypothesis single-arm instance.

The analytic benchmark is the Chernoff information of Bern(0.9) vs
Bern(0.1), -log(0.6). Defaults use short horizons where error counts stay
in the hundreds; at long horizons the error probability drops below 1/n
and the estimator refuses, which this driver reports rather than hides.
"""

import argparse
import json
import math
import time

import numpy as np

from asht.errors import InsufficientDataError
from asht.instances import Allocation, BanditClass
from asht.simulate import estimate_error_exponent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizons", type=int, nargs="+", default=[8, 12, 16, 20, 24])
    ap.add_argument("--trials", type=int, default=40_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inst = BanditClass(np.array([[[0.9, 0.1]], [[0.1, 0.9]]]))
    analytic = -math.log(2.0 * math.sqrt(0.9 * 0.1))
    out = {
        "horizons": args.horizons,
        "trials": args.trials,
        "analytic_exponent": analytic,
    }
    t0 = time.perf_counter()
    try:
        fit = estimate_error_exponent(
            inst, ("static", Allocation(np.array([1.0]))),
            T_values=args.horizons, n_trials=args.trials, seed=args.seed,
        )
    except InsufficientDataError as err:
        out["refused"] = str(err)
    else:
        out["slope"] = fit["slope"]
        out["stderr"] = fit["stderr"]
        out["relative_error"] = abs(fit["slope"] - analytic) / analytic
        out["dropped_T"] = fit["dropped_T"]
    out["runtime_s"] = round(time.perf_counter() - t0, 3)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
