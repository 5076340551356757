"""Command-line entry point.

Subcommands: bounds, pde, goap, approach, simulate, report. Every run
writes its primary artifact plus a manifest (inputs, seeds, versions,
tolerances) sufficient to reproduce the artifact byte for byte. Numbers
are serialized with 9 significant digits.

Exit codes: 0 success, 2 validation error, 3 solver budget exhausted
(the bracket is still written), 64 unknown subcommand.
"""

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from .errors import (
    DomainError,
    InsufficientDataError,
    SolverBudgetError,
    ValidationError,
)

EX_OK = 0
EX_VALIDATION = 2
EX_BUDGET = 3
EX_USAGE = 64

COMMANDS = ("bounds", "pde", "goap", "approach", "simulate", "report")


def _fmt9(x):
    if isinstance(x, float):
        return float(f"{x:.9g}")
    if isinstance(x, dict):
        return {k: _fmt9(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_fmt9(v) for v in x]
    if isinstance(x, np.floating):
        return float(f"{float(x):.9g}")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _fmt9(x.tolist())
    return x


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_fmt9(payload), f, indent=2, sort_keys=True)
        f.write("\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import platform

    import scipy

    from . import __version__

    return {
        "asht": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_manifest(out_path, subcommand, args, tolerances, outputs):
    """Sidecar JSON recording everything needed to rerun the artifact."""
    manifest = {
        "subcommand": subcommand,
        "parameters": {
            k: v for k, v in sorted(vars(args).items()) if k != "func"
        },
        "versions": _versions(),
        "tolerances": tolerances,
        "outputs": [str(p) for p in outputs],
    }
    inst = getattr(args, "instance", None)
    if inst and os.path.exists(inst):
        manifest["instance_sha256"] = _sha256(inst)
    path = str(out_path) + ".manifest.json"
    _write_json(path, manifest)
    return path


def _resolve_threads(args):
    n = getattr(args, "threads", None)
    if n is None:
        env = os.environ.get("ASHT_THREADS")
        n = int(env) if env else None
    if n is not None:
        if n < 1:
            raise ValidationError(f"--threads must be positive, got {n}")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)
        try:
            import numba

            numba.set_num_threads(n)
        except (ImportError, ValueError):
            pass
    return n


def _load(args):
    from .instances import load_instance

    return load_instance(args.instance)


def _add_common(p, needs_instance=True):
    if needs_instance:
        p.add_argument("--instance", required=True, help="instance JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output artifact path")
    p.add_argument("--threads", type=int, default=None,
                   help="thread cap (env ASHT_THREADS as fallback)")


def cmd_bounds(args):
    from .bounds import compute_bounds_report

    instance = _load(args)
    include = tuple(s.strip() for s in args.include.split(",") if s.strip())
    out = args.out or "bounds.json"
    tolerances = {"golden_section": 1e-10, "de_tol": 1e-7, "ladder_slack": 2e-6}
    try:
        report = compute_bounds_report(
            instance, include=include, seed=args.seed, de_maxiter=args.de_maxiter
        )
    except SolverBudgetError as e:
        payload = {
            "error": str(e),
            "best": e.best,
            "bracket": list(e.bracket) if e.bracket else None,
        }
        _write_json(out, payload)
        write_manifest(out, "bounds", args, tolerances, [out])
        print(f"solver budget exhausted; bracket written to {out}", file=sys.stderr)
        return EX_BUDGET
    payload = report.to_dict()
    payload["instance"] = args.instance
    _write_json(out, payload)
    write_manifest(out, "bounds", args, tolerances, [out])
    names = ["r_static", "r_ub", "r_go_1", "r_hopf", "r_go_inf"]
    print(f"{'bound':<10} value")
    for n in names:
        v = payload.get(n)
        if v is not None:
            print(f"{n:<10} {v:.9g}")
    return EX_OK


def cmd_pde(args):
    from .pde import UpwindGridSpec, cfl_max_dt, default_grid_spec, solve_r_go_inf

    instance = _load(args)
    if args.nx is not None:
        if args.nt is not None:
            n_t = args.nt
        else:
            import math

            dh = 3.0 * instance.a_bound / args.nx
            n_t = int(math.ceil(1.0 / cfl_max_dt(instance.m, instance.eps, dh) - 1e-12))
        spec = UpwindGridSpec(
            m=instance.m, a_bound=instance.a_bound, N_x=args.nx, N_t=n_t
        )
    else:
        spec = default_grid_spec(instance)
    value, estimate = solve_r_go_inf(instance, spec, refine=not args.no_refine)
    out = args.out or "pde.json"
    payload = {
        "instance": args.instance,
        "r_go_inf": value,
        "refinement_estimate": estimate,
        "N_x": spec.N_x,
        "N_t": spec.N_t,
        "dh": spec.dh,
        "dt": spec.dt,
        "a_bound": instance.a_bound,
    }
    _write_json(out, payload)
    write_manifest(out, "pde", args, {"cfl_slack_rel": 1e-12}, [out])
    print(f"r_go_inf   {value:.9g}")
    if estimate is not None:
        print(f"refinement {estimate:.9g}")
    return EX_OK


def cmd_goap(args):
    from .goap import backward_induction, build_grids, goap_run_record

    instance = _load(args)
    kwargs = {} if args.memory_cap is None else {"memory_cap": args.memory_cap}
    spec = build_grids(
        instance,
        B=args.batches,
        kappa=args.kappa,
        dh=args.dh,
        ball_slack=args.ball_slack,
        **kwargs,
    )
    table = backward_induction(instance, spec)
    out = args.out or "goap.json"
    payload = {
        "instance": args.instance,
        "value_at_origin": table.value_at_origin(),
        "B": spec.B,
        "kappa": spec.kappa,
        "dh": spec.dh,
        "dt": spec.dt,
        "grid_sizes": [len(v) for v in table.values],
        "consistency_dh_satisfied": bool(spec.dh < args.kappa * spec.dt ** 2 / np.sqrt(spec.m)),
    }
    outputs = [out]
    if args.paths > 0:
        rows = []
        for k in range(args.paths):
            for truth in range(instance.m):
                rec = goap_run_record(
                    instance, table, truth, args.horizon, seed=args.seed + k
                )
                rows.append((k, truth, rec.decision, rec.terminal_value, rec.trajectory[-1]))
        csv_path = os.path.splitext(out)[0] + "_paths.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(
                ["path", "truth", "decision", "terminal_value"]
                + [f"x_{i + 1}" for i in range(instance.m)]
            )
            for k, truth, dec, tv, x in rows:
                w.writerow([k, truth, dec, f"{tv:.9g}"] + [f"{xi:.9g}" for xi in x])
        payload["paths_csv"] = csv_path
        outputs.append(csv_path)
    _write_json(out, payload)
    write_manifest(out, "goap", args, {"envelope_round": 1e-12}, outputs)
    print(f"value_at_origin {payload['value_at_origin']:.9g}")
    return EX_OK


def cmd_approach(args):
    from .approachability import approachability_run_record, r_approach
    from .rngs import splitmix64

    instance = _load(args)
    value, spec = r_approach(instance, seed=args.seed)
    out = args.out or "approach.json"
    payload = {
        "instance": args.instance,
        "r_approach": value,
        "R": spec.R,
        "active_pairs": [list(p) for p in spec.pairs],
        "beta_tilde": {f"{i}_{j}": spec.beta_tilde[(i, j)].tolist() for (i, j) in spec.pairs},
        "edge_sups": {f"{i}_{j}": s for (i, j), s in spec.edge_sups.items()},
    }
    outputs = [out]
    truths = range(instance.m) if args.truth == "all" else [int(args.truth)]
    if args.trials > 0:
        results = []
        if args.emit_paths:
            os.makedirs(args.emit_paths, exist_ok=True)
        for truth in truths:
            wrong = 0
            for k in range(args.trials):
                rec = approachability_run_record(
                    instance, truth, args.horizon, args.batches,
                    seed=splitmix64(args.seed, k), spec=spec,
                )
                wrong += 0 if rec.decision == truth else 1
                if args.emit_paths:
                    path_csv = os.path.join(
                        args.emit_paths, f"path_truth{truth}_trial{k}.csv"
                    )
                    _emit_approach_path(path_csv, instance, spec, rec)
                    outputs.append(path_csv)
            results.append({"truth": truth, "trials": args.trials, "errors": wrong})
        payload["runs"] = results
    _write_json(out, payload)
    write_manifest(
        out, "approach", args,
        {"membership_tol": 1e-6, "de_tol": 1e-7}, outputs,
    )
    print(f"r_approach {value:.9g}")
    return EX_OK


def _emit_approach_path(path_csv, instance, spec, rec):
    from .approachability import membership_l

    m = instance.m
    K = instance.n_arms
    with open(path_csv, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(
            ["batch"]
            + [f"x_{i + 1}" for i in range(m)]
            + ["l_x"]
            + [f"w_{a + 1}" for a in range(K)]
        )
        for b in range(len(rec.allocations)):
            x_prev = rec.trajectory[b]
            lval = membership_l(spec, x_prev)
            weights = rec.allocations[b].weights
            w.writerow(
                [b]
                + [f"{xi:.9g}" for xi in x_prev]
                + [f"{lval:.9g}"]
                + [f"{wa:.9g}" for wa in weights]
            )


def cmd_simulate(args):
    from .instances import Allocation
    from .simulate import estimate_error_exponent, wilson_interval

    instance = _load(args)
    t_grid = [int(s) for s in args.t_grid.split(",") if s.strip()]
    if not t_grid:
        raise ValidationError("--t-grid must list at least one horizon")
    if args.policy == "static":
        if args.weights:
            wts = np.array([float(s) for s in args.weights.split(",")])
        else:
            wts = np.full(instance.n_arms, 1.0 / instance.n_arms)
        policy = ("static", Allocation(wts))
        B = args.batches or 1
    elif args.policy == "approach":
        from .approachability import r_approach

        _, spec = r_approach(instance, seed=args.seed)
        policy = ("approach", spec)
        B = args.batches or 8
    elif args.policy == "goap":
        from .goap import backward_induction, build_grids

        spec = build_grids(instance, B=args.batches or 5, kappa=args.kappa, dh=args.dh)
        policy = ("goap", backward_induction(instance, spec))
        B = spec.B
    else:  # pragma: no cover - argparse choices guard this
        raise ValidationError(f"unknown policy {args.policy!r}")

    summary = estimate_error_exponent(
        instance, policy, t_grid, args.trials, seed=args.seed, B=B
    )
    out = args.out or "results.csv"
    per_truth = np.asarray(summary["per_truth_rates"])
    with open(out, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["policy", "truth", "T", "trials", "errors", "p_hat", "ci_lo", "ci_hi"])
        for ti, T in enumerate(sorted(t_grid)):
            for truth in range(instance.m):
                p = per_truth[ti, truth]
                k = int(round(p * args.trials))
                lo, hi = wilson_interval(k, args.trials)
                w.writerow(
                    [args.policy, truth, T, args.trials, k]
                    + [f"{v:.9g}" for v in (p, lo, hi)]
                )
    json_out = os.path.splitext(out)[0] + ".json"
    _write_json(json_out, {
        "instance": args.instance,
        "policy": args.policy,
        "slope": summary["slope"],
        "stderr": summary["stderr"],
        "intercept": summary["intercept"],
        "T": summary["T"],
        "rates": summary["rates"],
        "dropped_T": summary["dropped_T"],
    })
    write_manifest(out, "simulate", args, {"min_errors_per_point": 10}, [out, json_out])
    print(f"slope {summary['slope']:.9g} stderr {summary['stderr']:.9g}")
    return EX_OK


def cmd_report(args):
    out = args.out or "report.csv"
    fields = [
        "instance", "m", "n_arms", "support_size",
        "r_static", "r_ub", "r_go_1", "r_hopf", "r_go_inf",
        "r_go_inf_refinement",
    ]
    rows = []
    for path in args.inputs:
        with open(path, encoding="utf-8") as f:
            d = json.load(f)
        rows.append({k: d.get(k) for k in fields})
    with open(out, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({
                k: ("" if v is None else (f"{v:.9g}" if isinstance(v, float) else v))
                for k, v in r.items()
            })
    write_manifest(out, "report", args, {}, [out])
    print(f"wrote {out} ({len(rows)} rows)")
    return EX_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="asht",
        description="Minimax error-exponent bounds and strategies for active hypothesis testing.",
    )
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("bounds", help="static / one-batch / pairwise bounds")
    _add_common(p)
    p.add_argument("--include", default="r_static,r_ub,r_go_1",
                   help="comma list; may add r_hopf,r_go_inf")
    p.add_argument("--de-maxiter", type=int, default=None,
                   help="generation cap for the evolutionary searches")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("pde", help="grid solve of the continuous game value")
    _add_common(p)
    p.add_argument("--nx", type=int, default=None, help="spatial intervals per axis")
    p.add_argument("--nt", type=int, default=None, help="time steps (default CFL-tight)")
    p.add_argument("--no-refine", action="store_true")
    p.set_defaults(func=cmd_pde)

    p = sub.add_parser("goap", help="grid policy synthesis by backward induction")
    _add_common(p)
    p.add_argument("--batches", type=int, required=True)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--dh", type=float, default=None)
    p.add_argument("--ball-slack", type=float, default=1.0)
    p.add_argument("--memory-cap", type=int, default=None)
    p.add_argument("--paths", type=int, default=0, help="rollouts per truth to emit")
    p.add_argument("--horizon", type=int, default=1000)
    p.set_defaults(func=cmd_goap)

    p = sub.add_parser("approach", help="approachability rate and sampling runs")
    _add_common(p)
    p.add_argument("--batches", type=int, default=8)
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--truth", default="all", help="hypothesis index or 'all'")
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--emit-paths", default=None, help="directory for per-path CSVs")
    p.set_defaults(func=cmd_approach)

    p = sub.add_parser("simulate", help="Monte-Carlo error rates and exponent fit")
    _add_common(p)
    p.add_argument("--policy", choices=["static", "approach", "goap"], required=True)
    p.add_argument("--t-grid", required=True, help="comma list of horizons")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--weights", default=None, help="static allocation, comma list")
    p.add_argument("--batches", type=int, default=None)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--dh", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="join bounds JSON files into one CSV")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_report)

    return parser


def dispatch(argv):
    """Parse argv and run the chosen subcommand; returns the exit code."""
    if argv and argv[0] in ("-h", "--help"):
        build_parser().print_help()
        return EX_OK
    if not argv or argv[0] not in COMMANDS:
        build_parser().print_usage(sys.stderr)
        print(f"unknown subcommand: {argv[0] if argv else '(none)'}", file=sys.stderr)
        return EX_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EX_OK if e.code in (0, None) else EX_VALIDATION
    try:
        _resolve_threads(args)
        return args.func(args)
    except (ValidationError, DomainError, InsufficientDataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EX_VALIDATION
    except SolverBudgetError as e:
        out = getattr(args, "out", None) or "bracket.json"
        best = e.best
        if isinstance(best, tuple):
            best = [None if v is None else _fmt9(np.asarray(v).tolist()) for v in best]
        _write_json(out, {
            "error": str(e),
            "best": best,
            "bracket": list(e.bracket) if e.bracket else None,
        })
        print(f"solver budget exhausted; bracket written to {out}", file=sys.stderr)
        return EX_BUDGET


def main():
    return dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
