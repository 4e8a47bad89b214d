"""Command-line front end.

Five subcommands: classify an environment, run a simulation plan, compute
exact quantities on a frozen tree, run the branching-sum verification
suites, and sweep classify over a directory. All numeric output goes
through the 17-significant-digit JSON emitter so values round-trip exactly;
exit codes are 0 (ok), 2 (configuration/usage), 3 (resource/numerical).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import brw, exact, harness, regime
from .env import load_env
from .errors import NumericalError, ResourceError, UsageError
from .jsonfmt import dumps
from .walk import StopRule

_BETA_SAMPLE_CAP = 200


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rwre",
        description="Random walks in random environments on random trees: "
                    "regime analysis, simulation, exact identities.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="regime report for one environment")
    c.add_argument("--env", required=True, help="environment JSON file")
    c.add_argument("--tol", type=float, default=regime.DEFAULT_TOL,
                   help="boundary tolerance on chi and psi'(1)")

    s = sub.add_parser("simulate", help="run a replica plan over a grid")
    s.add_argument("--env", required=True)
    s.add_argument("--stop", required=True,
                   help="steps:N | returns:N | hitgen:M (largest grid point)")
    s.add_argument("--grid", default=None,
                   help="dyadic:J0:J1 checkpoints 2^J0..2^J1 in the stop unit")
    s.add_argument("--replicas", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--step-cap", type=int, default=None,
                   help="per-replica step cap (default 2^28 for returns runs)")
    s.add_argument("--max-resamples", type=int,
                   default=harness.DEFAULT_MAX_RESAMPLES,
                   help="extinction retries per replica")
    s.add_argument("--engine", choices=("auto", "python"), default="auto")

    e = sub.add_parser("exact", help="exact recursions on one frozen tree")
    e.add_argument("--env", required=True)
    e.add_argument("--depth", type=int, required=True)
    e.add_argument("--m", type=int, required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--oracle", action="store_true",
                   help="also solve the full linear system (slow; meant for "
                        "trees up to ~1e5 vertices)")
    e.add_argument("--max-vertices", type=int, default=exact.MAX_FROZEN_VERTICES)

    v = sub.add_parser("verify", help="branching-sum verification suites")
    v.add_argument("--env", required=True)
    v.add_argument("--suite", required=True,
                   choices=("biggins", "martingale", "maxpot"))
    v.add_argument("--n", type=int, default=6,
                   help="depth (biggins/martingale)")
    v.add_argument("--c", default="median",
                   help="threshold for biggins: a float, or 'median' for the "
                        "exact S_n median nudged 1e-9 down to dodge ties")
    v.add_argument("--which", choices=("W", "M"), default="W",
                   help="martingale choice")
    v.add_argument("--levels", default="15,20",
                   help="comma-separated levels (maxpot)")
    v.add_argument("--replicas", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--threads", type=int, default=1)

    w = sub.add_parser("sweep", help="classify every environment in a directory")
    w.add_argument("--env-dir", required=True)
    w.add_argument("--tol", type=float, default=regime.DEFAULT_TOL)

    return p


def _cmd_classify(args) -> int:
    spec = load_env(args.env)
    report = regime.classify(spec, tol=args.tol)
    print(dumps(report.to_jsonable()))
    return 0


def _parse_grid(stop: StopRule, text):
    if text is None:
        return [stop]
    parts = text.split(":")
    if len(parts) != 3 or parts[0] != "dyadic":
        raise UsageError("bad grid %r (want dyadic:J0:J1)" % text)
    try:
        j0, j1 = int(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError("bad grid %r" % text) from None
    grid = harness.dyadic_grid(stop.kind, j0, j1)
    if grid[-1].value != stop.value:
        raise UsageError("stop %d is not the largest grid point 2^%d"
                         % (stop.value, j1))
    return grid


def _cmd_simulate(args) -> int:
    spec = load_env(args.env)
    stop = StopRule.parse(args.stop)
    grid = _parse_grid(stop, args.grid)
    plan = harness.ExperimentPlan(spec=spec, stop_grid=tuple(grid),
                                  replicas=args.replicas,
                                  master_seed=args.seed,
                                  max_resamples=args.max_resamples)
    records, rows = harness.run_plan(plan, out_dir=args.out,
                                     threads=args.threads,
                                     step_cap=args.step_cap,
                                     engine=args.engine)
    print(dumps({"out": args.out, "rows": len(rows),
                 "records": len(records)}))
    return 0


def _cmd_exact(args) -> int:
    spec = load_env(args.env)
    if args.m < 1 or args.m > args.depth:
        raise UsageError("need 1 <= m <= depth")
    tree = exact.freeze(spec, args.depth, args.seed,
                        max_vertices=args.max_vertices)
    report = exact.expected_hit_time(tree, args.m)
    oracle_time = None
    beta_err = None
    if args.oracle:
        oracle_time = exact.oracle_expected_time(tree, 0, args.m)
        beta = exact.beta_recursion(tree, args.m)
        gens = tree.arena.generation
        ids = [x for x in range(1, tree.n_vertices) if 1 <= gens[x] < args.m]
        stride = max(1, len(ids) // _BETA_SAMPLE_CAP)
        err = 0.0
        for x in ids[::stride]:
            err = max(err, abs(float(beta[x])
                               - exact.oracle_beta(tree, x, args.m)))
        beta_err = err
    print(dumps({
        "depth": args.depth,
        "m": args.m,
        "rho": report.rho,
        "gamma_root": report.gamma_root,
        "expected_hit_time_paper": report.paper_value,
        "expected_hit_time_oracle": oracle_time,
        "max_abs_beta_error": beta_err,
    }))
    return 0


def _cmd_verify(args) -> int:
    spec = load_env(args.env)
    if args.suite == "biggins":
        if args.c == "median":
            c = brw.sn_median(spec, args.n) - 1e-9
        else:
            try:
                c = float(args.c)
            except ValueError:
                raise UsageError("bad --c %r" % args.c) from None
        rep = brw.verify_many_to_one(spec, args.n, c, args.replicas,
                                     args.seed, threads=args.threads)
        print(dumps({"suite": "biggins", "n": args.n, "c": c,
                     "lhs": rep["lhs_estimate"], "stderr": rep["lhs_stderr"],
                     "rhs": rep["rhs_exact"], "z": rep["z_score"]}))
        return 0
    if args.suite == "martingale":
        rep = brw.martingale_mean(spec, args.which, args.n, args.replicas,
                                  args.seed, threads=args.threads)
        z = (0.0 if abs(rep["mean"] - 1.0) <= 1e-12 else float("inf")) \
            if rep["stderr"] == 0.0 else (rep["mean"] - 1.0) / rep["stderr"]
        print(dumps({"suite": "martingale", "n": args.n, "c": None,
                     "lhs": rep["mean"], "stderr": rep["stderr"],
                     "rhs": 1.0, "z": z}))
        return 0
    # maxpot
    try:
        levels = [int(t) for t in args.levels.split(",") if t]
    except ValueError:
        raise UsageError("bad --levels %r" % args.levels) from None
    gt = regime.gamma_tilde(spec)
    recs = brw.max_potential_profile(spec, levels, args.replicas, args.seed,
                                     threads=args.threads)
    for rec in recs:
        stderr = rec.stderr_max_v / rec.level
        lhs = rec.mean_max_v / rec.level
        if stderr == 0.0:
            z = 0.0 if abs(lhs - gt) <= 1e-12 else float("inf")
        else:
            z = (lhs - gt) / stderr
        print(dumps({"suite": "maxpot", "n": rec.level, "c": None,
                     "lhs": lhs, "stderr": stderr, "rhs": gt, "z": z,
                     "vbar_mean": rec.mean_max_vbar / rec.level,
                     "vbar_max": rec.max_max_vbar / rec.level,
                     "surviving": rec.surviving}))
    return 0


def _cmd_sweep(args) -> int:
    if not os.path.isdir(args.env_dir):
        raise UsageError("not a directory: %s" % args.env_dir)
    names = sorted(f for f in os.listdir(args.env_dir) if f.endswith(".json"))
    if not names:
        raise UsageError("no .json environments in %s" % args.env_dir)
    for name in names:
        spec = load_env(os.path.join(args.env_dir, name))
        report = regime.classify(spec, tol=args.tol)
        print(dumps({"env": name, "report": report.to_jsonable()}))
    return 0


_DISPATCH = {
    "classify": _cmd_classify,
    "simulate": _cmd_simulate,
    "exact": _cmd_exact,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed usage; normalize its code
        return 2 if e.code not in (0, None) else int(e.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except UsageError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except (ResourceError, NumericalError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
