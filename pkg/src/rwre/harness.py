"""Replica-parallel experiment driver and limit estimators.

A plan runs one walk per replica with checkpoints at every grid point, so a
dyadic grid costs one long walk rather than one walk per point. Extinct
trees are resampled (attempt enters the tree-seed derivation, so retries
never disturb other replicas or the walk stream) and logged; surviving
replicas aggregate in replica-index order, which makes output bytes
independent of the thread count.

Return-time experiments cap total steps per replica at 2**28 and flag the
replica truncated: null-recurrent excursions are heavy-tailed and an
unbounded run has to fail loudly. Truncated tails are kept in the raw rows
but never enter summary statistics (their snapshot is not at a grid point).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .env import EnvironmentSpec, require_valid
from .errors import UsageError
from .jsonfmt import dumps, fmt_float
from .rng import WALK_TOKEN, derive_seed
from .walk import HIT_GENERATION, ROOT_RETURNS, STEPS, StopRule, run

RETURNS_STEP_CAP = 1 << 28
DEFAULT_MAX_RESAMPLES = 64

OBS_R = "R"
OBS_RTILDE = "RTILDE"
OBS_XSTAR = "XSTAR"
OBS_LOG_LROOT = "LOG_LROOT"

RATIO = "RATIO"
SLOPE = "SLOPE"
EXPONENT = "EXPONENT"

# which observables get summary records, per stop kind, in output order
_KIND_OBSERVABLES = {
    STEPS: (OBS_R, OBS_XSTAR, OBS_LOG_LROOT),
    ROOT_RETURNS: (OBS_RTILDE,),
    HIT_GENERATION: (),
}


@dataclass(frozen=True)
class ExperimentPlan:
    spec: EnvironmentSpec
    stop_grid: tuple
    replicas: int
    master_seed: int
    max_resamples: int = DEFAULT_MAX_RESAMPLES

    def __post_init__(self):
        grid = tuple(self.stop_grid)
        object.__setattr__(self, "stop_grid", grid)
        if not grid:
            raise UsageError("stop_grid must be nonempty")
        kind = grid[0].kind
        for rule in grid:
            if not isinstance(rule, StopRule):
                raise UsageError("stop_grid entries must be StopRule")
            if rule.kind != kind:
                raise UsageError("stop_grid mixes stop kinds")
        vals = [r.value for r in grid]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise UsageError("stop_grid values must be strictly increasing")
        if self.replicas < 1:
            raise UsageError("replicas must be positive")
        if self.max_resamples < 1:
            raise UsageError("max_resamples must be positive")

    @property
    def kind(self) -> str:
        return self.stop_grid[0].kind

    @property
    def grid_values(self) -> list:
        return [r.value for r in self.stop_grid]


def dyadic_grid(kind: str, j0: int, j1: int):
    """StopRules at 2**j0 .. 2**j1."""
    if j0 < 0 or j1 < j0 or j1 > 62:
        raise UsageError("bad dyadic range %d..%d" % (j0, j1))
    return [StopRule(kind, 1 << j) for j in range(j0, j1 + 1)]


@dataclass(frozen=True)
class EstimateRecord:
    n: int
    observable: str
    mean: float
    stderr: float
    replica_count: int


_OBS_FIELD = {
    OBS_R: "largest_full_generation",
    OBS_RTILDE: "largest_full_generation",
    OBS_XSTAR: "max_generation",
    OBS_LOG_LROOT: "root_local_time",
}


def _replica_task(spec, master_seed, r, grid_values, kind, max_resamples,
                  step_cap, engine):
    """Run replica r, resampling extinct trees. Returns (snaps, extinct_log)."""
    stop = StopRule(kind, grid_values[-1])
    checkpoints = grid_values[:-1]
    extinct_log = []
    for attempt in range(max_resamples):
        tree_seed = derive_seed(master_seed, r, attempt)
        walk_seed = derive_seed(master_seed, r, WALK_TOKEN)
        snaps = run(spec, tree_seed, walk_seed, stop, checkpoints=checkpoints,
                    capture="light", step_cap=step_cap, engine=engine)
        if snaps and snaps[-1].extinct_flag:
            extinct_log.append({"replica": r, "attempt": attempt,
                                "tree_seed": tree_seed})
            continue
        return snaps, extinct_log
    return None, extinct_log


def run_plan(plan: ExperimentPlan, out_dir: Optional[str] = None,
             threads: int = 1, step_cap: Optional[int] = None,
             engine: str = "auto"):
    """Execute the plan; return (records, rows) and optionally write files.

    rows: one dict per (replica, grid point) in replica-major order, keys
    {"replica","steps","returns","R","Xstar","L_root","extinct"} plus
    "truncated" on capped tails. records: per-grid-point EstimateRecords for
    the stop kind's observables.
    """
    require_valid(plan.spec)
    kind = plan.kind
    values = plan.grid_values
    if step_cap is None and kind == ROOT_RETURNS:
        step_cap = RETURNS_STEP_CAP

    results = [None] * plan.replicas
    if threads <= 1:
        for r in range(plan.replicas):
            results[r] = _replica_task(plan.spec, plan.master_seed, r, values,
                                       kind, plan.max_resamples, step_cap,
                                       engine)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {r: pool.submit(_replica_task, plan.spec, plan.master_seed,
                                   r, values, kind, plan.max_resamples,
                                   step_cap, engine)
                    for r in range(plan.replicas)}
            for r, f in futs.items():
                results[r] = f.result()

    extinct_events = []
    dead = []
    rows = []
    per_point = [[] for _ in values]
    for r in range(plan.replicas):
        snaps, ext = results[r]
        extinct_events.extend(ext)
        if snaps is None:
            dead.append(r)
            continue
        for i, snap in enumerate(snaps):
            row = {"replica": r, "steps": snap.steps,
                   "returns": snap.root_returns,
                   "R": snap.largest_full_generation,
                   "Xstar": snap.max_generation,
                   "L_root": snap.root_local_time,
                   "extinct": snap.extinct_flag}
            if snap.truncated:
                row["truncated"] = True
            rows.append(row)
            if not snap.truncated and not snap.extinct_flag:
                per_point[i].append(snap)

    if len(dead) == plan.replicas:
        raise UsageError("every replica extinct after %d resamples; "
                         "offspring law looks sub-critical"
                         % plan.max_resamples)

    records = []
    for i, n in enumerate(values):
        snaps = per_point[i]
        if not snaps:
            continue
        for tag in _KIND_OBSERVABLES[kind]:
            field = _OBS_FIELD[tag]
            xs = np.array([getattr(s, field) for s in snaps], dtype=np.float64)
            mean = float(np.mean(xs))
            stderr = (float(np.std(xs, ddof=1) / math.sqrt(len(xs)))
                      if len(xs) > 1 else 0.0)
            records.append(EstimateRecord(n, tag, mean, stderr, len(xs)))

    if out_dir is not None:
        meta = {
            "master_seed": plan.master_seed,
            "replicas": plan.replicas,
            "stop_kind": kind,
            "grid": values,
            "step_cap": step_cap,
            "max_resamples": plan.max_resamples,
            "extinct_resamples": extinct_events,
            "dead_replicas": dead,
        }
        _write_outputs(out_dir, rows, records, meta)
    return records, rows


def _write_outputs(out_dir, rows, records, meta):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "raw.jsonl"), "w") as f:
        for row in rows:
            f.write(dumps(row))
            f.write("\n")
    with open(os.path.join(out_dir, "summary.csv"), "w") as f:
        f.write("n,observable,mean,stderr,count\n")
        for rec in records:
            f.write("%d,%s,%s,%s,%d\n" % (rec.n, rec.observable,
                                          fmt_float(rec.mean),
                                          fmt_float(rec.stderr),
                                          rec.replica_count))
    tags = []
    for rec in records:
        if rec.observable not in tags:
            tags.append(rec.observable)
    for tag in tags:
        path = os.path.join(out_dir, "plot_%s.dat" % tag.lower())
        with open(path, "w") as f:
            for rec in records:
                if rec.observable == tag:
                    f.write("%s %s\n" % (fmt_float(math.log(rec.n)),
                                         fmt_float(rec.mean)))
    with open(os.path.join(out_dir, "runmeta.json"), "w") as f:
        f.write(dumps(meta))
        f.write("\n")


def _ols(x, y):
    """Least-squares slope with its standard error (n-2 dof)."""
    n = len(x)
    xm = sum(x) / n
    ym = sum(y) / n
    sxx = sum((xi - xm) ** 2 for xi in x)
    if sxx == 0.0:
        raise UsageError("degenerate abscissa in regression")
    sxy = sum((xi - xm) * (yi - ym) for xi, yi in zip(x, y))
    slope = sxy / sxx
    rss = sum((yi - ym - slope * (xi - xm)) ** 2 for xi, yi in zip(x, y))
    se = math.sqrt(max(rss, 0.0) / (n - 2) / sxx) if n > 2 else 0.0
    return slope, se


def estimate_limit(records, observable: str, mode: str) -> dict:
    """Reduce grid records to one limit estimate.

    RATIO: mean/log n at the largest grid point. SLOPE: least-squares slope
    of the means against log n. EXPONENT: least-squares slope of log(mean)
    against log n (requires positive means).
    """
    recs = sorted((r for r in records if r.observable == observable),
                  key=lambda r: r.n)
    if len(recs) < 3:
        raise UsageError("need at least 3 grid points for %s, got %d"
                         % (observable, len(recs)))
    if mode == RATIO:
        top = recs[-1]
        ln = math.log(top.n)
        return {"value": top.mean / ln, "stderr": top.stderr / ln}
    x = [math.log(r.n) for r in recs]
    if mode == SLOPE:
        slope, se = _ols(x, [r.mean for r in recs])
        return {"value": slope, "stderr": se}
    if mode == EXPONENT:
        if any(r.mean <= 0.0 for r in recs):
            raise UsageError("EXPONENT needs positive means")
        slope, se = _ols(x, [math.log(r.mean) for r in recs])
        return {"value": slope, "stderr": se}
    raise UsageError("unknown estimate mode %r" % (mode,))
