"""Nearest-neighbor walk on a lazily expanded random tree.

The walk lives on arena vertex ids plus one extra state below the root,
VIRTUAL_PARENT, whose only move is back up. A step draws one uniform and
scans the child weights (parent slot first, then children left to right);
degrees are small, so the scan beats any cached table once the arena
outgrows the last-level cache. The forced move out of VIRTUAL_PARENT draws
nothing.

Per-vertex storage is deliberately thin: int32 topology, float64 weight and
a one-byte visited flag, 25 bytes a vertex. Null-recurrent walks visit on
the order of n/2 distinct vertices in n steps, so a capped 2**28-step
replica peaks near 1.3e8 vertices; anything fatter does not fit in memory.

Observables are maintained online: root local time (counting times k >= 1,
so the start at the root is not a visit; at the root it coincides with the
return count), the deepest visited generation, and the largest fully
visited generation. The latter is tracked by a forward-only front: a child
cannot be visited before its parent, so fully visited generations form a
prefix and the candidate only moves up.

Two engines run the same state machine: the jitted segment loop in _kernel
and a pure-Python twin below, kept draw-for-draw and float-for-float
identical. tests/test_walk.py asserts bit identity between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernel
from ._kernel import (EXTINCT, GROW_GENS, GROW_VERTICES, M_FRONT, M_MAXGEN,
                      M_NEXP, M_NVERT, M_POS, M_R, M_RETURNS, M_STEPS,
                      M_VPLT, M_XSTAR, OK_TARGET, TRUNCATED)
from .env import (ROOT, UNEXPANDED, VIRTUAL_PARENT, EnvironmentSpec,
                  TreeArena, draw_offspring_and_weights, law_tables,
                  require_valid)
from .errors import ResourceError, UsageError
from .rng import GAMMA, M64, Stream, mix64, tree_base, uniform53

STEPS = "STEPS"
ROOT_RETURNS = "ROOT_RETURNS"
HIT_GENERATION = "HIT_GENERATION"

_KIND_CODE = {STEPS: 0, ROOT_RETURNS: 1, HIT_GENERATION: 2}
_CLI_KIND = {"steps": STEPS, "returns": ROOT_RETURNS, "hitgen": HIT_GENERATION}

# effectively "no cap"; real caps come from the caller (the harness pins
# 2**28 on return-time experiments because excursions are heavy-tailed)
NO_STEP_CAP = 1 << 62

# vertex ids are int32 in the arena
_MAX_WALK_VERTICES = 1 << 31


@dataclass(frozen=True)
class StopRule:
    """When to stop: STEPS(n), ROOT_RETURNS(n) or HIT_GENERATION(m).

    n = 0 is allowed for STEPS only (the empty walk); the other kinds need a
    strictly positive parameter.
    """

    kind: str
    value: int

    def __post_init__(self):
        if self.kind not in _KIND_CODE:
            raise UsageError("unknown stop kind: %r" % (self.kind,))
        v = self.value
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
            raise UsageError("stop parameter must be an integer")
        low = 0 if self.kind == STEPS else 1
        if v < low:
            raise UsageError("stop parameter %d out of range for %s" % (v, self.kind))

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        """Parse the CLI form 'steps:N' / 'returns:N' / 'hitgen:M'."""
        head, sep, tail = text.partition(":")
        if not sep or head not in _CLI_KIND:
            raise UsageError("bad stop rule %r (want steps:N, returns:N or hitgen:M)" % text)
        try:
            v = int(tail)
        except ValueError:
            raise UsageError("bad stop parameter in %r" % text) from None
        return cls(_CLI_KIND[head], v)


@dataclass
class WalkObservables:
    """One snapshot of the walk's online observables."""

    steps: int
    position: int
    root_local_time: int
    root_returns: int
    vp_local_time: int
    largest_full_generation: int
    max_generation: int
    extinct_flag: bool
    truncated: bool
    visited_per_generation: Optional[np.ndarray]


class WalkState:
    """Mutable run state shared verbatim with the jitted kernel.

    Per-vertex fields are parallel arrays (int32 parent/child_start/
    n_children/gen, float64 weight, uint8 visited); arrays grow one at a
    time so the copy transient never doubles the footprint. All mutable
    scalars live in `meta` (int64) and `rng` (uint64) so a kernel call can
    advance the walk in place; the Python twin writes the same slots.

    `debug_local_times`, when set to a dict, makes the Python engine count
    every vertex arrival in it (test instrumentation; the jitted engine
    ignores it).
    """

    def __init__(self, spec: EnvironmentSpec, tree_seed: int, walk_seed: int,
                 capacity: int = 1024, gens: int = 64):
        require_valid(spec)
        self.spec = spec
        self.tables = law_tables(spec)
        self.max_off = int(self.tables.max_count)
        self.tree_seed = int(tree_seed)
        self.walk_seed = int(walk_seed)
        self.tree_base = np.uint64(tree_base(tree_seed))
        self.debug_local_times: Optional[dict] = None

        cap = max(int(capacity), 16, 1 + self.max_off)
        self.parent = np.zeros(cap, dtype=np.int32)
        self.child_start = np.zeros(cap, dtype=np.int32)
        self.n_children = np.zeros(cap, dtype=np.int32)
        self.gen = np.zeros(cap, dtype=np.int32)
        self.weight = np.zeros(cap, dtype=np.float64)
        self.visited = np.zeros(cap, dtype=np.uint8)

        gens = max(int(gens), 8)
        self.gen_created = np.zeros(gens, dtype=np.int64)
        self.gen_expanded = np.zeros(gens, dtype=np.int64)
        self.visited_gen = np.zeros(gens, dtype=np.int64)

        self.meta = np.zeros(16, dtype=np.int64)
        self.rng = np.array([Stream(self.walk_seed).state], dtype=np.uint64)

        m = self.meta
        m[M_NVERT] = 1
        m[M_POS] = ROOT
        m[M_FRONT] = 1
        self.weight[ROOT] = 1.0
        self.parent[ROOT] = VIRTUAL_PARENT
        self.child_start[ROOT] = UNEXPANDED
        self.visited[ROOT] = 1
        self.gen_created[0] = 1
        self.visited_gen[0] = 1  # X_0 = root; not a local-time visit

        # expand the root up front so the current position is always expanded
        n, ws = draw_offspring_and_weights(self.tables, self.tree_seed, ROOT)
        for i in range(n):
            cid = 1 + i
            self.weight[cid] = ws[i]
            self.parent[cid] = ROOT
            self.child_start[cid] = UNEXPANDED
            self.n_children[cid] = 0
            self.gen[cid] = 1
            self.visited[cid] = 0
        self.child_start[ROOT] = 1
        self.n_children[ROOT] = n
        m[M_NVERT] = 1 + n
        m[M_NEXP] = 1
        self.gen_created[1] = n
        self.gen_expanded[0] = 1
        m[M_MAXGEN] = 1

    # -- capacity -------------------------------------------------------

    def grow_vertices(self) -> None:
        old = self.parent.shape[0]
        cap = old * 2
        if cap > _MAX_WALK_VERTICES:
            raise ResourceError("walk arena beyond %d vertices" % _MAX_WALK_VERTICES)
        nv = int(self.meta[M_NVERT])
        # np.zeros is lazy (untouched pages stay virtual): copy one array at
        # a time and only nv rows, so the peak is old arrays + one copy
        for name in ("parent", "child_start", "n_children", "gen",
                     "weight", "visited"):
            a = getattr(self, name)
            b = np.zeros(cap, dtype=a.dtype)
            b[:nv] = a[:nv]
            setattr(self, name, b)

    def grow_gens(self) -> None:
        old = len(self.gen_created)
        cap = old * 2
        for name in ("gen_created", "gen_expanded", "visited_gen"):
            a = getattr(self, name)
            b = np.zeros(cap, dtype=np.int64)
            b[:old] = a
            setattr(self, name, b)

    # -- observables ------------------------------------------------------

    def snapshot(self, capture: str = "full", extinct: bool = False,
                 truncated: bool = False) -> WalkObservables:
        m = self.meta
        if capture == "full":
            vis = self.visited_gen[: int(m[M_XSTAR]) + 1].copy()
        else:
            vis = None
        return WalkObservables(
            steps=int(m[M_STEPS]),
            position=int(m[M_POS]),
            root_local_time=int(m[M_RETURNS]),
            root_returns=int(m[M_RETURNS]),
            vp_local_time=int(m[M_VPLT]),
            largest_full_generation=int(m[M_R]),
            max_generation=int(m[M_XSTAR]),
            extinct_flag=extinct,
            truncated=truncated,
            visited_per_generation=vis,
        )

    def metric(self, kind_code: int) -> int:
        if kind_code == 0:
            return int(self.meta[M_STEPS])
        if kind_code == 1:
            return int(self.meta[M_RETURNS])
        return int(self.meta[M_XSTAR])

    @property
    def n_vertices(self) -> int:
        return int(self.meta[M_NVERT])


# ---------------------------------------------------------------------------
# pure-Python engine (the kernel's twin; see module docstring)


def _segment_python(state: WalkState, target_kind: int, target_value: int,
                    step_cap: int) -> int:
    m = state.meta
    parent = state.parent
    child_start = state.child_start
    n_children = state.n_children
    gen = state.gen
    weight = state.weight
    visited = state.visited
    gen_created = state.gen_created
    gen_expanded = state.gen_expanded
    visited_gen = state.visited_gen
    vcap = parent.shape[0]
    gcap = len(gen_created)
    max_off = state.max_off
    dbg = state.debug_local_times
    rs = int(state.rng[0])

    try:
        while True:
            if m[M_NEXP] == m[M_NVERT]:
                return EXTINCT
            if m[M_STEPS] >= step_cap:
                return TRUNCATED
            if m[M_NVERT] + max_off > vcap:
                return GROW_VERTICES
            if m[M_MAXGEN] + 2 > gcap:
                return GROW_GENS

            pos = int(m[M_POS])
            if pos == VIRTUAL_PARENT:
                nxt = ROOT
            else:
                cs = int(child_start[pos])
                k = int(n_children[pos])
                sw = 0.0
                for i in range(k):
                    sw += float(weight[cs + i])
                rs = (rs + GAMMA) & M64
                x = uniform53(mix64(rs)) * (1.0 + sw)
                if x < 1.0:
                    nxt = int(parent[pos])
                else:
                    # same rounding fallback as the kernel
                    nxt = cs + k - 1
                    acc = 1.0
                    for i in range(k - 1):
                        acc += float(weight[cs + i])
                        if x < acc:
                            nxt = cs + i
                            break

            m[M_STEPS] += 1
            m[M_POS] = nxt

            if nxt == VIRTUAL_PARENT:
                m[M_VPLT] += 1
            else:
                if dbg is not None:
                    dbg[nxt] = dbg.get(nxt, 0) + 1
                if nxt == ROOT:
                    m[M_RETURNS] += 1
                g = int(gen[nxt])
                if visited[nxt] == 0 and nxt != ROOT:
                    visited[nxt] = 1
                    if child_start[nxt] == UNEXPANDED:
                        n, ws = draw_offspring_and_weights(
                            state.tables, state.tree_seed, nxt)
                        cs2 = int(m[M_NVERT])
                        for i in range(n):
                            cid = cs2 + i
                            weight[cid] = ws[i]
                            parent[cid] = nxt
                            child_start[cid] = UNEXPANDED
                            n_children[cid] = 0
                            gen[cid] = g + 1
                            visited[cid] = 0
                        child_start[nxt] = cs2
                        n_children[nxt] = n
                        m[M_NVERT] = cs2 + n
                        m[M_NEXP] += 1
                        gen_created[g + 1] += n
                        gen_expanded[g] += 1
                        if g + 1 > m[M_MAXGEN]:
                            m[M_MAXGEN] = g + 1
                    visited_gen[g] += 1
                    if g > m[M_XSTAR]:
                        m[M_XSTAR] = g
                    f = int(m[M_FRONT])
                    while (gen_created[f] > 0
                           and visited_gen[f] == gen_created[f]
                           and gen_expanded[f - 1] == gen_created[f - 1]):
                        m[M_R] = f
                        f += 1
                        m[M_FRONT] = f

            if target_kind == 0:
                if m[M_STEPS] >= target_value:
                    return OK_TARGET
            elif target_kind == 1:
                if nxt == ROOT and m[M_RETURNS] >= target_value:
                    return OK_TARGET
            else:
                if nxt != VIRTUAL_PARENT and gen[nxt] >= target_value:
                    return OK_TARGET
    finally:
        state.rng[0] = np.uint64(rs)


def _advance(state: WalkState, target_kind: int, target_value: int,
             step_cap: int, engine: str) -> int:
    while True:
        if engine == "python":
            status = _segment_python(state, target_kind, target_value, step_cap)
        else:
            status = _kernel.walk_segment(
                state.parent, state.child_start, state.n_children,
                state.gen, state.weight, state.visited,
                state.gen_created, state.gen_expanded, state.visited_gen,
                state.meta, state.rng,
                state.tables.off_counts, state.tables.off_cdf,
                state.tables.w_values, state.tables.w_cdf,
                state.tree_base, np.int64(state.max_off),
                np.int64(target_kind), np.int64(target_value),
                np.int64(step_cap))
        if status == GROW_VERTICES:
            state.grow_vertices()
        elif status == GROW_GENS:
            state.grow_gens()
        else:
            return int(status)


# ---------------------------------------------------------------------------
# public operations


def transition_distribution(arena: TreeArena, x: int):
    """Move law at x: children first, parent slot last; sums to 1.

    From VIRTUAL_PARENT the move to the root is forced. Expands x on first
    query. A childless vertex steps to its parent with probability one.
    """
    if x == VIRTUAL_PARENT:
        return [(ROOT, 1.0)]
    if x < 0 or x >= arena.n_vertices:
        raise UsageError("no such vertex: %d" % x)
    if not arena.is_expanded(x):
        arena.expand_vertex(x)
    ch = arena.children(x)
    sw = 0.0
    for c in ch:
        sw += float(arena.weight[c])
    denom = 1.0 + sw
    out = [(c, float(arena.weight[c]) / denom) for c in ch]
    out.append((int(arena.parent[x]), 1.0 / denom))
    return out


def update_largest_full_generation(obs: WalkObservables, arena: TreeArena) -> int:
    """Direct-scan reference for the fully-visited-generation front.

    Largest k with every generation j <= k finalized and fully visited. The
    engines maintain this incrementally; this O(tree) scan is the oracle the
    tests compare against.
    """
    if obs.visited_per_generation is None:
        raise UsageError("needs a full-capture snapshot")
    vis = obs.visited_per_generation
    r = 0
    k = 1
    while k < len(arena.gen_created):
        created = arena.gen_created[k]
        visited = int(vis[k]) if k < len(vis) else 0
        if created > 0 and visited == created and arena.generation_finalized(k):
            r = k
            k += 1
        else:
            break
    return r


def run(spec: EnvironmentSpec, tree_seed: int, walk_seed: int, stop: StopRule,
        checkpoints=(), capture: str = "full", step_cap: Optional[int] = None,
        engine: str = "auto"):
    """Run one walk; return snapshots at each checkpoint plus the stop.

    Checkpoints are in the stop rule's unit and must be sorted, distinct and
    <= the stop parameter. On extinction (the tree is finite and fully seen)
    or on hitting step_cap, a final flagged snapshot ends the sequence early.
    """
    require_valid(spec)
    if capture not in ("full", "light"):
        raise UsageError("capture must be 'full' or 'light'")
    if engine not in ("auto", "numba", "python"):
        raise UsageError("engine must be 'auto', 'numba' or 'python'")
    cps = [int(c) for c in checkpoints]
    low = 0 if stop.kind == STEPS else 1
    for i, c in enumerate(cps):
        if c < low or c > stop.value:
            raise UsageError("checkpoint %d outside (%d..%d)" % (c, low, stop.value))
        if i > 0 and c <= cps[i - 1]:
            raise UsageError("checkpoints must be strictly increasing")
    cap = NO_STEP_CAP if step_cap is None else int(step_cap)
    if cap <= 0:
        raise UsageError("step_cap must be positive")

    tk = _KIND_CODE[stop.kind]
    state = WalkState(spec, tree_seed, walk_seed)
    snaps = []
    for tv in cps + [stop.value]:
        if state.metric(tk) >= tv:
            snaps.append(state.snapshot(capture))
            continue
        status = _advance(state, tk, tv, cap, engine)
        if status == OK_TARGET:
            snaps.append(state.snapshot(capture))
        elif status == EXTINCT:
            snaps.append(state.snapshot(capture, extinct=True))
            break
        elif status == TRUNCATED:
            snaps.append(state.snapshot(capture, truncated=True))
            break
        else:  # pragma: no cover - statuses are exhaustive
            raise AssertionError("unexpected walk status %d" % status)
    return snaps
