"""Exact quenched quantities on a frozen tree, with independent oracles.

A frozen tree is an arena expanded breadth-first to a fixed depth, so vertex
ids are sorted by generation and each generation occupies one contiguous id
block. On top of it this module computes, in closed form:

* the two birth-death path-hitting probabilities along an ancestor line
  (log-sum-exp over path potentials),
* beta (per-vertex probability of reaching generation m before backing over
  the parent edge), rho (root escape probability), and the gamma recursion
  whose quotient gamma(root)/rho is the recorded expected hitting time
  identity,

and, independently, two generic linear-solve oracles over the full state
space (all vertices plus the reflecting virtual parent): an exact
leaf-to-root elimination and a Gauss-Seidel iteration. The recursions are
validated against the oracles, never against themselves.

Boundary convention for the oracles: an unexpanded frontier vertex that is
not absorbing reflects to its parent, exactly like a dead leaf. Hitting
races between path vertices are unaffected because excursions into finite
side subtrees return with probability one.

Known recorded discrepancy: gamma(root)/rho is implemented verbatim with no
parent-edge term at the root, so at m=1 on the binary half-weight tree it
gives 0 while the oracle expected time is 3. Both values are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import (UNEXPANDED, VIRTUAL_PARENT, EnvironmentSpec, TreeArena,
                  require_valid)
from .errors import NumericalError, ResourceError, UsageError

MAX_FROZEN_VERTICES = 20_000_000
GS_RESIDUAL = 1e-13
GS_MAX_SWEEPS = 1_000_000


def _logsumexp(values) -> float:
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


@dataclass(frozen=True)
class FrozenTree:
    arena: TreeArena
    depth: int
    gen_offsets: np.ndarray  # gen g occupies ids [gen_offsets[g], gen_offsets[g+1])

    @property
    def n_vertices(self) -> int:
        return self.arena.n_vertices

    @property
    def extinct(self) -> bool:
        """Died before reaching the freeze depth."""
        return self.gen_size(self.depth) == 0

    def gen_size(self, g: int) -> int:
        if g < 0 or g + 1 >= len(self.gen_offsets):
            return 0
        return int(self.gen_offsets[g + 1] - self.gen_offsets[g])

    def gen_slice(self, g: int) -> slice:
        return slice(int(self.gen_offsets[g]), int(self.gen_offsets[g + 1]))


def freeze(spec: EnvironmentSpec, depth: int, tree_seed: int,
           max_vertices: int = MAX_FROZEN_VERTICES,
           engine: str = "auto") -> FrozenTree:
    """Expand every vertex of generation < depth, breadth-first.

    Raises ResourceError naming the offending generation when the vertex
    budget would be exceeded.
    """
    require_valid(spec)
    if depth < 1:
        raise UsageError("freeze needs depth >= 1, got %d" % depth)
    if engine not in ("auto", "python", "numba"):
        raise UsageError("unknown engine %r" % engine)

    use_numba = engine == "numba"
    if engine == "auto":
        try:
            from . import _kernel  # noqa: F401
            use_numba = True
        except ImportError:
            use_numba = False

    if use_numba:
        from . import _kernel
        t = spec.tables()
        arrays = _kernel.freeze_tree(t.off_counts, t.off_cdf, t.w_values,
                                     t.w_cdf, np.uint64(tree_seed),
                                     np.int64(depth), np.int64(max_vertices))
        (parent, generation, weight, potential, child_start, n_children,
         n_vertices, n_expanded, gen_created, gen_expanded, status) = arrays
        if status != 0:
            raise ResourceError(
                "freeze exceeded %d vertices expanding generation %d"
                % (max_vertices, int(status)))
        n_vertices = int(n_vertices)
        arena = TreeArena.from_arrays(
            spec, tree_seed, parent[:n_vertices], generation[:n_vertices],
            weight[:n_vertices], potential[:n_vertices],
            child_start[:n_vertices], n_children[:n_vertices],
            n_vertices, int(n_expanded),
            gen_created, gen_expanded)
        # match the incremental bookkeeping: one slot per generation up to
        # (deepest expanded generation) + 1, zero slot included
        last = max(g for g, e in enumerate(arena.gen_expanded) if e > 0)
        del arena.gen_created[last + 2:]
        del arena.gen_expanded[last + 2:]
    else:
        arena = TreeArena(spec, tree_seed)
        x = 0
        while x < arena.n_vertices:
            if int(arena.generation[x]) >= depth:
                break
            arena.expand_vertex(x)
            if arena.n_vertices > max_vertices:
                raise ResourceError(
                    "freeze exceeded %d vertices expanding generation %d"
                    % (max_vertices, int(arena.generation[x]) + 1))
            x += 1

    gens = np.asarray(arena.generation[: arena.n_vertices])
    ngen = int(gens[-1]) if arena.n_vertices else 0
    offsets = np.searchsorted(gens, np.arange(ngen + 2))
    # pad so gen_offsets covers 0..depth+1 even on early extinction
    if len(offsets) < depth + 2:
        offsets = np.concatenate([
            offsets,
            np.full(depth + 2 - len(offsets), arena.n_vertices, dtype=offsets.dtype),
        ])
    return FrozenTree(arena=arena, depth=depth, gen_offsets=offsets.astype(np.int64))


# ---------------------------------------------------------------------------
# path-hitting probabilities along an ancestor line


def _path_potentials(tree: FrozenTree, xp: int, x: int) -> list[float]:
    """V(z) for z from the child of xp down to x; UsageError if xp is not
    a strict ancestor of x."""
    arena = tree.arena
    if x <= xp or x < 0 or xp < 0 or x >= arena.n_vertices:
        raise UsageError("need a strict ancestor pair, got (%d, %d)" % (xp, x))
    out = []
    z = x
    while z != xp and z != VIRTUAL_PARENT:
        out.append(float(arena.potential[z]))
        z = int(arena.parent[z])
    if z != xp:
        raise UsageError("vertex %d is not an ancestor of %d" % (xp, x))
    out.reverse()
    return out


def path_hit_prob_up(tree: FrozenTree, xp: int, x: int) -> float:
    """P(walk started at the child of xp toward x hits x before xp).

    Equals exp(V(first) - logsumexp(V over the open-closed path (xp, x])).
    """
    pots = _path_potentials(tree, xp, x)
    return math.exp(pots[0] - _logsumexp(pots))


def path_hit_prob_down(tree: FrozenTree, xp: int, x: int) -> float:
    """P(walk started at the parent of x hits xp before x), same potentials."""
    pots = _path_potentials(tree, xp, x)
    return math.exp(pots[-1] - _logsumexp(pots))


# ---------------------------------------------------------------------------
# segment sums over contiguous child blocks


def _child_segment_sum(tree: FrozenTree, g: int, child_values: np.ndarray) -> np.ndarray:
    """Sum child_values (indexed relative to generation g+1) per gen-g parent.

    Parents with no children (dead leaves or frontier) contribute 0. Relies
    on the BFS layout: the child blocks of gen-g parents tile gen g+1 in
    parent order.
    """
    arena = tree.arena
    sl = tree.gen_slice(g)
    starts = arena.child_start[sl]
    counts = np.where(starts == UNEXPANDED, 0, arena.n_children[sl])
    out = np.zeros(sl.stop - sl.start, dtype=np.float64)
    nz = counts > 0
    if not nz.any():
        return out
    base = int(tree.gen_offsets[g + 1])
    rel = (starts[nz] - base).astype(np.int64)
    sums = np.add.reduceat(child_values, rel)
    out[nz] = sums
    return out


def _sum_child_weights(tree: FrozenTree, g: int) -> np.ndarray:
    arena = tree.arena
    child_w = np.asarray(arena.weight[tree.gen_slice(g + 1)], dtype=np.float64)
    return _child_segment_sum(tree, g, child_w)


# ---------------------------------------------------------------------------
# beta / rho / gamma recursions


def beta_recursion(tree: FrozenTree, m: int) -> np.ndarray:
    """Per-vertex probability of hitting generation m before the parent edge.

    beta = 1 exactly on generation m, 0 at dead ends, else S/(1+S) with
    S the weight-weighted sum of child betas. Values above generation m are
    left at 0 (they play no role).
    """
    if m < 1 or m > tree.depth:
        raise UsageError("beta needs 1 <= m <= depth, got m=%d" % m)
    arena = tree.arena
    beta = np.zeros(arena.n_vertices, dtype=np.float64)
    beta[tree.gen_slice(m)] = 1.0
    for g in range(m - 1, -1, -1):
        sl_child = tree.gen_slice(g + 1)
        child_vals = np.asarray(arena.weight[sl_child]) * beta[sl_child]
        s = _child_segment_sum(tree, g, child_vals)
        beta[tree.gen_slice(g)] = s / (1.0 + s)
    return beta


def rho(tree: FrozenTree, m: int, beta: np.ndarray | None = None) -> float:
    """Probability of reaching generation m before the first root return."""
    if beta is None:
        beta = beta_recursion(tree, m)
    if tree.gen_size(m) == 0:
        raise UsageError("tree is extinct before generation %d" % m)
    arena = tree.arena
    sl = tree.gen_slice(1)
    w = np.asarray(arena.weight[sl])
    s = float(np.dot(w, beta[sl]))
    return s / (1.0 + float(w.sum()))


def gamma_recursion(tree: FrozenTree, m: int, beta: np.ndarray | None = None) -> np.ndarray:
    """The three-case expected-time recursion paired with beta.

    0 on generation m; in between, (1/p(x, parent) + sum A gamma) over
    (1 + sum A beta); and at the root the plain transition-weighted average
    of the children's values (verbatim, including its m=1 quirk).
    """
    if m < 1 or m > tree.depth:
        raise UsageError("gamma needs 1 <= m <= depth, got m=%d" % m)
    if beta is None:
        beta = beta_recursion(tree, m)
    arena = tree.arena
    gamma = np.zeros(arena.n_vertices, dtype=np.float64)
    for g in range(m - 1, 0, -1):
        sl_child = tree.gen_slice(g + 1)
        w_child = np.asarray(arena.weight[sl_child])
        s_gamma = _child_segment_sum(tree, g, w_child * gamma[sl_child])
        s_beta = _child_segment_sum(tree, g, w_child * beta[sl_child])
        sum_w = _sum_child_weights(tree, g)
        # 1/p(x, parent) = 1 + sum of child weights
        gamma[tree.gen_slice(g)] = ((1.0 + sum_w) + s_gamma) / (1.0 + s_beta)
    sl = tree.gen_slice(1)
    w = np.asarray(arena.weight[sl])
    denom = 1.0 + float(w.sum())
    gamma[0] = float(np.dot(w, gamma[sl])) / denom
    return gamma


@dataclass(frozen=True)
class HitTimeReport:
    m: int
    rho: float
    gamma_root: float
    paper_value: float  # gamma_root / rho


def expected_hit_time(tree: FrozenTree, m: int) -> HitTimeReport:
    b = beta_recursion(tree, m)
    r = rho(tree, m, b)
    g = gamma_recursion(tree, m, b)
    return HitTimeReport(m=m, rho=r, gamma_root=float(g[0]),
                         paper_value=float(g[0]) / r)


# ---------------------------------------------------------------------------
# generic linear-solve oracles
#
# State space: every frozen vertex plus the virtual parent. Transitions:
# children first with A/(1+sumA), parent with 1/(1+sumA); dead leaves and
# non-absorbing frontier vertices reflect to the parent; the virtual parent
# reflects to the root. Hitting probabilities solve u = Pu with boundary
# values; expected times solve t = 1 + Pt with t = 0 on the target set.


class _LinearProblem:
    def __init__(self, tree: FrozenTree, absorbing_value: dict[int, float],
                 source: float, vp_absorbing_value: float | None):
        self.tree = tree
        self.absorbing_value = absorbing_value
        self.source = source  # 0 for probabilities, 1 for expected times
        self.vp_absorbing_value = vp_absorbing_value


def _eliminate(problem: _LinearProblem, start: int) -> float:
    """Exact leaf-to-root elimination: u(x) = a_x + b_x u(parent)."""
    tree = problem.tree
    arena = tree.arena
    n = arena.n_vertices
    a = np.zeros(n, dtype=np.float64)
    b = np.zeros(n, dtype=np.float64)
    absorbed = np.zeros(n, dtype=bool)
    for v, val in problem.absorbing_value.items():
        if v == VIRTUAL_PARENT:
            continue
        absorbed[v] = True
        a[v] = val

    src = problem.source
    # reverse id order visits every child before its parent
    for x in range(n - 1, -1, -1):
        if absorbed[x]:
            continue
        cs = int(arena.child_start[x])
        if cs == UNEXPANDED or int(arena.n_children[x]) == 0:
            # reflector: u(x) = source + u(parent)
            a[x] = src
            b[x] = 1.0
            continue
        nc = int(arena.n_children[x])
        w = arena.weight[cs:cs + nc]
        denom = 1.0 + float(w.sum())
        pc = w / denom
        sum_pa = float(np.dot(pc, a[cs:cs + nc]))
        sum_pb = float(np.dot(pc, b[cs:cs + nc]))
        d = 1.0 - sum_pb
        a[x] = (src + sum_pa) / d
        b[x] = (1.0 / denom) / d

    # close the system at the top
    if VIRTUAL_PARENT in problem.absorbing_value:
        u_root = a[0] + b[0] * problem.absorbing_value[VIRTUAL_PARENT]
    elif absorbed[0]:
        u_root = a[0]
    else:
        # u(vp) = source + u(root)
        if b[0] >= 1.0:
            raise NumericalError("elimination: no absorption reachable from root")
        u_root = (a[0] + b[0] * src) / (1.0 - b[0])

    if start == VIRTUAL_PARENT:
        return problem.absorbing_value.get(VIRTUAL_PARENT, src + u_root)

    # walk down from the root to start, applying u(x) = a + b u(parent)
    chain = []
    z = start
    while z != 0:
        chain.append(z)
        z = int(arena.parent[z])
    u = u_root
    for z in reversed(chain):
        u = a[z] + b[z] * u if not absorbed[z] else a[z]
    return float(u)


def _gauss_seidel(problem: _LinearProblem, start: int) -> float:
    """Generation-blocked Gauss-Seidel sweeps (down then up) to 1e-13."""
    tree = problem.tree
    arena = tree.arena
    n = arena.n_vertices
    u = np.zeros(n, dtype=np.float64)
    absorbed = np.zeros(n, dtype=bool)
    for v, val in problem.absorbing_value.items():
        if v == VIRTUAL_PARENT:
            continue
        absorbed[v] = True
        u[v] = val

    src = problem.source
    vp_fixed = problem.absorbing_value.get(VIRTUAL_PARENT)
    depth_top = len(tree.gen_offsets) - 2

    # per-generation cached structure
    cache = []
    for g in range(depth_top + 1):
        sl = tree.gen_slice(g)
        if sl.stop <= sl.start:
            cache.append(None)
            continue
        starts = arena.child_start[sl]
        counts = np.where(starts == UNEXPANDED, 0, arena.n_children[sl])
        sumw = np.zeros(sl.stop - sl.start, dtype=np.float64)
        nz = counts > 0
        if nz.any():
            base = int(tree.gen_offsets[g + 1])
            rel = (starts[nz] - base).astype(np.int64)
            child_w = np.asarray(arena.weight[tree.gen_slice(g + 1)], dtype=np.float64)
            sumw[nz] = np.add.reduceat(child_w, rel)
        denom = 1.0 + sumw
        parents = arena.parent[sl]
        free = ~absorbed[sl]
        cache.append((sl, counts, denom, parents, free, nz))

    def sweep_gen(g: int) -> float:
        entry = cache[g]
        if entry is None:
            return 0.0
        sl, counts, denom, parents, free, nz = entry
        if not free.any():
            return 0.0
        child_sl = tree.gen_slice(g + 1) if g + 1 <= depth_top + 0 else slice(0, 0)
        s = np.zeros(sl.stop - sl.start, dtype=np.float64)
        if nz.any() and child_sl.stop > child_sl.start:
            child_w = np.asarray(arena.weight[child_sl], dtype=np.float64)
            vals = child_w * u[child_sl]
            base = int(tree.gen_offsets[g + 1])
            rel = (arena.child_start[sl][nz] - base).astype(np.int64)
            s[nz] = np.add.reduceat(vals, rel)
        if g == 0:
            up = vp_fixed if vp_fixed is not None else src + u[0]
            u_par = np.full(sl.stop - sl.start, up, dtype=np.float64)
        else:
            u_par = u[parents]
        new = src + (u_par + s) / denom
        view = u[sl]
        delta = float(np.max(np.abs(new[free] - view[free])))
        view[free] = new[free]
        return delta

    for it in range(GS_MAX_SWEEPS):
        resid = 0.0
        for g in range(depth_top, -1, -1):
            resid = max(resid, sweep_gen(g))
        for g in range(depth_top + 1):
            resid = max(resid, sweep_gen(g))
        if resid <= GS_RESIDUAL:
            break
    else:
        raise NumericalError("Gauss-Seidel did not reach %g in %d sweeps"
                             % (GS_RESIDUAL, GS_MAX_SWEEPS))

    if start == VIRTUAL_PARENT:
        return float(vp_fixed) if vp_fixed is not None else float(src + u[0])
    return float(u[start])


def _hit_problem(tree: FrozenTree, target_set, avoid_set) -> _LinearProblem:
    targets = set(int(v) for v in target_set)
    avoid = set(int(v) for v in avoid_set)
    if targets & avoid:
        raise UsageError("target and avoid sets overlap")
    if not targets:
        raise UsageError("empty target set")
    absorbing = {v: 1.0 for v in targets}
    absorbing.update({v: 0.0 for v in avoid})
    vp_val = absorbing.get(VIRTUAL_PARENT)
    return _LinearProblem(tree, absorbing, source=0.0, vp_absorbing_value=vp_val)


def oracle_hit_prob(tree: FrozenTree, start: int, target_set, avoid_set,
                    engine: str = "elimination") -> float:
    """P_start(hit target_set before avoid_set), full linear solve."""
    problem = _hit_problem(tree, target_set, avoid_set)
    if start in problem.absorbing_value:
        return problem.absorbing_value[start]
    if engine == "elimination":
        return _eliminate(problem, start)
    if engine == "gauss_seidel":
        return _gauss_seidel(problem, start)
    raise UsageError("unknown oracle engine %r" % engine)


def oracle_expected_time(tree: FrozenTree, start: int, target_generation: int,
                         engine: str = "elimination") -> float:
    """E_start[steps to reach target_generation], full linear solve."""
    m = int(target_generation)
    if m < 1 or m > tree.depth:
        raise UsageError("target generation out of range: %d" % m)
    if tree.gen_size(m) == 0:
        raise UsageError("tree is extinct before generation %d" % m)
    absorbing = {int(v): 0.0 for v in range(*tree.gen_slice(m).indices(tree.n_vertices))}
    problem = _LinearProblem(tree, absorbing, source=1.0, vp_absorbing_value=None)
    if start in absorbing:
        return 0.0
    if engine == "elimination":
        return _eliminate(problem, start)
    if engine == "gauss_seidel":
        return _gauss_seidel(problem, start)
    raise UsageError("unknown oracle engine %r" % engine)


def oracle_beta(tree: FrozenTree, x: int, m: int, engine: str = "elimination") -> float:
    """Oracle counterpart of beta_recursion at one vertex."""
    sl = tree.gen_slice(m)
    targets = range(sl.start, sl.stop)
    parent = int(tree.arena.parent[x]) if x != 0 else VIRTUAL_PARENT
    return oracle_hit_prob(tree, x, targets, [parent], engine=engine)


def oracle_rho(tree: FrozenTree, m: int, engine: str = "elimination") -> float:
    """Oracle counterpart of rho: absorb at generation m and at the root."""
    arena = tree.arena
    sl1 = tree.gen_slice(1)
    w = np.asarray(arena.weight[sl1])
    denom = 1.0 + float(w.sum())
    slm = tree.gen_slice(m)
    targets = range(slm.start, slm.stop)
    total = 0.0
    for i, c in enumerate(range(sl1.start, sl1.stop)):
        p = float(w[i]) / denom
        total += p * oracle_hit_prob(tree, c, targets, [0], engine=engine)
    return total
