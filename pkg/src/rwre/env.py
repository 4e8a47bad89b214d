"""Environment law, lazily expanded random trees, and potentials.

An environment is a pair of finite discrete laws: an offspring law for the
number of children N of each vertex and a weight law for the per-child
weights A, drawn i.i.d. and independently of N. The tree is materialized
lazily in a struct-of-arrays arena; expanding vertex x is a pure function of
(tree_seed, x), so expansion order never changes the tree.

Conventions baked into the arena:

* vertex ids are dense ints in creation order, root = 0,
* the root's parent slot holds VIRTUAL_PARENT (-1), a reflecting state that
  is not a tree vertex,
* a vertex with child_start == UNEXPANDED has not drawn its children yet,
* the potential V accumulates -log A along the root-to-vertex path, V(root)=0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .rng import draw_index, tree_base, uniform53, vertex_state, GAMMA, M64, mix64

VIRTUAL_PARENT = -1
ROOT = 0
UNEXPANDED = -1

PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class OffspringLaw:
    """Law of N: tuple of (count, probability) pairs."""

    support: tuple[tuple[int, float], ...]

    def mean(self) -> float:
        return float(sum(c * p for c, p in self.support))

    def max_count(self) -> int:
        return max(c for c, _ in self.support)


@dataclass(frozen=True)
class WeightLaw:
    """Law of A: tuple of (value, probability) pairs."""

    support: tuple[tuple[float, float], ...]

    def a_min(self) -> float:
        return min(v for v, _ in self.support)

    def a_max(self) -> float:
        return max(v for v, _ in self.support)

    def p_min(self) -> float:
        """Mass at the smallest support value."""
        amin = self.a_min()
        return float(sum(p for v, p in self.support if v == amin))

    def mean(self) -> float:
        return float(sum(v * p for v, p in self.support))


@dataclass(frozen=True)
class EnvironmentSpec:
    offspring: OffspringLaw
    weights: WeightLaw

    def ellipticity(self) -> float:
        """eps0 = min(a_min, 1/a_max); weights live in [eps0, 1/eps0]."""
        return min(self.weights.a_min(), 1.0 / self.weights.a_max())

    def tables(self) -> "LawTables":
        return law_tables(self)

    def to_jsonable(self) -> dict:
        return {
            "offspring": {"support": [[int(c), float(p)] for c, p in self.offspring.support]},
            "weights": {"support": [[float(v), float(p)] for v, p in self.weights.support]},
        }


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...]


def validate_spec(spec: EnvironmentSpec) -> ValidationReport:
    """Collect every violation as data; nothing raises from here."""
    bad: list[str] = []

    off = spec.offspring.support
    if not off:
        bad.append("offspring support is empty")
    counts = [c for c, _ in off]
    if any((not isinstance(c, int)) or c < 0 for c in counts):
        bad.append("offspring counts must be integers >= 0")
    if len(set(counts)) != len(counts):
        bad.append("offspring counts must be distinct")
    offp = [p for _, p in off]
    if any(p <= 0 for p in offp):
        bad.append("offspring probabilities must be positive")
    if off and abs(sum(offp) - 1.0) > PROB_SUM_TOL:
        bad.append("offspring probabilities sum to %r, not 1 within %g"
                   % (sum(offp), PROB_SUM_TOL))

    wts = spec.weights.support
    if not wts:
        bad.append("weight support is empty")
    vals = [v for v, _ in wts]
    if any((not math.isfinite(v)) or v <= 0 for v in vals):
        bad.append("weight values must be finite and > 0")
    if len(set(vals)) != len(vals):
        bad.append("weight values must be distinct")
    wp = [p for _, p in wts]
    if any(p <= 0 for p in wp):
        bad.append("weight probabilities must be positive")
    if wts and abs(sum(wp) - 1.0) > PROB_SUM_TOL:
        bad.append("weight probabilities sum to %r, not 1 within %g"
                   % (sum(wp), PROB_SUM_TOL))

    # super-criticality: log E[N] > 0
    if off and not bad:
        if spec.offspring.mean() <= 1.0:
            bad.append("offspring mean %r <= 1: tree is not super-critical"
                       % spec.offspring.mean())

    return ValidationReport(ok=not bad, violations=tuple(bad))


def require_valid(spec: EnvironmentSpec) -> None:
    rep = validate_spec(spec)
    if not rep.ok:
        raise UsageError("invalid environment: " + "; ".join(rep.violations))


# ---------------------------------------------------------------------------
# JSON file format


def spec_from_jsonable(obj) -> EnvironmentSpec:
    try:
        off = tuple((int(c), float(p)) for c, p in obj["offspring"]["support"])
        wts = tuple((float(v), float(p)) for v, p in obj["weights"]["support"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError("malformed environment object: %s" % exc) from exc
    return EnvironmentSpec(OffspringLaw(off), WeightLaw(wts))


def load_env(path: str) -> EnvironmentSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise UsageError("cannot read environment file %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise UsageError("environment file %s is not JSON: %s" % (path, exc)) from exc
    return spec_from_jsonable(obj)


def save_env(spec: EnvironmentSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_jsonable(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Flat law tables shared by the pure and jitted samplers


@dataclass(frozen=True)
class LawTables:
    off_counts: np.ndarray  # int64
    off_cdf: np.ndarray  # float64, cumulative
    w_values: np.ndarray  # float64
    w_cdf: np.ndarray  # float64, cumulative
    max_count: int


def law_tables(spec: EnvironmentSpec) -> LawTables:
    oc = np.array([c for c, _ in spec.offspring.support], dtype=np.int64)
    op = np.cumsum([p for _, p in spec.offspring.support]).astype(np.float64)
    wv = np.array([v for v, _ in spec.weights.support], dtype=np.float64)
    wp = np.cumsum([p for _, p in spec.weights.support]).astype(np.float64)
    return LawTables(oc, op, wv, wp, int(oc.max()))


def draw_offspring_and_weights(tables: LawTables, tree_seed: int, vertex_id: int):
    """Reference sampler: (N, [A_1..A_N]) as a pure function of the key.

    One uniform selects N off the offspring cdf, then one per child selects
    its weight. The jitted kernels consume the stream in exactly this order.
    """
    s = vertex_state(tree_base(tree_seed), vertex_id)
    s = (s + GAMMA) & M64
    n = int(tables.off_counts[draw_index(tables.off_cdf, uniform53(mix64(s)))])
    ws = []
    for _ in range(n):
        s = (s + GAMMA) & M64
        ws.append(float(tables.w_values[draw_index(tables.w_cdf, uniform53(mix64(s)))]))
    return n, ws


# ---------------------------------------------------------------------------
# Arena


class TreeArena:
    """Struct-of-arrays store for one lazily expanded tree."""

    def __init__(self, spec: EnvironmentSpec, tree_seed: int, capacity: int = 1024):
        require_valid(spec)
        self.spec = spec
        self.tables = law_tables(spec)
        self.tree_seed = int(tree_seed)
        cap = max(int(capacity), 16)
        self.parent = np.full(cap, VIRTUAL_PARENT, dtype=np.int64)
        self.generation = np.zeros(cap, dtype=np.int64)
        self.weight = np.ones(cap, dtype=np.float64)
        self.potential = np.zeros(cap, dtype=np.float64)
        self.child_start = np.full(cap, UNEXPANDED, dtype=np.int64)
        self.n_children = np.zeros(cap, dtype=np.int64)
        self.n_vertices = 1  # the root; its weight slot is unused
        self.n_expanded = 0
        self.gen_created = [1]
        self.gen_expanded = [0]

    @classmethod
    def from_arrays(cls, spec: EnvironmentSpec, tree_seed: int, parent, generation,
                    weight, potential, child_start, n_children,
                    n_vertices: int, n_expanded: int,
                    gen_created, gen_expanded) -> "TreeArena":
        """Adopt arrays produced by the jitted expansion kernels."""
        arena = cls.__new__(cls)
        arena.spec = spec
        arena.tables = law_tables(spec)
        arena.tree_seed = int(tree_seed)
        arena.parent = parent
        arena.generation = generation
        arena.weight = weight
        arena.potential = potential
        arena.child_start = child_start
        arena.n_children = n_children
        arena.n_vertices = int(n_vertices)
        arena.n_expanded = int(n_expanded)
        arena.gen_created = list(int(v) for v in gen_created)
        arena.gen_expanded = list(int(v) for v in gen_expanded)
        return arena

    # -- capacity -----------------------------------------------------------

    def _ensure(self, extra: int) -> None:
        need = self.n_vertices + extra
        cap = len(self.parent)
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("parent", "generation", "weight", "potential",
                     "child_start", "n_children"):
            old = getattr(self, name)
            new = np.empty(cap, dtype=old.dtype)
            new[: self.n_vertices] = old[: self.n_vertices]
            if name == "child_start":
                new[self.n_vertices:] = UNEXPANDED
            elif name == "n_children":
                new[self.n_vertices:] = 0  # readable before expansion
            setattr(self, name, new)

    def _ensure_gen(self, g: int) -> None:
        while len(self.gen_created) <= g:
            self.gen_created.append(0)
            self.gen_expanded.append(0)

    # -- queries ------------------------------------------------------------

    def is_expanded(self, x: int) -> bool:
        return self.child_start[x] != UNEXPANDED

    def children(self, x: int) -> range:
        if not self.is_expanded(x):
            raise UsageError("vertex %d is not expanded" % x)
        s = int(self.child_start[x])
        return range(s, s + int(self.n_children[x]))

    def generation_totals(self) -> list[tuple[int, bool]]:
        """Per generation: (created_count, finalized)."""
        out = []
        fin = True
        for g, created in enumerate(self.gen_created):
            if g > 0:
                fin = fin and (self.gen_expanded[g - 1] == self.gen_created[g - 1])
            out.append((created, fin))
        return out

    def generation_finalized(self, g: int) -> bool:
        if g >= len(self.gen_created):
            return False
        ok = True
        for j in range(g):
            ok = ok and (self.gen_expanded[j] == self.gen_created[j])
        return ok

    # -- mutation -----------------------------------------------------------

    def expand_vertex(self, x: int) -> range:
        """Draw (N_x, weights), append the children, return their id range.

        Idempotent: an already expanded vertex just returns its children.
        """
        if x < 0 or x >= self.n_vertices:
            raise UsageError("no such vertex: %d" % x)
        if self.is_expanded(x):
            return self.children(x)
        n, ws = draw_offspring_and_weights(self.tables, self.tree_seed, x)
        self._ensure(n)
        g = int(self.generation[x])
        self._ensure_gen(g + 1)
        start = self.n_vertices
        vx = float(self.potential[x])
        for i in range(n):
            cid = start + i
            self.parent[cid] = x
            self.generation[cid] = g + 1
            self.weight[cid] = ws[i]
            self.potential[cid] = vx - math.log(ws[i])
        self.child_start[x] = start
        self.n_children[x] = n
        self.n_vertices += n
        self.n_expanded += 1
        self.gen_created[g + 1] += n
        self.gen_expanded[g] += 1
        return range(start, start + n)


def detect_extinction(arena: TreeArena) -> bool:
    """True once the whole tree is materialized and finite."""
    return arena.n_expanded == arena.n_vertices


def potential_along_path(arena: TreeArena, x: int):
    """V(z) for z on the root-to-x path, root excluded, x included."""
    if x < 0 or x >= arena.n_vertices:
        raise UsageError("no such vertex: %d" % x)
    out = []
    z = x
    while z != ROOT:
        out.append(float(arena.potential[z]))
        z = int(arena.parent[z])
    out.reverse()
    return out
