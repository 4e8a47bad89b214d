"""Branching-sum verification suites on the potential.

The potential along the tree is a branching random walk; three families of
identities make strong end-to-end checks of the whole sampling stack:

* the many-to-one identity: an expectation of a weighted sum over the
  generation-n vertices equals a plain expectation for one tilted walk S_n,
  whose law is exactly computable by discrete convolution here;
* two unit-mean martingales: the normalized population count, and the sum
  of edge-weight products along each line of descent (the latter only when
  the tilted normalization psi(1) vanishes);
* the per-level maxima of the potential and of its running maximum along
  ancestry lines, whose linear growth rate is the same constant that
  normalizes the fully-visited-generation limits.

Monte Carlo sides sample whole trees by depth-first traversal without
storing them (O(depth) memory); sums over a generation use the edge-weight
products themselves rather than exp(-V), so environments with dyadic
weights give exactly representable terms and the degenerate identities come
out exact in floating point, not merely close.

Each replica r draws from an independent stream seeded by
derive_seed(seed, r); traversal draw order (offspring count, then child
weights left to right, preorder) is shared with the jitted kernels and
pinned by bit-identity tests.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .env import EnvironmentSpec, law_tables, require_valid
from .errors import ResourceError, UsageError
from .regime import psi
from .rng import GAMMA, M64, TREE_SALT, derive_seed, draw_index, mix64, uniform53

MAX_CONV_N = 30
MAX_CONV_ATOMS = 1_000_000
ATOM_MERGE_TOL = 1e-12
MAX_PROFILE_LEVEL = 24
M_PSI1_TOL = 1e-9


@dataclass(frozen=True)
class TiltedStepLaw:
    """One-step law of the tilted walk: values are -log(weight)."""

    support: tuple  # of (value, probability)

    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.support], dtype=np.float64)

    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.support], dtype=np.float64)


@dataclass(frozen=True)
class MaxPotentialRecord:
    """Per-level aggregate of potential maxima over surviving replicas."""

    level: int
    mean_max_v: float
    stderr_max_v: float
    mean_max_vbar: float
    max_max_vbar: float
    surviving: int


def tilted_step_law(spec: EnvironmentSpec) -> TiltedStepLaw:
    """P(S_1 = -log a_j) proportional to a_j p_j; normalized by the mean.

    The normalizer is E[N] e^{-psi(1)}; the probabilities sum to one by the
    definition of psi, up to rounding.
    """
    require_valid(spec)
    scale = spec.offspring.mean() * math.exp(-psi(spec, 1.0))
    support = tuple((-math.log(a), scale * a * p)
                    for a, p in spec.weights.support)
    return TiltedStepLaw(support)


def _convolve_tilted(spec: EnvironmentSpec, n: int):
    """Support and probabilities of S_n, atoms merged within 1e-12."""
    if n < 0 or n > MAX_CONV_N:
        raise UsageError("n must be in 0..%d, got %d" % (MAX_CONV_N, n))
    law = tilted_step_law(spec)
    sv = law.values()
    sp = law.probs()
    values = np.zeros(1, dtype=np.float64)
    probs = np.ones(1, dtype=np.float64)
    for _ in range(n):
        if len(values) * len(sv) > 4 * 10 ** 7:
            raise ResourceError("S_n support beyond %d atoms at n-fold "
                                "convolution" % MAX_CONV_ATOMS)
        v = (values[:, None] + sv[None, :]).ravel()
        p = (probs[:, None] * sp[None, :]).ravel()
        order = np.argsort(v, kind="stable")
        v = v[order]
        p = p[order]
        # merge runs of near-equal atoms, keeping the first value of a run
        keep = np.empty(len(v), dtype=bool)
        keep[0] = True
        np.greater(np.diff(v), ATOM_MERGE_TOL, out=keep[1:])
        idx = np.cumsum(keep) - 1
        values = v[keep]
        probs = np.zeros(len(values), dtype=np.float64)
        np.add.at(probs, idx, p)
        if len(values) > MAX_CONV_ATOMS:
            raise ResourceError("S_n support beyond %d atoms at n-fold "
                                "convolution" % MAX_CONV_ATOMS)
    return values, probs


def sn_tail_exact(spec: EnvironmentSpec, n: int, c: float) -> float:
    """P(S_n >= c) by exact n-fold convolution of the tilted step law."""
    values, probs = _convolve_tilted(spec, n)
    if math.isinf(c) and c < 0:
        return 1.0
    return float(probs[values >= c].sum())


def sn_median(spec: EnvironmentSpec, n: int) -> float:
    """Smallest atom of S_n with cumulative probability >= 1/2."""
    values, probs = _convolve_tilted(spec, n)
    cum = np.cumsum(probs)
    j = int(np.searchsorted(cum, 0.5))
    if j >= len(values):
        j = len(values) - 1
    return float(values[j])


# ---------------------------------------------------------------------------
# Monte Carlo sides


def _replica_seeds(seed: int, replicas: int) -> np.ndarray:
    return np.array([derive_seed(seed, r) for r in range(replicas)],
                    dtype=np.uint64)


def _chunks(total: int, threads: int):
    threads = max(1, min(int(threads), total)) if total else 1
    step = (total + threads - 1) // threads
    return [(lo, min(lo + step, total)) for lo in range(0, total, step)]


def _run_depth_sums(spec, seeds, n, mode, c, threads, engine):
    t = law_tables(spec)
    out = np.zeros(len(seeds), dtype=np.float64)
    if engine == "python":
        for r in range(len(seeds)):
            out[r] = _depth_sum_py(spec, int(seeds[r]), n, mode, c)
        return out
    parts = _chunks(len(seeds), threads)
    if len(parts) <= 1:
        _kernel.depth_sums(t.off_counts, t.off_cdf, t.w_values, t.w_cdf,
                           seeds, np.int64(n), np.int64(mode), float(c),
                           np.int64(t.max_count), out)
        return out
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        futs = [pool.submit(_kernel.depth_sums, t.off_counts, t.off_cdf,
                            t.w_values, t.w_cdf, seeds[lo:hi], np.int64(n),
                            np.int64(mode), float(c), np.int64(t.max_count),
                            out[lo:hi])
                for lo, hi in parts]
        for f in futs:
            f.result()
    return out


def _depth_sum_py(spec: EnvironmentSpec, replica_seed: int, n: int, mode: int,
                  c: float) -> float:
    """Pure-Python twin of _kernel.depth_sums for one replica."""
    t = law_tables(spec)
    s = mix64((replica_seed & M64) ^ TREE_SALT)

    def draw(cdf):
        nonlocal s
        s = (s + GAMMA) & M64
        return draw_index(cdf, uniform53(mix64(s)))

    acc = 0.0
    n0 = int(t.off_counts[draw(t.off_cdf)])
    w0 = [float(t.w_values[draw(t.w_cdf)]) for _ in range(n0)]
    if n == 0:
        return 1.0
    stack = [(n0, 0, 1.0, 0.0, w0)]
    while stack:
        nd, i, prod, v, ws = stack[-1]
        if i == nd:
            stack.pop()
            continue
        stack[-1] = (nd, i + 1, prod, v, ws)
        a = ws[i]
        cprod = prod * a
        cv = v - math.log(a)
        if len(stack) == n:
            if mode == 0:
                acc += 1.0
            elif mode == 1:
                acc += cprod
            elif cv >= c:
                acc += cprod
        else:
            cn = int(t.off_counts[draw(t.off_cdf)])
            cw = [float(t.w_values[draw(t.w_cdf)]) for _ in range(cn)]
            stack.append((cn, 0, cprod, cv, cw))
    return acc


def _mean_stderr(x: np.ndarray):
    mean = float(np.mean(x))
    if len(x) < 2:
        return mean, 0.0
    return mean, float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _z_score(lhs: float, rhs: float, stderr: float) -> float:
    if stderr == 0.0:
        return 0.0 if abs(lhs - rhs) <= 1e-12 else math.inf
    return (lhs - rhs) / stderr


def verify_many_to_one(spec: EnvironmentSpec, n: int, c: float, replicas: int,
                       seed: int, threads: int = 1, engine: str = "auto") -> dict:
    """Check E[sum over |x|=n of (prod weights) 1{V(x)>=c}] e^{-n psi(1)}
    against the exact tilted tail P(S_n >= c).

    Degenerate settings (point-mass S_n with stderr 0) get z = 0 when the
    two sides agree to 1e-12 and z = inf otherwise.
    """
    require_valid(spec)
    if n < 0 or n > 12:
        raise UsageError("many-to-one depth n must be in 0..12")
    if replicas < 1:
        raise UsageError("replicas must be positive")
    rhs = sn_tail_exact(spec, n, c)
    seeds = _replica_seeds(seed, replicas)
    raw = _run_depth_sums(spec, seeds, n, 2, c, threads, engine)
    scale = math.exp(-psi(spec, 1.0) * n)
    vals = raw * scale if scale != 1.0 else raw
    lhs, stderr = _mean_stderr(vals)
    return {"lhs_estimate": lhs, "lhs_stderr": stderr, "rhs_exact": rhs,
            "z_score": _z_score(lhs, rhs, stderr)}


def martingale_mean(spec: EnvironmentSpec, which: str, n: int, replicas: int,
                    seed: int, threads: int = 1, engine: str = "auto") -> dict:
    """Monte Carlo mean of a unit-mean martingale at depth n.

    'W' is the population count over its mean to the n-th power; 'M' is the
    sum over |x|=n of the weight products along the ancestry, which is a
    martingale only when psi(1) = 0 (enforced).
    """
    require_valid(spec)
    if which not in ("W", "M"):
        raise UsageError("which must be 'W' or 'M'")
    if n < 0 or n > MAX_CONV_N:
        raise UsageError("depth n must be in 0..%d" % MAX_CONV_N)
    if replicas < 1:
        raise UsageError("replicas must be positive")
    if which == "M" and abs(psi(spec, 1.0)) > M_PSI1_TOL:
        raise UsageError("M is a martingale only when psi(1) = 0; got %.3e"
                         % psi(spec, 1.0))
    seeds = _replica_seeds(seed, replicas)
    if which == "W":
        raw = _run_depth_sums(spec, seeds, n, 0, 0.0, threads, engine)
        vals = raw / spec.offspring.mean() ** n
    else:
        vals = _run_depth_sums(spec, seeds, n, 1, 0.0, threads, engine)
    mean, stderr = _mean_stderr(vals)
    return {"mean": mean, "stderr": stderr}


def max_potential_profile(spec: EnvironmentSpec, levels, replicas: int,
                          seed: int, threads: int = 1, engine: str = "auto"):
    """Per-level maxima of V and of its ancestry running maximum.

    Full expansion to max(levels) per replica (depth-first, no storage);
    aggregates are over replicas whose tree still has vertices at the level.
    Returns one MaxPotentialRecord per requested level.
    """
    require_valid(spec)
    levels = sorted(set(int(l) for l in levels))
    if not levels or levels[0] < 1:
        raise UsageError("levels must be positive integers")
    if levels[-1] > MAX_PROFILE_LEVEL:
        raise UsageError("levels beyond %d need more than the %d-vertex "
                         "budget" % (MAX_PROFILE_LEVEL, 2 * 10 ** 7))
    if replicas < 1:
        raise UsageError("replicas must be positive")
    top = levels[-1]
    seeds = _replica_seeds(seed, replicas)
    maxv = np.full((replicas, top + 1), -np.inf, dtype=np.float64)
    maxvbar = np.full((replicas, top + 1), -np.inf, dtype=np.float64)
    z = np.zeros((replicas, top + 1), dtype=np.int64)
    t = law_tables(spec)
    if engine == "python":
        for r in range(replicas):
            _maxpot_py(spec, int(seeds[r]), top, maxv[r], maxvbar[r], z[r])
    else:
        parts = _chunks(replicas, threads)
        if len(parts) <= 1:
            _kernel.maxpot_profiles(t.off_counts, t.off_cdf, t.w_values,
                                    t.w_cdf, seeds, np.int64(top),
                                    np.int64(t.max_count), maxv, maxvbar, z)
        else:
            with ThreadPoolExecutor(max_workers=len(parts)) as pool:
                futs = [pool.submit(_kernel.maxpot_profiles, t.off_counts,
                                    t.off_cdf, t.w_values, t.w_cdf,
                                    seeds[lo:hi], np.int64(top),
                                    np.int64(t.max_count), maxv[lo:hi],
                                    maxvbar[lo:hi], z[lo:hi])
                        for lo, hi in parts]
                for f in futs:
                    f.result()
    out = []
    for level in levels:
        alive = z[:, level] > 0
        k = int(np.count_nonzero(alive))
        if k == 0:
            out.append(MaxPotentialRecord(level, math.nan, math.nan,
                                          math.nan, math.nan, 0))
            continue
        mv = maxv[alive, level]
        mvb = maxvbar[alive, level]
        mean_mv, se_mv = _mean_stderr(mv)
        out.append(MaxPotentialRecord(
            level=level,
            mean_max_v=mean_mv,
            stderr_max_v=se_mv,
            mean_max_vbar=float(np.mean(mvb)),
            max_max_vbar=float(np.max(mvb)),
            surviving=k,
        ))
    return out


def _maxpot_py(spec: EnvironmentSpec, replica_seed: int, top: int,
               maxv: np.ndarray, maxvbar: np.ndarray, z: np.ndarray) -> None:
    """Pure-Python twin of _kernel.maxpot_profiles for one replica."""
    t = law_tables(spec)
    s = mix64((replica_seed & M64) ^ TREE_SALT)

    def draw(cdf):
        nonlocal s
        s = (s + GAMMA) & M64
        return draw_index(cdf, uniform53(mix64(s)))

    n0 = int(t.off_counts[draw(t.off_cdf)])
    w0 = [float(t.w_values[draw(t.w_cdf)]) for _ in range(n0)]
    z[0] += 1
    stack = [(n0, 0, 0.0, -math.inf, w0)]
    while stack:
        nd, i, v, vb, ws = stack[-1]
        if i == nd:
            stack.pop()
            continue
        stack[-1] = (nd, i + 1, v, vb, ws)
        a = ws[i]
        cv = v - math.log(a)
        cvb = cv if cv > vb else vb
        d = len(stack)
        z[d] += 1
        if cv > maxv[d]:
            maxv[d] = cv
        if cvb > maxvbar[d]:
            maxvbar[d] = cvb
        if d < top:
            cn = int(t.off_counts[draw(t.off_cdf)])
            cw = [float(t.w_values[draw(t.w_cdf)]) for _ in range(cn)]
            stack.append((cn, 0, cv, cvb, cw))
