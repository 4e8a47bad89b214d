"""Jitted inner loops: tree expansion, the walk, and branching-sum DFS.

Every routine here mirrors, bit for bit, a pure-Python reference in env.py,
walk.py, or brw.py: same split-mix constants, same draw order, same float
operation order. tests/test_walk.py and tests/test_brw.py assert the
identity. Keep the two sides in lockstep when editing.

All uint64 arithmetic stays uint64 (numba unifies mixed int64/uint64 to
float64, which would silently destroy the streams).
"""

import math

import numpy as np
from numba import njit

U64 = np.uint64
GAMMA = U64(0x9E3779B97F4A7C15)
MIX1 = U64(0xBF58476D1CE4E5B9)
MIX2 = U64(0x94D049BB133111EB)
S30 = U64(30)
S27 = U64(27)
S31 = U64(31)
S11 = U64(11)
ONE = U64(1)
TREE_SALT = U64(0xA0761D6478BD642F)
WALK_SALT = U64(0xE7037ED1A0B428DB)
DERIVE_SALT = U64(0x8EBC6AF09C88C6E3)
MULT = U64(0xC2B2AE3D27D4EB4F)
INV53 = 1.0 / 9007199254740992.0

# walk_segment status codes
OK_TARGET = 1
GROW_VERTICES = 2
EXTINCT = 3
TRUNCATED = 4
GROW_GENS = 5

# meta slots
M_NVERT = 0
M_NEXP = 1
M_STEPS = 2
M_POS = 3
M_RETURNS = 4
M_XSTAR = 5
M_R = 6
M_FRONT = 7
M_VPLT = 8
M_MAXGEN = 9


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> S30)) * MIX1
    z = (z ^ (z >> S27)) * MIX2
    return z ^ (z >> S31)


@njit(cache=True, inline="always")
def _u53(u):
    return np.float64(u >> S11) * INV53


@njit(cache=True)
def derive_seed(master, tokens):
    s = _mix64(master ^ DERIVE_SALT)
    for i in range(tokens.shape[0]):
        s = _mix64((s + GAMMA) ^ (tokens[i] * MULT))
    return s


@njit(cache=True, inline="always")
def _draw_index(cdf, u):
    for j in range(cdf.shape[0]):
        if u < cdf[j]:
            return j
    return cdf.shape[0] - 1


# ---------------------------------------------------------------------------
# breadth-first freeze


@njit(cache=True)
def freeze_tree(off_counts, off_cdf, w_values, w_cdf, tree_seed, depth,
                max_vertices):
    cap = 1024
    parent = np.empty(cap, np.int64)
    generation = np.empty(cap, np.int64)
    weight = np.empty(cap, np.float64)
    potential = np.empty(cap, np.float64)
    child_start = np.full(cap, -1, np.int64)
    n_children = np.zeros(cap, np.int64)
    gen_created = np.zeros(depth + 2, np.int64)
    gen_expanded = np.zeros(depth + 2, np.int64)

    parent[0] = -1
    generation[0] = 0
    weight[0] = 1.0
    potential[0] = 0.0
    gen_created[0] = 1
    n_vertices = 1
    n_expanded = 0
    status = 0

    base = _mix64(tree_seed ^ TREE_SALT)
    x = 0
    while x < n_vertices:
        g = generation[x]
        if g >= depth:
            break
        s = _mix64(base + (U64(x) + ONE) * GAMMA)
        s = s + GAMMA
        n = off_counts[_draw_index(off_cdf, _u53(_mix64(s)))]
        if n_vertices + n > max_vertices:
            status = g + 1
            break
        while n_vertices + n > cap:
            cap *= 2
            np_parent = np.empty(cap, np.int64)
            np_gen = np.empty(cap, np.int64)
            np_w = np.empty(cap, np.float64)
            np_pot = np.empty(cap, np.float64)
            np_cs = np.full(cap, -1, np.int64)
            np_nc = np.zeros(cap, np.int64)
            np_parent[:n_vertices] = parent[:n_vertices]
            np_gen[:n_vertices] = generation[:n_vertices]
            np_w[:n_vertices] = weight[:n_vertices]
            np_pot[:n_vertices] = potential[:n_vertices]
            np_cs[:n_vertices] = child_start[:n_vertices]
            np_nc[:n_vertices] = n_children[:n_vertices]
            parent, generation, weight = np_parent, np_gen, np_w
            potential, child_start, n_children = np_pot, np_cs, np_nc
        cs = n_vertices
        vx = potential[x]
        for i in range(n):
            s = s + GAMMA
            a = w_values[_draw_index(w_cdf, _u53(_mix64(s)))]
            parent[cs + i] = x
            generation[cs + i] = g + 1
            weight[cs + i] = a
            potential[cs + i] = vx - math.log(a)
        child_start[x] = cs
        n_children[x] = n
        n_vertices += n
        n_expanded += 1
        gen_created[g + 1] += n
        gen_expanded[g] += 1
        x += 1

    return (parent, generation, weight, potential, child_start, n_children,
            n_vertices, n_expanded, gen_created, gen_expanded, status)


# ---------------------------------------------------------------------------
# the walk
#
# Arena arrays are int32/uint8 (ids fit: the state guards at 2**31 vertices).
# No per-vertex transition table: a step draws one uniform and scans the
# child weights. Null-recurrent walks visit ~n/2 distinct vertices in n
# steps, so at the 2**28 step cap the arena holds ~1.3e8 vertices and every
# byte per vertex counts; 25 bytes/vertex keeps the worst replica under 4GB.


@njit(cache=True, nogil=True)
def walk_segment(parent, child_start, n_children, gen, weight, visited,
                 gen_created, gen_expanded, visited_gen, meta, rng,
                 off_counts, off_cdf, w_values, w_cdf, tree_base, max_off,
                 target_kind, target_value, step_cap):
    vcap = parent.shape[0]
    gcap = gen_created.shape[0]

    while True:
        if meta[M_NEXP] == meta[M_NVERT]:
            return EXTINCT
        if meta[M_STEPS] >= step_cap:
            return TRUNCATED
        if meta[M_NVERT] + max_off > vcap:
            return GROW_VERTICES
        if meta[M_MAXGEN] + 2 > gcap:
            return GROW_GENS

        pos = meta[M_POS]
        if pos == -1:
            nxt = np.int64(0)
        else:
            cs = np.int64(child_start[pos])
            k = np.int64(n_children[pos])
            sw = 0.0
            for i in range(k):
                sw += weight[cs + i]
            rng[0] = rng[0] + GAMMA
            x = _u53(_mix64(rng[0])) * (1.0 + sw)
            if x < 1.0:
                nxt = np.int64(parent[pos])
            else:
                # land on the last child if rounding pushes x past the sum
                nxt = cs + k - 1
                acc = 1.0
                for i in range(k - 1):
                    acc += weight[cs + i]
                    if x < acc:
                        nxt = cs + i
                        break

        meta[M_STEPS] += 1
        meta[M_POS] = nxt

        if nxt == -1:
            meta[M_VPLT] += 1
        else:
            if nxt == 0:
                meta[M_RETURNS] += 1
            g = np.int64(gen[nxt])
            if visited[nxt] == 0 and nxt != 0:
                visited[nxt] = 1
                if child_start[nxt] == -1:
                    # lazy expansion, keyed by (tree_seed, vertex id)
                    s = _mix64(tree_base + (U64(nxt) + ONE) * GAMMA)
                    s = s + GAMMA
                    n = off_counts[_draw_index(off_cdf, _u53(_mix64(s)))]
                    cs2 = meta[M_NVERT]
                    for i in range(n):
                        s = s + GAMMA
                        a = w_values[_draw_index(w_cdf, _u53(_mix64(s)))]
                        cid = cs2 + i
                        weight[cid] = a
                        parent[cid] = nxt
                        child_start[cid] = -1
                        n_children[cid] = 0
                        gen[cid] = g + 1
                        visited[cid] = 0
                    child_start[nxt] = cs2
                    n_children[nxt] = n
                    meta[M_NVERT] = cs2 + n
                    meta[M_NEXP] += 1
                    gen_created[g + 1] += n
                    gen_expanded[g] += 1
                    if g + 1 > meta[M_MAXGEN]:
                        meta[M_MAXGEN] = g + 1
                visited_gen[g] += 1
                if g > meta[M_XSTAR]:
                    meta[M_XSTAR] = g
                f = meta[M_FRONT]
                while (gen_created[f] > 0
                       and visited_gen[f] == gen_created[f]
                       and gen_expanded[f - 1] == gen_created[f - 1]):
                    meta[M_R] = f
                    f += 1
                    meta[M_FRONT] = f

        if target_kind == 0:
            if meta[M_STEPS] >= target_value:
                return OK_TARGET
        elif target_kind == 1:
            if nxt == 0 and meta[M_RETURNS] >= target_value:
                return OK_TARGET
        else:
            if nxt != -1 and gen[nxt] >= target_value:
                return OK_TARGET


# ---------------------------------------------------------------------------
# depth-first branching sums (no tree storage, O(depth) memory)
#
# Stream convention per replica: sequential split-mix seeded with
# mix64(replica_seed ^ TREE_SALT); draws in DFS preorder, each node drawing
# its offspring count then all child weights left to right.


@njit(cache=True, nogil=True)
def depth_sums(off_counts, off_cdf, w_values, w_cdf, seeds, n, mode, c,
               max_off, out):
    """Per replica: sum over depth-n vertices.

    mode 0: vertex count Z_n; mode 1: sum of weight products; mode 2: sum of
    weight products restricted to potential >= c.
    """
    levels = n + 1
    nst = np.empty(levels, np.int64)
    ist = np.empty(levels, np.int64)
    prodst = np.empty(levels, np.float64)
    vst = np.empty(levels, np.float64)
    wbuf = np.empty((levels, max_off), np.float64)

    for r in range(seeds.shape[0]):
        s = _mix64(seeds[r] ^ TREE_SALT)
        acc = 0.0
        # enter the root
        s = s + GAMMA
        n0 = off_counts[_draw_index(off_cdf, _u53(_mix64(s)))]
        for j in range(n0):
            s = s + GAMMA
            wbuf[0, j] = w_values[_draw_index(w_cdf, _u53(_mix64(s)))]
        nst[0] = n0
        ist[0] = 0
        prodst[0] = 1.0
        vst[0] = 0.0
        if n == 0:
            acc = 1.0  # the root itself
        else:
            d = 0
            while d >= 0:
                if ist[d] == nst[d]:
                    d -= 1
                    continue
                i = ist[d]
                ist[d] += 1
                a = wbuf[d, i]
                prod = prodst[d] * a
                v = vst[d] - math.log(a)
                cd = d + 1
                if cd == n:
                    if mode == 0:
                        acc += 1.0
                    elif mode == 1:
                        acc += prod
                    else:
                        if v >= c:
                            acc += prod
                else:
                    s = s + GAMMA
                    nd = off_counts[_draw_index(off_cdf, _u53(_mix64(s)))]
                    for j in range(nd):
                        s = s + GAMMA
                        wbuf[cd, j] = w_values[_draw_index(w_cdf, _u53(_mix64(s)))]
                    nst[cd] = nd
                    ist[cd] = 0
                    prodst[cd] = prod
                    vst[cd] = v
                    d = cd
        out[r] = acc


@njit(cache=True, nogil=True)
def maxpot_profiles(off_counts, off_cdf, w_values, w_cdf, seeds, levels,
                    max_off, out_maxv, out_maxvbar, out_z):
    """Per replica and level: max potential, max running-max potential, count.

    out_maxv/out_maxvbar start at -inf; levels is the deepest generation.
    """
    nst = np.empty(levels + 1, np.int64)
    ist = np.empty(levels + 1, np.int64)
    vst = np.empty(levels + 1, np.float64)
    vbst = np.empty(levels + 1, np.float64)
    wbuf = np.empty((levels + 1, max_off), np.float64)

    for r in range(seeds.shape[0]):
        s = _mix64(seeds[r] ^ TREE_SALT)
        s = s + GAMMA
        n0 = off_counts[_draw_index(off_cdf, _u53(_mix64(s)))]
        for j in range(n0):
            s = s + GAMMA
            wbuf[0, j] = w_values[_draw_index(w_cdf, _u53(_mix64(s)))]
        nst[0] = n0
        ist[0] = 0
        vst[0] = 0.0
        vbst[0] = -np.inf
        out_z[r, 0] = 1
        d = 0
        while d >= 0:
            if ist[d] == nst[d]:
                d -= 1
                continue
            i = ist[d]
            ist[d] += 1
            a = wbuf[d, i]
            v = vst[d] - math.log(a)
            vb = vbst[d]
            if v > vb:
                vb = v
            cd = d + 1
            out_z[r, cd] += 1
            if v > out_maxv[r, cd]:
                out_maxv[r, cd] = v
            if vb > out_maxvbar[r, cd]:
                out_maxvbar[r, cd] = vb
            if cd < levels:
                s = s + GAMMA
                nd = off_counts[_draw_index(off_cdf, _u53(_mix64(s)))]
                for j in range(nd):
                    s = s + GAMMA
                    wbuf[cd, j] = w_values[_draw_index(w_cdf, _u53(_mix64(s)))]
                nst[cd] = nd
                ist[cd] = 0
                vst[cd] = v
                vbst[cd] = vb
                d = cd
