"""Deterministic 64-bit randomness.

Everything random in this package flows through two primitives:

* a split-mix style stream (``state += GAMMA; output = mix64(state)``), and
* a keyed, counter-based variant of the same thing for tree vertices, so a
  vertex's offspring count and child weights depend only on
  ``(tree_seed, vertex_id)`` and not on the order in which the walk happens
  to expand the tree.

`derive_seed` is the documented seed-derivation function used by the harness
(master seed -> per-replica tree and walk seeds). Its behaviour is frozen by
test vectors in ``tests/data/seed_vectors.json``; changing any constant here
invalidates every recorded run.

The numba kernels re-implement these functions word for word on uint64;
``tests/test_walk.py`` asserts bit identity between the two.
"""

from __future__ import annotations

M64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15  # split-mix increment
MULT = 0xC2B2AE3D27D4EB4F  # token stirring multiplier

TREE_SALT = 0xA0761D6478BD642F
WALK_SALT = 0xE7037ED1A0B428DB
DERIVE_SALT = 0x8EBC6AF09C88C6E3

# token for the per-replica walk stream, = little-endian bytes of b"walkseed"
WALK_TOKEN = int.from_bytes(b"walkseed", "little")

_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """Finalizing avalanche (split-mix style). Bijective on uint64."""
    z &= M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *tokens: int) -> int:
    """Fold integer tokens into a master seed, one mix round per token.

    Used as h(master, replica, attempt) for tree seeds and
    h(master, replica, WALK_TOKEN) for walk seeds, so resampling an extinct
    replica (attempt += 1) never perturbs any other replica's streams.
    """
    s = mix64((master_seed & M64) ^ DERIVE_SALT)
    for t in tokens:
        s = mix64((s + GAMMA) ^ ((t * MULT) & M64))
    return s


def uniform53(u: int) -> float:
    """Map a uint64 to a float in [0, 1) using the top 53 bits."""
    return (u >> 11) * _INV53


class Stream:
    """Sequential split-mix stream. Cheap, deterministic, seedable."""

    __slots__ = ("state",)

    def __init__(self, seed: int, salt: int = WALK_SALT):
        self.state = mix64((seed & M64) ^ salt)

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & M64
        return mix64(self.state)

    def next_unit(self) -> float:
        return uniform53(self.next_u64())


def tree_base(tree_seed: int) -> int:
    """Per-tree constant from which every vertex stream is keyed."""
    return mix64((tree_seed & M64) ^ TREE_SALT)


def vertex_state(base: int, vertex_id: int) -> int:
    """Initial stream state for one vertex; counter-based in vertex_id."""
    return mix64((base + ((vertex_id + 1) * GAMMA)) & M64)


def vertex_uniforms(tree_seed: int, vertex_id: int, count: int) -> list[float]:
    """The first `count` uniforms of a vertex's expansion stream."""
    s = vertex_state(tree_base(tree_seed), vertex_id)
    out = []
    for _ in range(count):
        s = (s + GAMMA) & M64
        out.append(uniform53(mix64(s)))
    return out


def draw_index(cdf, u: float) -> int:
    """Smallest j with u < cdf[j]; last index as a float-safety net."""
    for j in range(len(cdf)):
        if u < cdf[j]:
            return j
    return len(cdf) - 1
