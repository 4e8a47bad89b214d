"""Environment laws, validation rules and the lazy tree arena."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rwre
from rwre import env as env_mod
from rwre.errors import UsageError


def _spec(off, wts):
    return rwre.spec_from_jsonable({"offspring": {"support": off},
                                    "weights": {"support": wts}})


GOOD = {"offspring": {"support": [[2, 1.0]]},
        "weights": {"support": [[0.5, 1.0]]}}


# -- validation -------------------------------------------------------------

def test_reference_environments_valid(env_half, env_04, env_07, env_updrift,
                                      env_critical, env_sparse):
    for spec in (env_half, env_04, env_07, env_updrift, env_critical,
                 env_sparse):
        rep = rwre.validate_spec(spec)
        assert rep.ok and rep.violations == ()


@pytest.mark.parametrize("off,wts,needle", [
    ([], [[0.5, 1.0]], "offspring support is empty"),
    ([[-1, 1.0]], [[0.5, 1.0]], "integers >= 0"),
    ([[2, 0.5], [2, 0.5]], [[0.5, 1.0]], "counts must be distinct"),
    ([[2, -0.2], [3, 1.2]], [[0.5, 1.0]], "probabilities must be positive"),
    ([[2, 0.6], [3, 0.6]], [[0.5, 1.0]], "sum to"),
    ([[2, 1.0]], [], "weight support is empty"),
    ([[2, 1.0]], [[0.0, 1.0]], "finite and > 0"),
    ([[2, 1.0]], [[-0.5, 1.0]], "finite and > 0"),
    ([[2, 1.0]], [[0.5, 0.5], [0.5, 0.5]], "values must be distinct"),
    ([[2, 1.0]], [[0.5, 0.7], [0.6, 0.7]], "sum to"),
    ([[0, 0.5], [2, 0.5]], [[0.5, 1.0]], "not super-critical"),
    ([[1, 1.0]], [[0.5, 1.0]], "not super-critical"),
])
def test_validation_violations(off, wts, needle):
    rep = rwre.validate_spec(_spec(off, wts))
    assert not rep.ok
    assert any(needle in v for v in rep.violations), rep.violations


def test_infinite_weight_rejected():
    rep = rwre.validate_spec(_spec([[2, 1.0]], [[math.inf, 1.0]]))
    assert not rep.ok


def test_require_valid_raises():
    bad = _spec([[1, 1.0]], [[0.5, 1.0]])
    with pytest.raises(UsageError, match="invalid environment"):
        env_mod.require_valid(bad)


def test_probability_sum_tolerance():
    # a 1e-13 defect is inside the documented tolerance
    rep = rwre.validate_spec(_spec([[2, 0.5], [3, 0.5 - 1e-13]],
                                   [[0.5, 1.0]]))
    assert rep.ok


# -- JSON round trip --------------------------------------------------------

def test_jsonable_round_trip(env_sparse):
    clone = rwre.spec_from_jsonable(env_sparse.to_jsonable())
    assert clone == env_sparse


def test_save_load_round_trip(tmp_path, env_updrift):
    p = tmp_path / "env.json"
    rwre.save_env(env_updrift, str(p))
    assert rwre.load_env(str(p)) == env_updrift


def test_load_missing_file(tmp_path):
    with pytest.raises(UsageError, match="cannot read"):
        rwre.load_env(str(tmp_path / "nope.json"))


def test_load_not_json(tmp_path):
    p = tmp_path / "junk.json"
    p.write_text("{ not json")
    with pytest.raises(UsageError, match="not JSON"):
        rwre.load_env(str(p))


def test_malformed_object():
    with pytest.raises(UsageError, match="malformed environment"):
        rwre.spec_from_jsonable({"offspring": {"support": [[2, 1.0]]}})


# -- law moments and tables -------------------------------------------------

def test_moments(env_updrift):
    assert env_updrift.offspring.mean() == 2.0
    ev = 2.0 * 0.1 + (1.0 / 3.0) * 0.9
    assert abs(env_updrift.weights.mean() - ev) < 1e-15
    assert env_updrift.weights.a_min() == 1.0 / 3.0
    assert env_updrift.weights.a_max() == 2.0
    assert env_updrift.ellipticity() == 1.0 / 3.0


def test_law_tables(env_sparse):
    t = env_mod.law_tables(env_sparse)
    assert list(t.off_counts) == [0, 1, 3]
    assert t.max_count == 3
    assert t.off_cdf[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(t.off_cdf) > 0)
    assert t.w_cdf[-1] == pytest.approx(1.0, abs=1e-12)
    assert len(t.w_values) == 2


def test_draw_offspring_and_weights(env_sparse):
    t = env_mod.law_tables(env_sparse)
    n, ws = env_mod.draw_offspring_and_weights(t, 42, 7)
    assert n in (0, 1, 3)
    assert len(ws) == n
    assert all(w in (2.0, 1.0 / 3.0) for w in ws)
    # pure in the key, sensitive to every part of it
    assert (n, ws) == env_mod.draw_offspring_and_weights(t, 42, 7)
    draws = {(42, 8), (42, 9), (43, 7)}
    assert any(env_mod.draw_offspring_and_weights(t, s, v) != (n, ws)
               for s, v in draws)


@settings(max_examples=30)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**31 - 1))
def test_draws_stay_on_support(seed, vid):
    spec = _spec([[0, 0.2], [1, 0.3], [3, 0.5]],
                 [[2.0, 0.4], [0.25, 0.6]])
    t = env_mod.law_tables(spec)
    n, ws = env_mod.draw_offspring_and_weights(t, seed, vid)
    assert n in (0, 1, 3)
    assert all(w in (2.0, 0.25) for w in ws)


# -- arena ------------------------------------------------------------------

def test_arena_root_state(env_half):
    a = rwre.TreeArena(env_half, 0)
    assert a.n_vertices == 1
    assert a.n_expanded == 0
    assert int(a.parent[rwre.ROOT]) == rwre.VIRTUAL_PARENT
    assert not a.is_expanded(rwre.ROOT)
    with pytest.raises(UsageError, match="not expanded"):
        a.children(rwre.ROOT)


def test_arena_expand_and_idempotence(env_half):
    a = rwre.TreeArena(env_half, 5)
    kids = a.expand_vertex(0)
    assert list(kids) == [1, 2]
    assert a.expand_vertex(0) == kids
    assert a.n_expanded == 1
    assert int(a.generation[1]) == 1
    assert float(a.weight[1]) == 0.5
    assert float(a.potential[1]) == pytest.approx(math.log(2.0), abs=1e-15)
    with pytest.raises(UsageError, match="no such vertex"):
        a.expand_vertex(a.n_vertices)


def test_expansion_is_pure_in_the_vertex_id(env_sparse):
    # draws attach to ids, so expanding known ids in any order agrees
    a = rwre.TreeArena(env_sparse, 11)
    b = rwre.TreeArena(env_sparse, 11)
    a.expand_vertex(0)
    b.expand_vertex(0)
    first = list(a.children(0))
    if len(first) >= 2:
        x, y = first[0], first[1]
        a.expand_vertex(x)
        a.expand_vertex(y)
        b.expand_vertex(y)
        b.expand_vertex(x)
        assert int(a.n_children[x]) == int(b.n_children[x])
        assert int(a.n_children[y]) == int(b.n_children[y])
        assert float(a.weight[x]) == float(b.weight[x])


def test_arena_growth_preserves_content(env_half):
    a = rwre.TreeArena(env_half, 3, capacity=16)
    frontier = [0]
    for _ in range(6):
        nxt = []
        for x in frontier:
            nxt.extend(a.expand_vertex(x))
        frontier = nxt
    # full binary tree: 2^7 - 1 vertices
    assert a.n_vertices == 127
    assert int(a.gen_created[6]) == 64
    assert a.generation_finalized(6)
    assert not a.generation_finalized(7)
    kids = list(a.children(0))
    assert kids == [1, 2]
    assert np.all(a.child_start[a.n_vertices:a.n_vertices + 8] ==
                  rwre.UNEXPANDED)


def test_generation_totals(env_half):
    a = rwre.TreeArena(env_half, 1)
    a.expand_vertex(0)
    totals = a.generation_totals()
    assert totals[0] == (1, True)
    assert totals[1] == (2, True)  # all of generation 0 is expanded
    a.expand_vertex(1)
    totals = a.generation_totals()
    assert totals[2] == (2, False)  # vertex 2 still unexpanded


def test_potential_along_path(env_half):
    a = rwre.TreeArena(env_half, 9)
    x = 0
    for _ in range(5):
        x = a.expand_vertex(x)[0]
    pots = env_mod.potential_along_path(a, x)
    want = [(g + 1) * math.log(2.0) for g in range(5)]
    assert pots == pytest.approx(want, abs=1e-12)
    assert env_mod.potential_along_path(a, 0) == []
    with pytest.raises(UsageError):
        env_mod.potential_along_path(a, 10**6)


def test_detect_extinction():
    spec = _spec([[0, 0.4], [2, 0.6]], [[0.5, 1.0]])
    hit = False
    for seed in range(40):
        a = rwre.TreeArena(spec, seed)
        pending = [0]
        while pending and a.n_vertices < 6000:
            x = pending.pop()
            pending.extend(a.expand_vertex(x))
        if not pending and rwre.detect_extinction(a):
            hit = True
            assert a.n_expanded == a.n_vertices
            break
    assert hit, "no extinct tree in 40 seeds (probability ~ (1/3)^40)"
