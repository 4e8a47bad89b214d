"""Acceptance gate: one test per numbered criterion, one verdict line each.

Verdict lines are echoed after the run summary (see conftest). The slow
piece is the return-time grid inside criterion 6, which walks about a
billion steps; the module as a whole fits a half-hour budget on one core.
"""

import math

import conftest
import pytest

import rwre
from rwre import brw, cli, exact, regime
from rwre.harness import (EXPONENT, SLOPE, ExperimentPlan, dyadic_grid,
                          estimate_limit, run_plan,
                          OBS_LOG_LROOT, OBS_R, OBS_RTILDE, OBS_XSTAR)
from rwre.walk import ROOT_RETURNS, STEPS, StopRule


def _verdict(num, ok, detail):
    line = "CRITERION %d: %s  [%s]" % (num, "PASS" if ok else "FAIL", detail)
    conftest.record_criterion(line)
    print(line)
    assert ok, line


def test_criterion_1_regime_constants(env_half, env_04, env_07, env_updrift,
                                      env_critical):
    checks = []
    a = regime.classify(env_half)
    checks += [a.regime == "NULL_REC_SUBDIFFUSIVE",
               abs(a.gamma_tilde - math.log(2.0)) <= 1e-8,
               a.kappa == math.inf,
               abs(a.predicted.r_limit - 1.0 / (2.0 * math.log(2.0))) <= 1e-8]
    b = regime.classify(env_04)
    checks += [b.regime == "POS_REC_CHI_NEG",
               abs(b.gamma_tilde - math.log(2.5)) <= 1e-8]
    checks.append(regime.classify(env_07).regime == "TRANSIENT")
    d = regime.classify(env_updrift)
    checks += [d.regime == "NULL_REC_SUBDIFFUSIVE",
               d.kappa is not None and abs(d.kappa - 2.0) <= 1e-6]
    e = regime.classify(env_critical)
    checks += [e.regime == "NULL_REC_CRITICAL",
               abs(e.chi) <= 1e-7,
               abs(e.psi_prime_1) <= 1e-7]
    _verdict(1, all(checks),
             "five reference environments, %d/%d constants in tolerance"
             % (sum(checks), len(checks)))


def test_criterion_2_oracle_equivalence(env_half, env_updrift, env_sparse,
                                        env_critical):
    mix = [env_half, env_updrift, env_sparse, env_critical]
    worst = 0.0
    cases = 0
    seed = 0
    while cases < 50:
        spec = mix[cases % len(mix)]
        tree = exact.freeze(spec, 8, seed)
        seed += 1
        if tree.extinct:
            continue
        cases += 1
        m = 2 + cases % 6
        if tree.gen_size(m) == 0:
            m = 1
        b = exact.beta_recursion(tree, m)
        r = exact.rho(tree, m, b)
        worst = max(worst, abs(r - exact.oracle_rho(tree, m)))
        gens = tree.arena.generation
        ids = [x for x in range(1, tree.n_vertices)
               if 1 <= gens[x] < m][::7][:6]
        for x in ids:
            worst = max(worst, abs(float(b[x]) - exact.oracle_beta(tree, x, m)))
        deep = [x for x in range(1, tree.n_vertices) if gens[x] == m]
        if deep:
            x = deep[0]
            chain = []
            z = x
            while z != 0:
                chain.append(z)
                z = int(tree.arena.parent[z])
            if len(chain) >= 2:
                first = chain[-1]
                up = exact.path_hit_prob_up(tree, 0, x)
                worst = max(worst,
                            abs(up - exact.oracle_hit_prob(tree, first,
                                                           [x], [0])))
                down = exact.path_hit_prob_down(tree, 0, x)
                o_down = exact.oracle_hit_prob(
                    tree, int(tree.arena.parent[x]), [0], [x])
                worst = max(worst, abs(down - o_down))
    _verdict(2, worst <= 1e-10,
             "worst |recursion - linear solve| = %.3e over %d trees "
             "(tolerance 1e-10)" % (worst, cases))


def test_criterion_3_hit_time_identity(env_half):
    tree = exact.freeze(env_half, 12, 7)
    rep1 = exact.expected_hit_time(tree, 1)
    oracle1 = exact.oracle_expected_time(tree, 0, 1)
    quirk_ok = rep1.paper_value == 0.0 and abs(oracle1 - 3.0) <= 1e-9
    devs = []
    for m in (8, 10, 12):
        rep = exact.expected_hit_time(tree, m)
        oracle = exact.oracle_expected_time(tree, 0, m)
        devs.append(abs(rep.paper_value - oracle) / oracle)
    nonincreasing = all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))
    ok = quirk_ok and nonincreasing and devs[-1] <= 0.20
    _verdict(3, ok,
             "m=1 quirk %s; deviations %.1f%% -> %.1f%% -> %.1f%% at "
             "m=8,10,12 (need <= 20%% at m=12, nonincreasing)"
             % ("reproduced" if quirk_ok else "MISSING",
                100 * devs[0], 100 * devs[1], 100 * devs[2]))


def test_criterion_4_no_increasing_trend(env_sparse):
    xs, ys = [], []
    survivors = 0
    seed = 1
    while survivors < 20:
        tree = exact.freeze(env_sparse, 20, seed)
        seed += 1
        if tree.extinct:
            continue
        survivors += 1
        for m in range(2, 21):
            rep = exact.expected_hit_time(tree, m)
            xs.append(float(m))
            ys.append(rep.gamma_root / m)
    from rwre.harness import _ols
    slope, se = _ols(xs, ys)
    _verdict(4, slope <= 3.0 * se,
             "least-squares slope %.3e <= 3*stderr %.3e over %d points"
             % (slope, 3.0 * se, len(xs)))


def test_criterion_5_many_to_one_and_martingales(env_half, env_updrift):
    zs = []
    for spec, n, seed in ((env_half, 4, 501), (env_half, 6, 502),
                          (env_updrift, 4, 503), (env_updrift, 6, 504)):
        c = brw.sn_median(spec, n) - 1e-9
        r = brw.verify_many_to_one(spec, n, c, 100000, seed)
        zs.append(r["z_score"])
    w_env = rwre.spec_from_jsonable({
        "offspring": {"support": [[0, 0.1], [3, 0.9]]},
        "weights": {"support": [[1.0, 1.0]]}})
    rw = brw.martingale_mean(w_env, "W", 6, 100000, 505)
    zs.append((rw["mean"] - 1.0) / rw["stderr"])
    rm = brw.martingale_mean(env_updrift, "M", 6, 100000, 506)
    zs.append((rm["mean"] - 1.0) / rm["stderr"])
    worst = max(abs(z) for z in zs)
    _verdict(5, worst <= 4.0,
             "max |z| = %.2f across four tail checks and two martingale "
             "means at 1e5 replicas" % worst)


def test_criterion_6_limit_trend_checks(env_half, env_04):
    # (i) + (iv): largest full generation and root local time, biased to stay
    grid = tuple(StopRule(STEPS, 1 << j) for j in (14, 16, 18, 20))
    plan = ExperimentPlan(env_04, grid, replicas=400, master_seed=601)
    records, _ = run_plan(plan)
    target_i = 1.0 / math.log(2.5)
    est_i = estimate_limit(records, OBS_R, SLOPE)
    recs_r = sorted((r for r in records if r.observable == OBS_R),
                    key=lambda r: r.n)
    ratios = [r.mean / math.log(r.n) for r in recs_r]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    est_iv = estimate_limit(records, OBS_LOG_LROOT, EXPONENT)

    # (ii): return-time clock
    plan2 = ExperimentPlan(env_half, tuple(dyadic_grid(ROOT_RETURNS, 10, 13)),
                           replicas=200, master_seed=602)
    records2, _ = run_plan(plan2, step_cap=1 << 28)
    target_ii = 1.0 / math.log(2.0)
    est_ii = estimate_limit(records2, OBS_RTILDE, SLOPE)

    # (iii): polynomial scalings at the diffusive boundary
    plan3 = ExperimentPlan(env_half, tuple(dyadic_grid(STEPS, 16, 24)),
                           replicas=64, master_seed=603)
    records3, _ = run_plan(plan3)
    est_lroot = estimate_limit(records3, OBS_LOG_LROOT, EXPONENT)
    est_xstar = estimate_limit(records3, OBS_XSTAR, EXPONENT)

    ok_i = abs(est_i["value"] - target_i) <= 0.30 * target_i
    ok_ii = abs(est_ii["value"] - target_ii) <= 0.30 * target_ii
    ok_iii = (0.38 <= est_lroot["value"] <= 0.62
              and 0.38 <= est_xstar["value"] <= 0.62)
    ok_iv = est_iv["value"] >= 0.85
    ok = ok_i and increasing and ok_ii and ok_iii and ok_iv
    _verdict(6, ok,
             "(i) slope %.3f vs %.3f %s, ratios %s; (ii) slope %.3f vs "
             "%.3f %s; (iii) exponents %.3f, %.3f in [0.38, 0.62] %s; "
             "(iv) exponent %.3f >= 0.85 %s"
             % (est_i["value"], target_i, "ok" if ok_i else "OUT",
                "increasing" if increasing else "NOT MONOTONE",
                est_ii["value"], target_ii, "ok" if ok_ii else "OUT",
                est_lroot["value"], est_xstar["value"],
                "ok" if ok_iii else "OUT",
                est_iv["value"], "ok" if ok_iv else "OUT"))


def test_criterion_7_thread_determinism(data_dir, tmp_path):
    args = ["simulate", "--env", str(data_dir / "env_updrift_mix.json"),
            "--stop", "steps:4096", "--grid", "dyadic:10:12",
            "--replicas", "6", "--seed", "77"]
    d1, d2 = tmp_path / "t1", tmp_path / "t2"
    assert cli.main(args + ["--out", str(d1), "--threads", "1"]) == 0
    assert cli.main(args + ["--out", str(d2), "--threads", "2"]) == 0
    same = (d1 / "raw.jsonl").read_bytes() == (d2 / "raw.jsonl").read_bytes()
    _verdict(7, same, "raw.jsonl byte-identical across --threads 1 and 2")


def test_criterion_8_max_potential_bounds(env_updrift):
    gt = regime.gamma_tilde(env_updrift)
    recs = brw.max_potential_profile(env_updrift, [15, 20], 200, 2024)
    C = 0.25
    env_ok = all(r.max_max_vbar / r.level
                 <= gt * (1.0 + C * math.log(r.level) / r.level) + 1e-12
                 for r in recs)
    mean20 = recs[-1].mean_max_v / 20.0
    band_ok = abs(mean20 - gt) <= 0.0035
    _verdict(8, env_ok and band_ok,
             "running-max envelope holds at levels 15 and 20 with C=%.2f; "
             "mean max V/20 = %.5f within +-0.0035 of %.5f"
             % (C, mean20, gt))
