import dataclasses

import numpy as np
import pytest

from sgmpcs import (EliteSet, EngineConfig, HeuristicConfig, enumerate_optimal,
                    hamming, init_elite, make_solution, replace_elite,
                    run_algorithm, run_baseline, run_sgmpcs)
from sgmpcs.instance import Solution

from conftest import random_instance, rng_for

FAST = dict(time_limit=30.0, clock_rate=2_000_000)


def _sol(vec, makespan):
    arr = np.asarray(vec, dtype=np.int8)
    arr.flags.writeable = False
    return Solution(arr, makespan)


def _elite(policy, costs):
    # distinct orientation vectors so closest-by-hamming is discriminating
    members = [_sol([1 + (i >> k) % 2 for k in range(4)], c)
               for i, c in enumerate(costs)]
    return EliteSet(len(costs), policy, members)


# -- replacement policy matrix -------------------------------------------------

def test_replace_low_empty_improving():
    e = _elite("low", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 25), ("empty",)) == 1
    assert [s.makespan for s in e.members] == [10, 25, 20]


def test_replace_low_empty_not_improving():
    e = _elite("low", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 30), ("empty",)) is None
    assert [s.makespan for s in e.members] == [10, 30, 20]


def test_replace_low_guided_replaces_worst_not_reference():
    # guided from r (not the worst): candidate beats worst but not r
    e = _elite("low", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 15), ("guided", 0)) == 1
    assert [s.makespan for s in e.members] == [10, 15, 20]


def test_replace_low_guided_not_improving_worst():
    e = _elite("low", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 31), ("guided", 1)) is None


def test_replace_med_empty_matches_low():
    e = _elite("med", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 25), ("empty",)) == 1


def test_replace_med_empty_not_improving():
    e = _elite("med", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 30), ("empty",)) is None


def test_replace_med_guided_improves_reference():
    e = _elite("med", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 19), ("guided", 2)) == 2
    assert [s.makespan for s in e.members] == [10, 30, 19]


def test_replace_med_guided_worse_than_reference():
    e = _elite("med", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 21), ("guided", 2)) is None
    assert [s.makespan for s in e.members] == [10, 30, 20]


def test_replace_high_empty_replaces_closest():
    e = _elite("high", [10, 30, 20])
    cand = _sol(e.members[2].orientations, 25)  # zero distance to member 2
    assert replace_elite(e, cand, ("empty",)) == 2
    assert [s.makespan for s in e.members] == [10, 30, 25]


def test_replace_high_empty_requires_beating_worst():
    e = _elite("high", [10, 30, 20])
    cand = _sol(e.members[2].orientations, 30)
    assert replace_elite(e, cand, ("empty",)) is None


def test_replace_high_guided_replaces_reference():
    e = _elite("high", [10, 30, 20])
    assert replace_elite(e, _sol([1, 1, 1, 1], 9), ("guided", 0)) == 0
    assert [s.makespan for s in e.members] == [9, 30, 20]


def test_replace_high_identical_members_single_replacement():
    base = _sol([1, 1, 1, 1], 20)
    e = EliteSet(3, "high", [base, base, base])
    cand = _sol([2, 1, 1, 1], 15)
    idx = replace_elite(e, cand, ("empty",))
    assert idx == 0  # closest-tie broken by lowest member index
    assert [s.makespan for s in e.members] == [15, 20, 20]


# -- elite initialization ---------------------------------------------------------

def test_init_elite_size_one_takes_best():
    inst = random_instance(3, 3, seed=41)
    cfg = EngineConfig(elite_size=1, init_samples=50)
    rng = rng_for(0)
    elite = init_elite(inst, cfg, rng)
    assert len(elite.members) == 1
    # regenerate the same candidate stream to verify best-of-sample
    rng2 = rng_for(0)
    from sgmpcs import heuristic_descent
    cands = [heuristic_descent(inst, heuristic=HeuristicConfig(), rng=rng2)
             for _ in range(50)]
    assert elite.members[0].makespan == min(c.makespan for c in cands)


def test_init_elite_capacity_equals_samples():
    inst = random_instance(3, 3, seed=43)
    cfg = EngineConfig(elite_size=50, init_samples=50, div="low")
    elite = init_elite(inst, cfg, rng_for(1))
    assert len(elite.members) == 50


def test_init_elite_pads_when_samples_short():
    inst = random_instance(2, 2, seed=44)
    cfg = EngineConfig(elite_size=6, init_samples=3)
    elite = init_elite(inst, cfg, rng_for(2))
    assert len(elite.members) == 6


def test_init_elite_tiny_single_machine(tiny_2x1):
    cfg = EngineConfig(elite_size=4, init_samples=50)
    elite = init_elite(tiny_2x1, cfg, rng_for(3))
    assert all(s.makespan == 7 for s in elite.members)


def test_init_elite_high_policy_inserts_closest():
    inst = random_instance(3, 3, seed=45)
    cfg_high = EngineConfig(elite_size=4, init_samples=50, div="high")
    elite = init_elite(inst, cfg_high, rng_for(4))
    assert len(elite.members) == 4


# -- runners ----------------------------------------------------------------------

def test_run_sgmpcs_proves_oracle_optimum():
    inst = random_instance(3, 3, seed=47)
    opt, _ = enumerate_optimal(inst)
    best, inc, rec = run_sgmpcs(inst, EngineConfig(seed=5, **FAST))
    assert inc.proved
    assert inc.c_star == opt == best.makespan == rec.best_makespan
    assert rec.proved_optimal and rec.found_optimal


def test_run_sgmpcs_p_one_no_guided():
    inst = random_instance(3, 3, seed=49)
    best, inc, rec = run_sgmpcs(inst, EngineConfig(p=1.0, seed=6, **FAST))
    assert rec.guided_starts == 0
    assert rec.empty_starts == rec.searches


def test_run_sgmpcs_p_zero_no_empty():
    inst = random_instance(3, 3, seed=51)
    best, inc, rec = run_sgmpcs(inst, EngineConfig(p=0.0, seed=7, **FAST))
    assert rec.empty_starts == 0
    assert rec.guided_starts == rec.searches


def test_run_sgmpcs_counters_consistent():
    inst = random_instance(3, 3, seed=53)
    _, _, rec = run_sgmpcs(inst, EngineConfig(p=0.5, seed=8, **FAST))
    assert rec.empty_starts + rec.guided_starts == rec.searches
    costs = [c for _, c in rec.cost_trajectory]
    assert all(a >= b for a, b in zip(costs, costs[1:]))


def test_run_sgmpcs_global_bound_trace():
    inst = random_instance(3, 3, seed=55)
    _, inc, rec = run_sgmpcs(inst, EngineConfig(seed=9, **FAST))
    c_star = rec.cost_trajectory[0][1]
    for elapsed, kind, limit, bound, found, exhausted, fails in rec.search_log:
        assert bound == c_star - 1  # global policy: always current incumbent - 1
        if found is not None and found < c_star:
            c_star = found
    assert c_star == inc.c_star


def test_run_sgmpcs_elite_size_constant():
    inst = random_instance(3, 3, seed=57)
    for e in (1, 4, 8):
        cfg = EngineConfig(elite_size=e, seed=10, **FAST)
        best, inc, rec = run_sgmpcs(inst, cfg)
        assert inc.proved  # small instance: always proves within budget


def test_run_sgmpcs_empirical_empty_fraction():
    from sgmpcs import generate_workflow
    # big enough that the run cannot prove optimality and ends on budget
    inst = generate_workflow(8, 8, seed=59)
    cfg = EngineConfig(p=0.25, seed=11, time_limit=10.0)
    _, _, rec = run_sgmpcs(inst, cfg)
    assert rec.searches >= 200
    frac = rec.empty_starts / rec.searches
    assert 0.15 < frac < 0.35


def test_time_limit_zero_returns_init_best():
    inst = random_instance(3, 3, seed=61)
    cfg = EngineConfig(time_limit=0.0, seed=12)
    best, inc, rec = run_sgmpcs(inst, cfg)
    assert rec.searches == 0
    assert not rec.proved_optimal and not rec.found_optimal
    assert best.makespan == rec.best_makespan == inc.c_star


def test_local_bound_policy_still_proves():
    inst = random_instance(3, 3, seed=63)
    opt, _ = enumerate_optimal(inst)
    cfg = EngineConfig(bound_policy="local", seed=13, **FAST)
    best, inc, rec = run_sgmpcs(inst, cfg)
    assert inc.proved and inc.c_star == opt


# -- baselines -----------------------------------------------------------------------

def test_chron_baseline_proves_oracle(tiny_2x1):
    best, inc, rec = run_baseline(tiny_2x1, "chron", EngineConfig(seed=0, **FAST))
    assert inc.proved and inc.c_star == 7
    # proof semantics: the final search exhausted below the incumbent and
    # found nothing
    last = rec.search_log[-1]
    assert last[4] is None and last[5] is True


@pytest.mark.parametrize("kind", ["chron", "lds"])
def test_baselines_match_oracle(kind):
    inst = random_instance(3, 3, seed=65)
    opt, _ = enumerate_optimal(inst)
    best, inc, rec = run_baseline(inst, kind, EngineConfig(seed=1, **FAST))
    assert inc.proved and best.makespan == opt


def test_chron_deterministic_repeat():
    inst = random_instance(3, 3, seed=67)
    r1 = run_baseline(inst, "chron", EngineConfig(seed=2, **FAST))[2]
    r2 = run_baseline(inst, "chron", EngineConfig(seed=99, **FAST))[2]
    assert r1.best_makespan == r2.best_makespan
    assert r1.cost_trajectory == r2.cost_trajectory
    assert r1.total_fails == r2.total_fails


def test_restart_no_guided_searches():
    inst = random_instance(3, 3, seed=69)
    best, inc, rec = run_baseline(inst, "restart", EngineConfig(p=0.25, seed=3, **FAST))
    assert rec.guided_starts == 0
    assert rec.algorithm == "restart"


def test_restart_trace_identical_to_sgmpcs_p1():
    inst = random_instance(3, 3, seed=71)
    cfg = EngineConfig(p=1.0, seq="luby", bt="chron", seed=4, **FAST)
    b1, i1, r1 = run_baseline(inst, "restart", cfg)
    b2, i2, r2 = run_sgmpcs(inst, cfg)
    assert r1.search_log == r2.search_log
    assert r1.cost_trajectory == r2.cost_trajectory
    assert r1.total_fails == r2.total_fails
    assert b1.makespan == b2.makespan


def test_run_algorithm_dispatch():
    inst = random_instance(2, 2, seed=73)
    for alg in ("sgmpcs", "chron", "lds", "restart"):
        best, inc, rec = run_algorithm(inst, alg, EngineConfig(seed=5, **FAST))
        assert rec.algorithm == alg
    with pytest.raises(ValueError):
        run_algorithm(inst, "tabu", EngineConfig())


def test_exhaustion_with_solution_is_not_a_proof():
    # a search that exhausts while finding a solution improves the incumbent
    # instead of proving; the proof needs a later empty exhaustion
    inst = random_instance(3, 3, seed=75)
    _, inc, rec = run_sgmpcs(inst, EngineConfig(seed=6, **FAST))
    assert inc.proved
    proof_entries = [e for e in rec.search_log if e[5] and e[4] is None]
    assert proof_entries, "proof must come from an exhausted, empty search"


def test_run_sgmpcs_poly_schedule_limits():
    inst = random_instance(3, 3, seed=77)
    opt, _ = enumerate_optimal(inst)
    best, inc, rec = run_sgmpcs(inst, EngineConfig(seq="poly", seed=14, **FAST))
    assert inc.proved and inc.c_star == opt
    limits = [entry[2] for entry in rec.search_log]
    assert limits[0] == 32
    assert all(lim % 32 == 0 for lim in limits)


def test_run_sgmpcs_lds_traversal():
    inst = random_instance(3, 3, seed=79)
    opt, _ = enumerate_optimal(inst)
    best, inc, rec = run_sgmpcs(inst, EngineConfig(bt="lds", seed=15, **FAST))
    assert inc.proved and inc.c_star == opt


def test_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(p=1.5).validate()
    with pytest.raises(ValueError):
        EngineConfig(elite_size=0).validate()
    with pytest.raises(ValueError):
        EngineConfig(seq="fixed").validate()
    with pytest.raises(ValueError):
        EngineConfig(div="max").validate()
    with pytest.raises(ValueError):
        EngineConfig(time_limit=-1).validate()
