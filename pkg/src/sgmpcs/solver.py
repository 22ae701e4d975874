"""Solution-guided multi-point constructive search and its baselines.

The main loop keeps a bounded pool of elite solutions.  Each iteration runs
one fail-limited tree search, started either from scratch (with probability
p) or guided by a uniformly drawn elite member; improving results re-enter
the pool under a diversity-controlled replacement rule.  Every search runs
under an upper bound on the makespan: with the global policy always one
less than the best cost found so far, with the local policy one less than
the worst elite cost (empty starts) or the guiding solution's cost (guided
starts).  A run ends when optimality is proved (some search exhausts the
space below the incumbent with nothing found) or when its budget expires.

Budgets and all trajectory timestamps use logical seconds: the search
engine's deterministic work counter divided by ``clock_rate``.  The default
rate is calibrated so one logical second is roughly one CPU second of
compiled-kernel search, which makes whole runs reproducible bit-for-bit
from (instance, config, seed) alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .engine import (CHRON, LDS, LUBY, POLY, UNLIMITED, FailLimitSchedule,
                     SearchState, heuristic_descent, search)
from .heuristics import HeuristicConfig
from .instance import Instance, Solution
from .metrics import RunRecord, RunRecorder, hamming, mean_pairwise_diversity

GLOBAL = "global"
LOCAL = "local"

DIV_LOW = "low"
DIV_MED = "med"
DIV_HIGH = "high"

ALGORITHMS = ("sgmpcs", "chron", "lds", "restart")

# work units per logical second; calibrated so one logical second is about
# one wall second of JIT-compiled search on a circa-2020 x86 core
DEFAULT_CLOCK_RATE = 12_000_000


@dataclass
class EngineConfig:
    elite_size: int = 4
    p: float = 0.25
    seq: str = LUBY
    bt: str = CHRON
    div: str = DIV_LOW
    bound_policy: str = GLOBAL
    init_samples: int = 50
    time_limit: float = 60.0
    seed: int = 0
    critical_fraction: float = 0.10
    luby_multiplier: int = 1
    max_discrepancy: Optional[int] = None
    fail_budget: Optional[int] = None
    clock_rate: int = DEFAULT_CLOCK_RATE

    def validate(self):
        if self.elite_size < 1:
            raise ValueError(f"elite_size must be >= 1, got {self.elite_size}")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if self.seq not in (LUBY, POLY):
            raise ValueError(f"seq must be luby or poly, got {self.seq!r}")
        if self.bt not in (CHRON, LDS):
            raise ValueError(f"bt must be chron or lds, got {self.bt!r}")
        if self.div not in (DIV_LOW, DIV_MED, DIV_HIGH):
            raise ValueError(f"div must be low, med or high, got {self.div!r}")
        if self.bound_policy not in (GLOBAL, LOCAL):
            raise ValueError(f"bound policy must be global or local, got {self.bound_policy!r}")
        if self.init_samples < 1:
            raise ValueError("init_samples must be >= 1")
        if self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")
        if not (0.0 < self.critical_fraction <= 1.0):
            raise ValueError("critical_fraction must be in (0, 1]")
        if self.luby_multiplier < 1:
            raise ValueError("luby_multiplier must be >= 1")
        if self.max_discrepancy is not None and self.max_discrepancy < 0:
            raise ValueError("max_discrepancy must be >= 0")
        if self.clock_rate < 1:
            raise ValueError("clock_rate must be >= 1")
        return self

    def to_dict(self):
        return {
            "elite_size": self.elite_size, "p": self.p, "seq": self.seq,
            "bt": self.bt, "div": self.div, "bound_policy": self.bound_policy,
            "init_samples": self.init_samples, "time_limit": self.time_limit,
            "seed": self.seed, "critical_fraction": self.critical_fraction,
            "luby_multiplier": self.luby_multiplier,
            "max_discrepancy": self.max_discrepancy,
            "fail_budget": self.fail_budget, "clock_rate": self.clock_rate,
        }


@dataclass
class Incumbent:
    c_star: int
    proved: bool = False


class EliteSet:
    """Bounded multiset of solutions (duplicates allowed) under one of the
    three replacement policies.  Size equals capacity from initialization
    onward."""

    def __init__(self, capacity, policy, members):
        if len(members) != capacity:
            raise ValueError("elite set must be filled to capacity")
        self.capacity = capacity
        self.policy = policy
        self.members = list(members)

    def best(self):
        return min(self.members, key=lambda s: s.makespan)

    def worst_index(self):
        idx = 0
        for i, sol in enumerate(self.members):
            if sol.makespan > self.members[idx].makespan:
                idx = i
        return idx

    def worst(self):
        return self.members[self.worst_index()]

    def closest_index(self, sol):
        idx = 0
        best_d = None
        for i, member in enumerate(self.members):
            d = hamming(member, sol)
            if best_d is None or d < best_d:
                best_d = d
                idx = i
        return idx

    def diversity(self):
        return mean_pairwise_diversity(self.members)


def init_elite(instance, config: EngineConfig, rng, *, state=None, heuristic=None):
    """Seed the elite pool from ``init_samples`` independent no-backtracking
    descents of the randomized heuristic (no makespan bound, so every
    descent completes).

    Low/medium diversity keep the |e| best candidates.  High diversity
    inserts the first |e| candidates, then lets each later candidate that
    beats the worst member replace the member closest to it by Hamming
    distance.  If there are fewer candidates than |e|, copies of the best
    fill the pool to capacity.
    """
    if heuristic is None:
        heuristic = HeuristicConfig(critical_fraction=config.critical_fraction)
    if state is None:
        state = SearchState(instance)
    cands = [heuristic_descent(instance, heuristic=heuristic, rng=rng, state=state)
             for _ in range(config.init_samples)]
    cap = config.elite_size
    if config.div in (DIV_LOW, DIV_MED):
        members = sorted(cands, key=lambda s: s.makespan)[:cap]
    else:
        members = cands[:cap]
        for cand in cands[cap:]:
            worst = max(members, key=lambda s: s.makespan)
            if cand.makespan < worst.makespan:
                closest = min(range(len(members)),
                              key=lambda i: (hamming(members[i], cand), i))
                members[closest] = cand
    best = min(members, key=lambda s: s.makespan)
    while len(members) < cap:
        members.append(best)
    return EliteSet(cap, config.div, members)


def replace_elite(elite: EliteSet, candidate: Solution, context):
    """Apply the pool's replacement rule for a search result.

    ``context`` is ("empty",) for a search from scratch or ("guided", i) for
    a search guided by member i.  Low diversity always replaces the worst
    member on improvement over it; medium replaces the worst (empty starts)
    or the guiding member (guided starts, on improvement over that member);
    high replaces the Hamming-closest member (empty starts) or the guiding
    member.  Returns the replaced index, or None if the pool is unchanged.
    """
    kind = context[0]
    members = elite.members
    if elite.policy == DIV_LOW or (elite.policy == DIV_MED and kind == "empty"):
        widx = elite.worst_index()
        if candidate.makespan < members[widx].makespan:
            members[widx] = candidate
            return widx
        return None
    if kind == "guided":
        ridx = context[1]
        if candidate.makespan < members[ridx].makespan:
            members[ridx] = candidate
            return ridx
        return None
    if elite.policy == DIV_HIGH:
        widx = elite.worst_index()
        if candidate.makespan < members[widx].makespan:
            cidx = elite.closest_index(candidate)
            members[cidx] = candidate
            return cidx
        return None
    raise ValueError(f"unknown policy {elite.policy!r}")


def _finalize(record, recorder, inc, elapsed, known_optimum):
    recorder.tick(elapsed)
    record.best_makespan = inc.c_star
    record.proved_optimal = inc.proved
    record.found_optimal = inc.proved or (
        known_optimum is not None and inc.c_star <= known_optimum)


def _run_mpcs(instance, config, algorithm, known_optimum):
    """Shared implementation of the elite-pool restart loop; with p = 1 it
    is exactly randomized restart."""
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    state = SearchState(instance)
    heuristic = HeuristicConfig(critical_fraction=config.critical_fraction)
    rate = config.clock_rate
    work_limit = int(config.time_limit * rate)

    record = RunRecord(algorithm=algorithm, instance=instance.name,
                       seed=config.seed, config=config.to_dict())
    recorder = RunRecorder(record)

    def elapsed():
        return state.work / rate

    elite = init_elite(instance, config, rng, state=state, heuristic=heuristic)
    best_sol = elite.best()
    inc = Incumbent(c_star=best_sol.makespan)
    recorder.improve(elapsed(), inc.c_star)
    recorder.elite_event(elapsed(), elite.diversity())

    schedule = FailLimitSchedule(kind=config.seq, multiplier=config.luby_multiplier)
    improved_last = False

    def on_solution(sol):
        nonlocal best_sol
        if sol.makespan < inc.c_star:
            inc.c_star = sol.makespan
            best_sol = sol
            recorder.improve(elapsed(), sol.makespan)

    while not inc.proved and state.work < work_limit:
        if config.fail_budget is not None and record.total_fails >= config.fail_budget:
            break
        recorder.tick(elapsed())
        limit = schedule.next_limit(improved_last)
        from_empty = float(rng.random()) < config.p
        if from_empty:
            reference, ridx = None, None
            if config.bound_policy == GLOBAL:
                bound = inc.c_star - 1
            else:
                bound = elite.worst().makespan - 1
        else:
            ridx = int(rng.integers(config.elite_size))
            reference = elite.members[ridx]
            if config.bound_policy == GLOBAL:
                bound = inc.c_star - 1
            else:
                bound = reference.makespan - 1

        c_before = inc.c_star
        outcome = search(instance, fail_limit=limit, bound=bound,
                         reference=reference, traversal=config.bt,
                         heuristic=heuristic, rng=rng, state=state,
                         work_limit=work_limit,
                         max_discrepancy=config.max_discrepancy,
                         on_solution=on_solution)
        record.searches += 1
        record.total_fails += outcome.fails_used
        if from_empty:
            record.empty_starts += 1
        else:
            record.guided_starts += 1
        improved_last = outcome.best is not None and outcome.best.makespan < c_before
        record.search_log.append(
            (elapsed(), "empty" if from_empty else "guided", limit, bound,
             outcome.best.makespan if outcome.best else None,
             outcome.exhausted, outcome.fails_used))
        if outcome.best is not None:
            context = ("empty",) if from_empty else ("guided", ridx)
            if replace_elite(elite, outcome.best, context) is not None:
                recorder.elite_event(elapsed(), elite.diversity())
        elif outcome.exhausted and bound >= inc.c_star - 1:
            # the whole space below the incumbent is empty: optimality proved
            inc.proved = True

    _finalize(record, recorder, inc, elapsed(), known_optimum)
    return best_sol, inc, record


def run_sgmpcs(instance: Instance, config: EngineConfig, *, known_optimum=None):
    """One SGMPCS run; returns (best solution, incumbent, run record)."""
    return _run_mpcs(instance, config, "sgmpcs", known_optimum)


def _run_one_shot(instance, config, traversal, known_optimum):
    """Chron and LDS baselines: a single unbounded-fail-limit search with the
    deterministic heuristic, re-launched below the incumbent after each
    exhaustion so optimality gets proved by an empty search."""
    config.validate()
    state = SearchState(instance)
    heuristic = HeuristicConfig(critical_fraction=config.critical_fraction,
                                deterministic=True)
    rate = config.clock_rate
    work_limit = int(config.time_limit * rate)

    record = RunRecord(algorithm=traversal, instance=instance.name,
                       seed=config.seed, config=config.to_dict())
    recorder = RunRecorder(record)

    def elapsed():
        return state.work / rate

    best_sol = None
    inc = Incumbent(c_star=0)

    def on_solution(sol):
        nonlocal best_sol
        if best_sol is None or sol.makespan < inc.c_star:
            inc.c_star = sol.makespan
            best_sol = sol
            recorder.improve(elapsed(), sol.makespan)

    while state.work < work_limit:
        if config.fail_budget is not None and record.total_fails >= config.fail_budget:
            break
        bound = instance.horizon if best_sol is None else inc.c_star - 1
        outcome = search(instance, fail_limit=UNLIMITED, bound=bound,
                         traversal=traversal, heuristic=heuristic, rng=None,
                         state=state, work_limit=work_limit,
                         max_discrepancy=config.max_discrepancy,
                         on_solution=on_solution)
        record.searches += 1
        record.empty_starts += 1
        record.total_fails += outcome.fails_used
        record.search_log.append(
            (elapsed(), "empty", None, bound,
             outcome.best.makespan if outcome.best else None,
             outcome.exhausted, outcome.fails_used))
        if not outcome.exhausted:
            break  # budget ran out mid-search
        if outcome.best is None:
            if best_sol is not None and bound >= inc.c_star - 1:
                inc.proved = True
            break

    _finalize(record, recorder, inc, elapsed(), known_optimum)
    return best_sol, inc, record


def run_baseline(instance: Instance, kind: str, config: EngineConfig, *,
                 known_optimum=None):
    """Run one of the constructive baselines: "chron", "lds" (single
    deterministic search each) or "restart" (the elite-pool machinery with
    p forced to 1, Luby limits and chronological backtracking)."""
    if kind == "restart":
        cfg = replace(config, p=1.0, seq=LUBY, bt=CHRON)
        return _run_mpcs(instance, cfg, "restart", known_optimum)
    if kind in (CHRON, LDS):
        return _run_one_shot(instance, config, kind, known_optimum)
    raise ValueError(f"unknown baseline {kind!r}")


def run_algorithm(instance, algorithm, config, *, known_optimum=None):
    """Dispatch by algorithm name ("sgmpcs" or a baseline)."""
    if algorithm == "sgmpcs":
        return run_sgmpcs(instance, config, known_optimum=known_optimum)
    if algorithm in ("chron", "lds", "restart"):
        return run_baseline(instance, algorithm, config, known_optimum=known_optimum)
    raise ValueError(f"unknown algorithm {algorithm!r}")
