"""Resource-limited constructive tree search over disjunctive-pair orderings.

A search node carries per-activity time windows (earliest start, latest
completion) and a partial orientation of the disjunctive pairs.  Propagation
runs three rules to fixpoint:

  * precedence bounds along job-chain arcs and decided-pair arcs,
  * back-propagation of the makespan bound onto every completion window,
  * pairwise disjunctive elimination with unit assertion (if exactly one
    orientation of a pair survives the window test, it is asserted; if
    neither survives, the node fails).

The hot kernel operates on flat int64 arrays and is JIT-compiled with numba
when available (set SGMPCS_PURE_PYTHON=1 to force the interpreted fallback;
both paths run identical code).  All search effort is metered on a
deterministic work counter, which the callers convert to "logical seconds";
this is what makes whole runs bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .heuristics import HeuristicConfig, order_pair, select_pair
from .instance import Instance, Solution

CHRON = "chron"
LDS = "lds"

LUBY = "luby"
POLY = "poly"
POLY_INCREMENT = 32

UNLIMITED = 1 << 62

_OK, _FAIL, _OVERFLOW = 0, 1, 2
_T_EST, _T_LCT, _T_ORIENT = 0, 1, 2
# sbox slots: 0 trail top, 1 work counter, 2 undecided pair count
_S_TOP, _S_WORK, _S_UNDEC = 0, 1, 2


def _jit(fn):
    if os.environ.get("SGMPCS_PURE_PYTHON"):
        return fn
    try:
        import numba
    except ImportError:
        return fn
    return numba.njit(cache=True)(fn)


def _kernel_step(decide_pid, decide_dir, seed_all, bound,
                 dur, mach, jsucc, jpred,
                 pair_a, pair_b, pair_mach,
                 ap_flat, ap_start,
                 est, lct, orient,
                 msucc, msucc_cnt, mpred, mpred_cnt,
                 act_undec, mach_undec, mach_ver,
                 trail, sbox, queue, in_queue):
    """Apply one optional decision, then propagate to fixpoint.

    Every mutation is recorded on the trail.  Returns _OK, _FAIL (dead end,
    trail retained for the caller to rewind) or _OVERFLOW (trail capacity
    exhausted; the caller rewinds, grows the trail and retries).
    """
    nact = est.shape[0]
    cap = trail.shape[0]
    top = sbox[_S_TOP]
    work = sbox[_S_WORK]
    qtop = 0
    status = _OK

    if seed_all != 0:
        for i in range(nact):
            in_queue[i] = 1
            queue[qtop] = i
            qtop += 1

    # lazily re-apply the makespan bound to all completion windows
    for i in range(nact):
        if lct[i] > bound:
            if top >= cap:
                status = _OVERFLOW
                break
            trail[top, 0] = _T_LCT
            trail[top, 1] = i
            trail[top, 2] = lct[i]
            top += 1
            lct[i] = bound
            mach_ver[mach[i]] += 1
            if est[i] + dur[i] > lct[i]:
                status = _FAIL
                break
            if in_queue[i] == 0:
                in_queue[i] = 1
                queue[qtop] = i
                qtop += 1

    if status == _OK and decide_pid >= 0:
        pid = decide_pid
        if top >= cap:
            status = _OVERFLOW
        else:
            trail[top, 0] = _T_ORIENT
            trail[top, 1] = pid
            trail[top, 2] = 0
            top += 1
            orient[pid] = decide_dir
            a = pair_a[pid]
            b = pair_b[pid]
            if decide_dir == 1:
                x, y = a, b
            else:
                x, y = b, a
            msucc[x, msucc_cnt[x]] = y
            msucc_cnt[x] += 1
            mpred[y, mpred_cnt[y]] = x
            mpred_cnt[y] += 1
            act_undec[a] -= 1
            act_undec[b] -= 1
            mach_undec[pair_mach[pid]] -= 1
            mach_ver[pair_mach[pid]] += 1
            sbox[_S_UNDEC] -= 1
            for i in (a, b):
                if in_queue[i] == 0:
                    in_queue[i] = 1
                    queue[qtop] = i
                    qtop += 1

    while status == _OK and qtop > 0:
        qtop -= 1
        i = queue[qtop]
        in_queue[i] = 0
        work += 1
        ci = est[i] + dur[i]
        if ci > lct[i]:
            status = _FAIL
            break

        # forward: successors need est >= completion of i
        nsucc = msucc_cnt[i]
        for si in range(-1, nsucc):
            s = jsucc[i] if si < 0 else msucc[i, si]
            if s < 0:
                continue
            if est[s] < ci:
                if top >= cap:
                    status = _OVERFLOW
                    break
                trail[top, 0] = _T_EST
                trail[top, 1] = s
                trail[top, 2] = est[s]
                top += 1
                est[s] = ci
                mach_ver[mach[s]] += 1
                if est[s] + dur[s] > lct[s]:
                    status = _FAIL
                    break
                if in_queue[s] == 0:
                    in_queue[s] = 1
                    queue[qtop] = s
                    qtop += 1
        if status != _OK:
            break

        # backward: predecessors must complete by est-side of i's window
        ti = lct[i] - dur[i]
        npred = mpred_cnt[i]
        for pi in range(-1, npred):
            p = jpred[i] if pi < 0 else mpred[i, pi]
            if p < 0:
                continue
            if lct[p] > ti:
                if top >= cap:
                    status = _OVERFLOW
                    break
                trail[top, 0] = _T_LCT
                trail[top, 1] = p
                trail[top, 2] = lct[p]
                top += 1
                lct[p] = ti
                mach_ver[mach[p]] += 1
                if est[p] + dur[p] > lct[p]:
                    status = _FAIL
                    break
                if in_queue[p] == 0:
                    in_queue[p] = 1
                    queue[qtop] = p
                    qtop += 1
        if status != _OK:
            break

        # disjunctive window test on i's undecided pairs
        for k in range(ap_start[i], ap_start[i + 1]):
            pid = ap_flat[k]
            if orient[pid] != 0:
                continue
            work += 1
            a = pair_a[pid]
            b = pair_b[pid]
            ab = est[a] + dur[a] + dur[b] <= lct[b]
            ba = est[b] + dur[b] + dur[a] <= lct[a]
            if ab and ba:
                continue
            if not ab and not ba:
                status = _FAIL
                break
            if top >= cap:
                status = _OVERFLOW
                break
            d = 1 if ab else 2
            trail[top, 0] = _T_ORIENT
            trail[top, 1] = pid
            trail[top, 2] = 0
            top += 1
            orient[pid] = d
            if d == 1:
                x, y = a, b
            else:
                x, y = b, a
            msucc[x, msucc_cnt[x]] = y
            msucc_cnt[x] += 1
            mpred[y, mpred_cnt[y]] = x
            mpred_cnt[y] += 1
            act_undec[a] -= 1
            act_undec[b] -= 1
            mach_undec[pair_mach[pid]] -= 1
            mach_ver[pair_mach[pid]] += 1
            sbox[_S_UNDEC] -= 1
            for e in (a, b):
                if in_queue[e] == 0:
                    in_queue[e] = 1
                    queue[qtop] = e
                    qtop += 1
        if status != _OK:
            break

    for q in range(qtop):
        in_queue[queue[q]] = 0
    sbox[_S_TOP] = top
    sbox[_S_WORK] = work
    return status


def _kernel_undo(mark, mach,
                 pair_a, pair_b, pair_mach,
                 est, lct, orient,
                 msucc_cnt, mpred_cnt,
                 act_undec, mach_undec, mach_ver,
                 trail, sbox):
    top = sbox[_S_TOP]
    while top > mark:
        top -= 1
        kind = trail[top, 0]
        idx = trail[top, 1]
        if kind == _T_EST:
            est[idx] = trail[top, 2]
            mach_ver[mach[idx]] += 1
        elif kind == _T_LCT:
            lct[idx] = trail[top, 2]
            mach_ver[mach[idx]] += 1
        else:
            d = orient[idx]
            orient[idx] = 0
            a = pair_a[idx]
            b = pair_b[idx]
            if d == 1:
                msucc_cnt[a] -= 1
                mpred_cnt[b] -= 1
            else:
                msucc_cnt[b] -= 1
                mpred_cnt[a] -= 1
            act_undec[a] += 1
            act_undec[b] += 1
            mach_undec[pair_mach[idx]] += 1
            mach_ver[pair_mach[idx]] += 1
            sbox[_S_UNDEC] += 1
    sbox[_S_TOP] = mark


_kernel_step = _jit(_kernel_step)
_kernel_undo = _jit(_kernel_undo)


def _layout(instance):
    """Flat arrays describing the instance for the kernel; cached."""
    cached = getattr(instance, "_engine_layout", None)
    if cached is not None:
        return cached
    nact = instance.num_activities
    m = instance.m
    jsucc = np.full(nact, -1, dtype=np.int64)
    jpred = np.full(nact, -1, dtype=np.int64)
    for aid in range(nact):
        if instance.pos_of[aid] + 1 < m:
            jsucc[aid] = aid + 1
            jpred[aid + 1] = aid
    by_act = [[] for _ in range(nact)]
    for pid in range(instance.num_pairs):
        by_act[instance.pair_a[pid]].append(pid)
        by_act[instance.pair_b[pid]].append(pid)
    ap_start = np.zeros(nact + 1, dtype=np.int64)
    for i in range(nact):
        ap_start[i + 1] = ap_start[i] + len(by_act[i])
    ap_flat = np.array([pid for lst in by_act for pid in lst], dtype=np.int64).reshape(-1)
    acts_on_mach = [np.flatnonzero(instance.machine == mch).astype(np.int64)
                    for mch in range(m)]
    pairs_on_mach = [np.flatnonzero(instance.pair_machine == mch).astype(np.int64)
                     for mch in range(m)]
    layout = (jsucc, jpred, ap_flat, ap_start, acts_on_mach, pairs_on_mach)
    instance._engine_layout = layout
    return layout


class TimeWindow(NamedTuple):
    est: int
    lct: int


@dataclass
class ChoicePoint:
    """A binary branch on one disjunctive pair: the tried orientation and
    its not-yet-explored negation (None once both sides were taken)."""

    pair: int
    tried: int
    alternative: Optional[int]
    mark: int
    used_alt: bool = False


@dataclass
class SearchOutcome:
    best: Optional[Solution]
    exhausted: bool
    fails_used: int


class SearchState:
    """Trailed search node state for one instance.

    One state is confined to a single run; it is reused across the run's
    searches via reset().  ``work`` is the deterministic effort counter.
    """

    def __init__(self, instance: Instance, bound=None, trail_capacity=1 << 14):
        self.instance = instance
        nact = instance.num_activities
        jsucc, jpred, ap_flat, ap_start, acts_on_mach, pairs_on_mach = _layout(instance)
        self._jsucc = jsucc
        self._jpred = jpred
        self._ap_flat = ap_flat
        self._ap_start = ap_start
        self.acts_on_mach = acts_on_mach
        self.pairs_on_mach = pairs_on_mach

        self.est = np.zeros(nact, dtype=np.int64)
        self.lct = np.full(nact, instance.horizon, dtype=np.int64)
        self.orient = np.zeros(instance.num_pairs, dtype=np.int64)
        width = max(1, instance.n - 1)
        self._msucc = np.zeros((nact, width), dtype=np.int64)
        self._msucc_cnt = np.zeros(nact, dtype=np.int64)
        self._mpred = np.zeros((nact, width), dtype=np.int64)
        self._mpred_cnt = np.zeros(nact, dtype=np.int64)
        self.act_undec = np.zeros(nact, dtype=np.int64)
        self.mach_undec = np.zeros(instance.m, dtype=np.int64)
        self.mach_ver = np.zeros(instance.m, dtype=np.int64)
        for pid in range(instance.num_pairs):
            self.act_undec[instance.pair_a[pid]] += 1
            self.act_undec[instance.pair_b[pid]] += 1
            self.mach_undec[instance.pair_machine[pid]] += 1

        self._trail = np.zeros((trail_capacity, 3), dtype=np.int64)
        self._sbox = np.zeros(4, dtype=np.int64)
        self._sbox[_S_UNDEC] = instance.num_pairs
        self._queue = np.zeros(max(1, nact), dtype=np.int64)
        self._in_queue = np.zeros(max(1, nact), dtype=np.uint8)

        self.bound = instance.horizon if bound is None else min(int(bound), instance.horizon)
        self.fails = 0
        self.heur_cache = [None] * instance.m

    # -- bookkeeping ------------------------------------------------------

    @property
    def work(self):
        return int(self._sbox[_S_WORK])

    def add_work(self, amount):
        self._sbox[_S_WORK] += amount

    @property
    def undecided(self):
        return int(self._sbox[_S_UNDEC])

    def mark(self):
        return int(self._sbox[_S_TOP])

    def undo_to(self, mark):
        _kernel_undo(mark, self.instance.machine,
                     self.instance.pair_a, self.instance.pair_b,
                     self.instance.pair_machine,
                     self.est, self.lct, self.orient,
                     self._msucc_cnt, self._mpred_cnt,
                     self.act_undec, self.mach_undec, self.mach_ver,
                     self._trail, self._sbox)

    def set_bound(self, bound):
        self.bound = min(int(bound), self.instance.horizon)

    def reset(self, bound=None):
        """Rewind to the root and install a fresh makespan bound."""
        self.undo_to(0)
        if bound is not None:
            self.bound = min(int(bound), self.instance.horizon)
        self.fails = 0

    def window(self, aid):
        return TimeWindow(int(self.est[aid]), int(self.lct[aid]))

    def makespan(self):
        return int((self.est + self.instance.duration).max())

    def snapshot_solution(self):
        vec = self.orient.astype(np.int8)
        vec.flags.writeable = False
        return Solution(vec, self.makespan())

    # -- kernel access ----------------------------------------------------

    def _step(self, pid, direction, seed_all):
        inst = self.instance
        while True:
            mark = self.mark()
            status = _kernel_step(
                pid, direction, 1 if seed_all else 0, self.bound,
                inst.duration, inst.machine, self._jsucc, self._jpred,
                inst.pair_a, inst.pair_b, inst.pair_machine,
                self._ap_flat, self._ap_start,
                self.est, self.lct, self.orient,
                self._msucc, self._msucc_cnt, self._mpred, self._mpred_cnt,
                self.act_undec, self.mach_undec, self.mach_ver,
                self._trail, self._sbox, self._queue, self._in_queue)
            if status != _OVERFLOW:
                return status == _OK
            self.undo_to(mark)
            self._trail = np.concatenate(
                [self._trail, np.zeros_like(self._trail)], axis=0)

    def decide(self, pid, direction):
        """Orient one pair and propagate; False on dead-end."""
        return self._step(pid, direction, seed_all=False)


def propagate(state: SearchState):
    """Run the propagation rules to fixpoint on the full activity set.

    Returns True at fixpoint, False on a dead-end (a "fail": some window
    collapsed or some pair lost both orientations).  Idempotent.
    """
    return state._step(-1, 0, seed_all=True)


# ---------------------------------------------------------------------------
# fail limit sequences
# ---------------------------------------------------------------------------

def luby(i):
    """Value of the Luby restart sequence (1,1,2,1,1,2,4,...) at 1-based i."""
    if i < 1:
        raise ValueError("luby index is 1-based")
    while True:
        if (i + 1) & i == 0:  # i == 2**k - 1
            return (i + 1) >> 1
        i = i - (1 << (i.bit_length() - 1)) + 1


@dataclass
class FailLimitSchedule:
    """Per-search fail limits: the Luby sequence (scaled by ``multiplier``,
    indexed by the global count of searches in the run) or the polynomial
    schedule (starts at 32, +32 after a non-improving search, reset to 32
    after an improving one)."""

    kind: str = LUBY
    multiplier: int = 1
    index: int = 0
    current: int = 0

    def next_limit(self, improved_last=False):
        if self.kind == LUBY:
            self.index += 1
            return self.multiplier * luby(self.index)
        if self.kind != POLY:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.current == 0 or improved_last:
            self.current = POLY_INCREMENT
        else:
            self.current += POLY_INCREMENT
        return self.current


def poly_limit(schedule: FailLimitSchedule, improved):
    """Next polynomial fail limit; ``improved`` says whether the previous
    search found a new best solution."""
    if schedule.kind != POLY:
        raise ValueError("poly_limit needs a POLY schedule")
    return schedule.next_limit(improved)


# ---------------------------------------------------------------------------
# tree search
# ---------------------------------------------------------------------------

def search(instance: Instance, *, fail_limit, bound,
           reference: Optional[Solution] = None,
           traversal: str = CHRON,
           heuristic: Optional[HeuristicConfig] = None,
           rng=None,
           state: Optional[SearchState] = None,
           work_limit=None,
           max_discrepancy=None,
           on_solution: Optional[Callable[[Solution], None]] = None) -> SearchOutcome:
    """One resource-limited tree search.

    Depth-first (chron) or discrepancy-ordered (lds) exploration under the
    given makespan bound.  Every propagation dead-end counts as one fail;
    the search stops once ``fail_limit`` fails were spent or the space is
    exhausted.  Each complete orientation reached is reported via
    ``on_solution`` and immediately tightens the in-search bound to its
    makespan minus one, so recorded makespans strictly decrease.

    ``work_limit`` aborts the search once the state's deterministic work
    counter passes it (checked at decision granularity).  The exhausted flag
    is only set when the tree was fully explored under the final bound.
    """
    if traversal not in (CHRON, LDS):
        raise ValueError(f"unknown traversal {traversal!r}")
    if heuristic is None:
        heuristic = HeuristicConfig()
    if rng is None and not heuristic.deterministic:
        raise ValueError("randomized heuristic needs an rng")
    if state is None:
        state = SearchState(instance)
    state.reset(bound)
    ref_vec = reference.orientations if reference is not None else None

    fails = 0
    best = None
    exhausted = False
    aborted = False

    if traversal == CHRON:
        budgets = [None]
    else:
        maxd = instance.num_pairs if max_discrepancy is None else int(max_discrepancy)
        budgets = list(range(min(maxd, instance.num_pairs) + 1))

    for budget in budgets:
        state.undo_to(0)
        frames: list[ChoicePoint] = []
        cur_disc = 0
        pruned = False
        pass_done = False

        def backtrack():
            """Flip the deepest frame with an untried branch (within the
            discrepancy budget) or pop exhausted frames.  Returns
            (moved, propagation_ok)."""
            nonlocal cur_disc, pruned
            while frames:
                f = frames[-1]
                if f.alternative is not None:
                    if budget is None or cur_disc + 1 <= budget:
                        state.undo_to(f.mark)
                        alt = f.alternative
                        f.alternative = None
                        f.used_alt = True
                        if budget is not None:
                            cur_disc += 1
                        return True, state.decide(f.pair, alt)
                    pruned = True
                state.undo_to(f.mark)
                frames.pop()
                if f.used_alt and budget is not None:
                    cur_disc -= 1
            return False, False

        ok = state._step(-1, 0, seed_all=True)
        while True:
            if work_limit is not None and state.work >= work_limit:
                aborted = True
                break
            if not ok:
                fails += 1
                state.fails = fails
                moved, ok = backtrack()
                if not moved:
                    pass_done = True
                    break
                if fails >= fail_limit:
                    aborted = True
                    break
                continue
            pid = select_pair(state, heuristic, rng)
            if pid is None:
                sol = state.snapshot_solution()
                best = sol
                if on_solution is not None:
                    on_solution(sol)
                state.set_bound(sol.makespan - 1)
                moved, ok = backtrack()
                if not moved:
                    pass_done = True
                    break
                continue
            first = order_pair(state, pid, ref_vec)
            frames.append(ChoicePoint(pid, first, 3 - first, state.mark()))
            ok = state.decide(pid, first)

        if aborted:
            break
        if pass_done and not pruned:
            exhausted = True
            break

    state.undo_to(0)
    return SearchOutcome(best=best, exhausted=exhausted, fails_used=fails)


def heuristic_descent(instance: Instance, *, heuristic=None, rng=None,
                      reference=None, state=None) -> Solution:
    """One no-backtracking descent with no makespan bound.

    Unbounded windows can never collapse, so the descent always completes;
    quality depends on the (randomized) pair selection.  Used to seed elite
    pools.
    """
    if heuristic is None:
        heuristic = HeuristicConfig()
    if rng is None and not heuristic.deterministic:
        raise ValueError("randomized heuristic needs an rng")
    if state is None:
        state = SearchState(instance)
    state.reset(instance.horizon)
    ref_vec = reference.orientations if reference is not None else None
    ok = state._step(-1, 0, seed_all=True)
    while ok:
        pid = select_pair(state, heuristic, rng)
        if pid is None:
            sol = state.snapshot_solution()
            state.undo_to(0)
            return sol
        ok = state.decide(pid, order_pair(state, pid, ref_vec))
    state.undo_to(0)
    raise RuntimeError("descent failed under an unbounded makespan")
