"""Contention-driven pair selection and (solution-guided) value ordering.

Variable ordering treats each activity as if its start were uniformly random
inside its current window; the *individual demand* of an activity at integer
time t is the probability it executes at t.  Summing demands of the not yet
fully sequenced activities on a machine gives a contention profile; the
(machine, time) points are sampled at window event points only (each
activity's earliest and latest start), ranked by contention, and one is
drawn uniformly from the top fraction.  The branching pair on the chosen
machine is the undecided pair with the highest summed demand at that point.

Value ordering prefers the orientation found in a reference solution when
one is given and that orientation still passes the pairwise window test;
otherwise it schedules the activity with the smaller earliest start first.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


def _jit(fn):
    if os.environ.get("SGMPCS_PURE_PYTHON"):
        return fn
    try:
        import numba
    except ImportError:
        return fn
    return numba.njit(cache=True)(fn)


@dataclass
class HeuristicConfig:
    """critical_fraction is the top share of (machine, time) points eligible
    for the uniform draw; deterministic mode collapses the draw to the
    single most contended point (used by the non-randomized baselines)."""

    critical_fraction: float = 0.10
    deterministic: bool = False

    def __post_init__(self):
        if not (0.0 < self.critical_fraction <= 1.0):
            raise ValueError(f"critical_fraction must be in (0, 1], got {self.critical_fraction}")


@dataclass(frozen=True)
class ContentionPoint:
    machine: int
    time: int
    contention: float


def individual_demand(activity, window, t):
    """Probability that the activity runs at integer time t under a start
    drawn uniformly from [est, lct - duration]."""
    dur = activity.duration
    est = window.est
    lst = window.lct - dur
    lo = max(t - dur + 1, est)
    hi = min(t, lst)
    if hi < lo:
        return 0.0
    return (hi - lo + 1) / (lst - est + 1)


def _contention_kernel(acts, act_undec, est, lct, dur):
    """Unsequenced activities on one machine, their event points, per-point
    demand matrix and summed contention."""
    n = acts.shape[0]
    u_ids = np.empty(n, dtype=np.int64)
    cnt = 0
    for k in range(n):
        a = acts[k]
        if act_undec[a] > 0:
            u_ids[cnt] = a
            cnt += 1
    u_ids = u_ids[:cnt]
    raw = np.empty(2 * cnt, dtype=np.int64)
    for k in range(cnt):
        a = u_ids[k]
        raw[2 * k] = est[a]
        raw[2 * k + 1] = lct[a] - dur[a]
    raw.sort()
    pts = np.empty(2 * cnt, dtype=np.int64)
    npts = 0
    for k in range(2 * cnt):
        if npts == 0 or raw[k] != pts[npts - 1]:
            pts[npts] = raw[k]
            npts += 1
    pts = pts[:npts]
    dem = np.zeros((cnt, npts), dtype=np.float64)
    cont = np.zeros(npts, dtype=np.float64)
    for r in range(cnt):
        a = u_ids[r]
        ea = est[a]
        da = dur[a]
        la = lct[a] - da
        denom = 1.0 / (la - ea + 1)
        for c in range(npts):
            t = pts[c]
            lo = t - da + 1
            if lo < ea:
                lo = ea
            hi = t
            if hi > la:
                hi = la
            if hi >= lo:
                v = (hi - lo + 1) * denom
                dem[r, c] = v
                cont[c] += v
    return u_ids, pts, cont, dem


_contention_kernel = _jit(_contention_kernel)


def _machine_profile(state, mch):
    """Cached (u_ids, points, contention, demand) for one machine; the cache
    key is the machine's mutation version counter."""
    ver = int(state.mach_ver[mch])
    cached = state.heur_cache[mch]
    if cached is not None and cached[0] == ver:
        return cached
    u_ids, pts, cont, dem = _contention_kernel(
        state.acts_on_mach[mch], state.act_undec, state.est, state.lct,
        state.instance.duration)
    state.add_work(u_ids.shape[0] * pts.shape[0] + 8)
    cached = (ver, u_ids, pts, cont, dem)
    state.heur_cache[mch] = cached
    return cached


def contention_points(state):
    """All sampled (machine, time, contention) points for the current state,
    over machines that still have undecided pairs."""
    out = []
    for mch in np.flatnonzero(state.mach_undec > 0):
        _, pts, cont, _ = _machine_profile(state, int(mch))[1:]
        for t, c in zip(pts.tolist(), cont.tolist()):
            out.append(ContentionPoint(int(mch), t, c))
    return out


def select_pair(state, config: HeuristicConfig, rng=None):
    """Pick the next disjunctive pair to branch on, or None at a leaf.

    Ranks every sampled (machine, time) point by contention (ties broken by
    machine then time), draws uniformly among the top
    ceil(critical_fraction * count) points, then returns the undecided pair
    on that machine whose activities have the largest summed demand at the
    drawn point (ties go to the canonically first pair).
    """
    if state.undecided == 0:
        return None
    machines = np.flatnonzero(state.mach_undec > 0)
    pts_parts = []
    cont_parts = []
    mach_parts = []
    for mch in machines:
        mch = int(mch)
        _, _, pts, cont, _ = _machine_profile(state, mch)
        pts_parts.append(pts)
        cont_parts.append(cont)
        mach_parts.append(np.full(pts.shape[0], mch, dtype=np.int64))
    pts_all = np.concatenate(pts_parts)
    cont_all = np.concatenate(cont_parts)
    mach_all = np.concatenate(mach_parts)
    count = pts_all.shape[0]
    state.add_work(count + 16)

    order = np.lexsort((pts_all, mach_all, -cont_all))
    if config.deterministic:
        choice = int(order[0])
    else:
        k = int(np.ceil(config.critical_fraction * count))
        k = min(max(k, 1), count)
        choice = int(order[int(rng.integers(k))])
    mch = int(mach_all[choice])
    t = int(pts_all[choice])

    _, u_ids, pts, _, dem = _machine_profile(state, mch)
    col = int(np.searchsorted(pts, t))
    demand_of = np.zeros(state.instance.num_activities, dtype=np.float64)
    demand_of[u_ids] = dem[:, col]
    pids = state.pairs_on_mach[mch]
    scores = demand_of[state.instance.pair_a[pids]] + demand_of[state.instance.pair_b[pids]]
    scores[state.orient[pids] != 0] = -1.0
    state.add_work(pids.shape[0])
    return int(pids[int(np.argmax(scores))])


def order_pair(state, pid, reference_vec=None):
    """Orientation to try first for an undecided pair.

    With a reference solution: its orientation, provided the pairwise window
    test still allows it.  Fallback: schedule first the activity with the
    smaller earliest start (ties: smaller latest completion, then smaller
    id).  Returns 1 for first-before-second, 2 for the reverse.
    """
    inst = state.instance
    a = int(inst.pair_a[pid])
    b = int(inst.pair_b[pid])
    est, lct, dur = state.est, state.lct, inst.duration
    if reference_vec is not None:
        d = int(reference_vec[pid])
        if d == 1 and est[a] + dur[a] + dur[b] <= lct[b]:
            return 1
        if d == 2 and est[b] + dur[b] + dur[a] <= lct[a]:
            return 2
    if (est[a], lct[a], a) <= (est[b], lct[b], b):
        return 1
    return 2
