"""Job shop problem model, instance I/O and generation, and a brute-force oracle.

An n x m job shop instance is a grid of activities: job j visits each of the
m machines exactly once, in a fixed per-job order, with integer durations.
Activities are identified globally by ``job * m + position``.  Every pair of
activities that share a machine (and belong to different jobs) induces one
disjunctive pair; a solution orients all pairs acyclically and the makespan
is the longest path through the resulting DAG.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

ORIENT_UNDECIDED = 0
FIRST_BEFORE_SECOND = 1
SECOND_BEFORE_FIRST = 2


class InstanceError(ValueError):
    """Malformed instance text or invalid generator arguments."""


class CyclicError(ValueError):
    """The oriented disjunctive graph contains a cycle."""


@dataclass(frozen=True)
class Activity:
    job: int
    pos: int  # position within the job's machine routing
    machine: int
    duration: int


@dataclass(frozen=True)
class DisjunctivePair:
    """Unordered same-machine activity pair; ``first < second`` by global id."""

    first: int
    second: int
    machine: int


class Instance:
    """Immutable problem instance with derived arrays for the search engine.

    Attributes
    ----------
    n, m : job and machine counts
    activities : tuple of Activity in global-id order (job-major)
    pairs : tuple of DisjunctivePair, sorted by (machine, first, second)
    duration, machine, job_of, pos_of : int64 arrays indexed by activity id
    pair_a, pair_b, pair_machine : int64 arrays indexed by pair id
    """

    def __init__(self, n, m, activities, name=""):
        if len(activities) != n * m:
            raise InstanceError(f"expected {n * m} activities, got {len(activities)}")
        self.n = n
        self.m = m
        self.name = name
        self.activities = tuple(activities)

        self.duration = np.zeros(n * m, dtype=np.int64)
        self.machine = np.zeros(n * m, dtype=np.int64)
        self.job_of = np.zeros(n * m, dtype=np.int64)
        self.pos_of = np.zeros(n * m, dtype=np.int64)
        for act in self.activities:
            if act.duration < 1:
                raise InstanceError(f"duration must be >= 1, got {act.duration}")
            if not (0 <= act.machine < m):
                raise InstanceError(f"machine index {act.machine} out of range 0..{m - 1}")
            aid = act.job * m + act.pos
            self.duration[aid] = act.duration
            self.machine[aid] = act.machine
            self.job_of[aid] = act.job
            self.pos_of[aid] = act.pos

        for j in range(n):
            visited = sorted(self.machine[j * m:(j + 1) * m].tolist())
            if visited != list(range(m)):
                raise InstanceError(f"job {j} does not visit each machine exactly once")

        pairs = []
        for mch in range(m):
            on_mch = sorted(np.flatnonzero(self.machine == mch).tolist())
            for i, a in enumerate(on_mch):
                for b in on_mch[i + 1:]:
                    pairs.append(DisjunctivePair(a, b, mch))
        pairs.sort(key=lambda p: (p.machine, p.first, p.second))
        self.pairs = tuple(pairs)
        self.pair_a = np.array([p.first for p in pairs], dtype=np.int64).reshape(-1)
        self.pair_b = np.array([p.second for p in pairs], dtype=np.int64).reshape(-1)
        self.pair_machine = np.array([p.machine for p in pairs], dtype=np.int64).reshape(-1)
        for arr in (self.duration, self.machine, self.job_of, self.pos_of,
                    self.pair_a, self.pair_b, self.pair_machine):
            arr.flags.writeable = False

    @property
    def num_activities(self):
        return self.n * self.m

    @property
    def num_pairs(self):
        return len(self.pairs)

    @property
    def horizon(self):
        """Sum of all durations; an upper bound on any acyclic makespan."""
        return int(self.duration.sum())

    def activity_id(self, job, pos):
        return job * self.m + pos

    def __repr__(self):
        return f"Instance({self.name or '?'}: {self.n}x{self.m}, {self.num_pairs} pairs)"


@dataclass(frozen=True, eq=False)
class Solution:
    """A complete orientation of all disjunctive pairs plus its makespan.

    ``orientations[pid]`` is FIRST_BEFORE_SECOND or SECOND_BEFORE_FIRST for the
    pair with that id.  The stored makespan always equals
    ``makespan_of(instance, orientations)``.
    """

    orientations: np.ndarray  # int8, read-only
    makespan: int

    def same_orientations(self, other):
        return np.array_equal(self.orientations, other.orientations)


def make_solution(instance, orientations):
    """Build a Solution from an orientation vector, validating acyclicity."""
    vec = np.asarray(orientations, dtype=np.int8)
    ms = makespan_of(instance, vec)
    vec = vec.copy()
    vec.flags.writeable = False
    return Solution(vec, ms)


# ---------------------------------------------------------------------------
# best-known bounds file
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BestKnown:
    """Per-instance lower/upper bound and proven-optimal flag."""

    lb: int
    ub: int
    optimal: bool


def load_bounds(path):
    """Read a ``name,lb,ub,optimal`` CSV into a dict of BestKnown entries."""
    table = {}
    lines = Path(path).read_text().splitlines()
    for ln, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if ln == 0 and fields[0].lower() == "name":
            continue
        if len(fields) != 4:
            raise InstanceError(f"{path}:{ln + 1}: expected 4 CSV fields, got {len(fields)}")
        name, lb, ub, opt = fields
        lb, ub, opt = int(lb), int(ub), int(opt)
        if lb > ub:
            raise InstanceError(f"{path}:{ln + 1}: lb {lb} > ub {ub}")
        if opt not in (0, 1):
            raise InstanceError(f"{path}:{ln + 1}: optimal flag must be 0 or 1")
        if opt == 1 and lb != ub:
            raise InstanceError(f"{path}:{ln + 1}: optimal flag requires lb == ub")
        table[name] = BestKnown(lb, ub, bool(opt))
    return table


def save_bounds(table, path):
    lines = ["name,lb,ub,optimal"]
    for name in sorted(table):
        bk = table[name]
        lines.append(f"{name},{bk.lb},{bk.ub},{int(bk.optimal)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _int_tokens(text, where):
    try:
        return [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise InstanceError(f"{where}: non-integer token") from exc


def parse_orlib(text, name=""):
    """Parse OR-Library JSP text: header ``n m``, then n lines of m
    ``machine duration`` pairs with 0-indexed machines."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InstanceError("empty instance text")
    header = _int_tokens(lines[0], "header")
    if len(header) != 2:
        raise InstanceError(f"header must be 'n m', got {len(header)} tokens")
    n, m = header
    if n < 1 or m < 1:
        raise InstanceError(f"invalid dimensions {n}x{m}")
    if len(lines) - 1 != n:
        raise InstanceError(f"expected {n} job lines, got {len(lines) - 1}")
    activities = []
    for j in range(n):
        toks = _int_tokens(lines[1 + j], f"job {j}")
        if len(toks) != 2 * m:
            raise InstanceError(f"job {j}: expected {2 * m} tokens, got {len(toks)}")
        seen = set()
        for pos in range(m):
            mch, dur = toks[2 * pos], toks[2 * pos + 1]
            if not (0 <= mch < m):
                raise InstanceError(f"job {j}: machine index {mch} out of range")
            if mch in seen:
                raise InstanceError(f"job {j}: duplicate machine {mch}")
            if dur < 1:
                raise InstanceError(f"job {j}: duration {dur} < 1")
            seen.add(mch)
            activities.append(Activity(j, pos, mch, dur))
    return Instance(n, m, activities, name=name)


def parse_taillard(text, name=""):
    """Parse Taillard layout: a header line containing n and m (extra header
    numbers such as seeds or bounds are ignored), an n x m processing-times
    matrix, then an n x m machines matrix with 1-indexed machines.

    Non-numeric label lines ("Times", "Machines") are skipped.
    """
    tokens = []
    header = None
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            toks = [int(t) for t in line.split()]
        except ValueError:
            continue  # label line
        if header is None:
            if len(toks) < 2:
                raise InstanceError("header must contain n and m")
            header = toks
        else:
            tokens.extend(toks)
    if header is None:
        raise InstanceError("empty instance text")
    n, m = header[0], header[1]
    if n < 1 or m < 1:
        raise InstanceError(f"invalid dimensions {n}x{m}")
    if len(tokens) != 2 * n * m:
        raise InstanceError(
            f"matrix dimension mismatch: expected {2 * n * m} values, got {len(tokens)}")
    times = tokens[:n * m]
    machines = tokens[n * m:]
    activities = []
    for j in range(n):
        seen = set()
        for pos in range(m):
            dur = times[j * m + pos]
            mch = machines[j * m + pos] - 1  # normalize to 0-based
            if not (0 <= mch < m):
                raise InstanceError(f"job {j}: machine index {mch + 1} out of range 1..{m}")
            if mch in seen:
                raise InstanceError(f"job {j}: duplicate machine {mch + 1}")
            if dur < 1:
                raise InstanceError(f"job {j}: duration {dur} < 1")
            seen.add(mch)
            activities.append(Activity(j, pos, mch, dur))
    return Instance(n, m, activities, name=name)


def load_instance(path, fmt="auto"):
    """Load an instance file in OR-Library or Taillard layout.

    ``fmt`` is "orlib", "taillard", or "auto".  Auto-detection tries the
    OR-Library grammar first and falls back to Taillard; pass an explicit
    format to override.
    """
    path = Path(path)
    text = path.read_text()
    name = path.stem
    if fmt == "orlib":
        return parse_orlib(text, name=name)
    if fmt == "taillard":
        return parse_taillard(text, name=name)
    if fmt != "auto":
        raise ValueError(f"unknown format {fmt!r}")
    try:
        return parse_orlib(text, name=name)
    except InstanceError as orlib_err:
        try:
            return parse_taillard(text, name=name)
        except InstanceError as tail_err:
            raise InstanceError(
                f"{path}: not OR-Library ({orlib_err}) nor Taillard ({tail_err})")


def to_orlib(instance):
    """Render an instance in OR-Library text format."""
    lines = [f"{instance.n} {instance.m}"]
    for j in range(instance.n):
        toks = []
        for pos in range(instance.m):
            aid = instance.activity_id(j, pos)
            toks.append(f"{instance.machine[aid]} {instance.duration[aid]}")
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def to_taillard(instance):
    """Render an instance in Taillard text format (1-indexed machines)."""
    lines = [f"{instance.n} {instance.m}", "Times"]
    for j in range(instance.n):
        lines.append(" ".join(str(instance.duration[j * instance.m + pos])
                              for pos in range(instance.m)))
    lines.append("Machines")
    for j in range(instance.n):
        lines.append(" ".join(str(instance.machine[j * instance.m + pos] + 1)
                              for pos in range(instance.m)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def generate_workflow(n, m, duration_lo=1, duration_hi=99, seed=0, name=None):
    """Generate a work-flow JSP: every job visits a random permutation of the
    first m/2 machines, then a random permutation of the second m/2.

    Durations are i.i.d. uniform integers in [duration_lo, duration_hi].
    Deterministic for a fixed seed (numpy PCG64).
    """
    if m % 2 != 0:
        raise InstanceError(f"work-flow instances need an even machine count, got {m}")
    if not (1 <= duration_lo <= duration_hi):
        raise InstanceError(f"invalid duration bounds [{duration_lo}, {duration_hi}]")
    rng = np.random.Generator(np.random.PCG64(seed))
    half = m // 2
    activities = []
    for j in range(n):
        order = list(rng.permutation(half)) + list(half + rng.permutation(half))
        durs = rng.integers(duration_lo, duration_hi + 1, size=m)
        for pos in range(m):
            activities.append(Activity(j, pos, int(order[pos]), int(durs[pos])))
    if name is None:
        name = f"wf_{n}x{m}_{seed}"
    return Instance(n, m, activities, name=name)


def _taillard_unif(seed, low, high):
    """One step of the portable uniform generator used by Taillard's
    benchmark construction (Bratley, Fox & Schrage minimal standard with
    Schrage's decomposition).  Returns (new_seed, value in [low, high])."""
    m_, a, b, c = 2147483647, 16807, 127773, 2836
    k = seed // b
    seed = a * (seed % b) - c * k
    if seed < 0:
        seed += m_
    return seed, low + (seed * (high - low + 1)) // m_


def generate_taillard(n, m, time_seed, machine_seed, name=None):
    """Generate a JSP instance by Taillard's published procedure: durations
    uniform in [1, 99] from ``time_seed``; machine routings start as the
    identity and are shuffled by forward swaps driven by ``machine_seed``."""
    ts, ms = time_seed, machine_seed
    dur = [[0] * m for _ in range(n)]
    for j in range(n):
        for i in range(m):
            ts, v = _taillard_unif(ts, 1, 99)
            dur[j][i] = v
    order = [list(range(m)) for _ in range(n)]
    for j in range(n):
        for i in range(m):
            ms, v = _taillard_unif(ms, i, m - 1)
            order[j][i], order[j][v] = order[j][v], order[j][i]
    activities = []
    for j in range(n):
        for pos in range(m):
            activities.append(Activity(j, pos, order[j][pos], dur[j][pos]))
    if name is None:
        name = f"tg_{n}x{m}_{time_seed}_{machine_seed}"
    return Instance(n, m, activities, name=name)


# ---------------------------------------------------------------------------
# makespan evaluation and the exhaustive oracle
# ---------------------------------------------------------------------------

def makespan_of(instance, orientations):
    """Longest-path makespan of a full orientation vector.

    Raises CyclicError when the union of job-precedence arcs and oriented
    disjunctive arcs has a cycle.
    """
    vec = np.asarray(orientations)
    if len(vec) != instance.num_pairs:
        raise ValueError(f"expected {instance.num_pairs} orientations, got {len(vec)}")
    nact = instance.num_activities
    m = instance.m
    succs = [[] for _ in range(nact)]
    indeg = [0] * nact
    for aid in range(nact):
        if instance.pos_of[aid] + 1 < m:
            succs[aid].append(aid + 1)
            indeg[aid + 1] += 1
    for pid in range(instance.num_pairs):
        a, b = int(instance.pair_a[pid]), int(instance.pair_b[pid])
        d = int(vec[pid])
        if d == FIRST_BEFORE_SECOND:
            succs[a].append(b)
            indeg[b] += 1
        elif d == SECOND_BEFORE_FIRST:
            succs[b].append(a)
            indeg[a] += 1
        else:
            raise ValueError(f"pair {pid} is undecided")
    dur = instance.duration
    est = [0] * nact
    ready = [i for i in range(nact) if indeg[i] == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        done = est[v] + int(dur[v])
        for s in succs[v]:
            if est[s] < done:
                est[s] = done
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if seen != nact:
        raise CyclicError("oriented disjunctive graph has a cycle")
    return max(est[v] + int(dur[v]) for v in range(nact))


def enumerate_optimal(instance, max_pairs=25):
    """Exhaustively try all orientation vectors and return
    ``(optimal makespan, one optimal Solution)``.  Test oracle only."""
    p = instance.num_pairs
    if p > max_pairs:
        raise ValueError(f"{p} pairs exceeds enumeration guard of {max_pairs}")
    best = None
    best_vec = None
    vec = np.zeros(p, dtype=np.int8)
    for bits in range(1 << p):
        for i in range(p):
            vec[i] = FIRST_BEFORE_SECOND if (bits >> i) & 1 == 0 else SECOND_BEFORE_FIRST
        try:
            ms = makespan_of(instance, vec)
        except CyclicError:
            continue
        if best is None or ms < best:
            best = ms
            best_vec = vec.copy()
    assert best is not None  # some acyclic orientation always exists
    best_vec.flags.writeable = False
    return best, Solution(best_vec, best)
