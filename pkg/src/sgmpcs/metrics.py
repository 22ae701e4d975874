"""Run records, diversity measurement, mean relative error, result tables.

A RunRecord is the unit of experimental output: one solver run on one
instance with one seed.  Records serialize to JSON (one document per run)
and aggregate into CSV tables: per-instance mean/best makespan per
algorithm with an MRE footer row, and a found/proved-optimal count table
for instances whose optimum is known.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def hamming(a, b):
    """Number of disjunctive pairs oriented differently in two solutions."""
    if len(a.orientations) != len(b.orientations):
        raise ValueError("solutions belong to different instances")
    return int(np.count_nonzero(a.orientations != b.orientations))


def mean_pairwise_diversity(members):
    """Mean pairwise Hamming distance over a solution pool (0 for size 1)."""
    members = list(members)
    if not members:
        raise ValueError("empty solution pool")
    k = len(members)
    if k == 1:
        return 0.0
    total = 0
    for i in range(k):
        for j in range(i + 1, k):
            total += hamming(members[i], members[j])
    return total / (k * (k - 1) // 2)


def mre(records, best_known):
    """Mean relative error of final costs against best-known costs.

    Arithmetic mean over records of (c - c*) / c*, where c* is the
    best-known upper bound for the record's instance.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    total = 0.0
    for rec in records:
        bk = best_known.get(rec.instance)
        if bk is None:
            raise KeyError(f"no best-known entry for instance {rec.instance!r}")
        total += (rec.best_makespan - bk.ub) / bk.ub
    return total / len(records)


@dataclass
class RunRecord:
    algorithm: str
    instance: str
    seed: int
    best_makespan: int = 0
    found_optimal: bool = False
    proved_optimal: bool = False
    empty_starts: int = 0
    guided_starts: int = 0
    searches: int = 0
    total_fails: int = 0
    cost_trajectory: list = field(default_factory=list)       # [seconds, makespan]
    diversity_trajectory: list = field(default_factory=list)  # [seconds, mean distance]
    config: dict = field(default_factory=dict)
    # per-search trace kept for tests/debugging, not serialized:
    # (elapsed, kind, fail_limit, bound, best_found, exhausted, fails)
    search_log: list = field(default_factory=list, repr=False, compare=False)

    _JSON_FIELDS = ("algorithm", "instance", "seed", "best_makespan",
                    "found_optimal", "proved_optimal", "empty_starts",
                    "guided_starts", "searches", "total_fails",
                    "cost_trajectory", "diversity_trajectory", "config")

    def to_json(self):
        doc = {name: getattr(self, name) for name in self._JSON_FIELDS}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        rec = cls(algorithm=doc["algorithm"], instance=doc["instance"], seed=doc["seed"])
        for name in cls._JSON_FIELDS[3:]:
            setattr(rec, name, doc[name])
        rec.cost_trajectory = [tuple(p) for p in rec.cost_trajectory]
        rec.diversity_trajectory = [tuple(p) for p in rec.diversity_trajectory]
        return rec

    def save(self, path):
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_json())
        tmp.replace(path)

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


class RunRecorder:
    """Builds a RunRecord during a run: cost points on every improvement,
    diversity points on every elite insertion plus a one-second cadence."""

    def __init__(self, record: RunRecord):
        self.record = record
        self.cur_cost = None
        self.cur_div = 0.0
        self._next_cadence = 1.0

    def improve(self, elapsed, cost):
        self._cadence(elapsed)
        self.cur_cost = cost
        self.record.cost_trajectory.append((elapsed, cost))
        self.record.best_makespan = cost

    def elite_event(self, elapsed, diversity):
        self._cadence(elapsed)
        self.cur_div = diversity
        self.record.diversity_trajectory.append((elapsed, diversity))

    def tick(self, elapsed):
        self._cadence(elapsed)

    def _cadence(self, elapsed):
        while self._next_cadence <= elapsed:
            t = self._next_cadence
            if self.cur_cost is not None:
                self.record.cost_trajectory.append((t, self.cur_cost))
            self.record.diversity_trajectory.append((t, self.cur_div))
            self._next_cadence += 1.0


def record_snapshot(recorder: RunRecorder, elapsed, cost, elite=None):
    """Append one trajectory point (and any due cadence points)."""
    diversity = elite.diversity() if elite is not None else 0.0
    recorder.cur_cost = cost
    recorder.elite_event(elapsed, diversity)


def load_records(directory):
    recs = [RunRecord.load(p) for p in sorted(Path(directory).glob("*.json"))]
    if not recs:
        raise FileNotFoundError(f"no RunRecord JSON files under {directory}")
    return recs


# ---------------------------------------------------------------------------
# result tables
# ---------------------------------------------------------------------------

def _by_instance_algorithm(records):
    table = {}
    for rec in records:
        table.setdefault(rec.instance, {}).setdefault(rec.algorithm, []).append(rec)
    return table


def result_table(records, best_known, algorithms=None):
    """Rows of (instance, lb, ub, then mean/best makespan per algorithm),
    plus an MRE footer computed over all runs (mean column) and over
    per-instance bests (best column)."""
    grouped = _by_instance_algorithm(records)
    missing = sorted(name for name in grouped if name not in best_known)
    if missing:
        raise KeyError(f"instances without best-known bounds: {', '.join(missing)}")
    if algorithms is None:
        algorithms = sorted({rec.algorithm for rec in records})
    header = ["instance", "lb", "ub"]
    for alg in algorithms:
        header += [f"{alg}_mean", f"{alg}_best"]
    rows = [header]
    mre_mean = {alg: [] for alg in algorithms}
    mre_best = {alg: [] for alg in algorithms}
    for name in sorted(grouped):
        bk = best_known[name]
        row = [name, bk.lb, bk.ub]
        for alg in algorithms:
            runs = grouped[name].get(alg, [])
            if not runs:
                row += ["", ""]
                continue
            costs = [r.best_makespan for r in runs]
            mean = sum(costs) / len(costs)
            best = min(costs)
            row += [f"{mean:.1f}", best]
            mre_mean[alg].extend((c - bk.ub) / bk.ub for c in costs)
            mre_best[alg].append((best - bk.ub) / bk.ub)
        rows.append(row)
    footer = ["MRE", "", ""]
    for alg in algorithms:
        fm = sum(mre_mean[alg]) / len(mre_mean[alg]) if mre_mean[alg] else ""
        fb = sum(mre_best[alg]) / len(mre_best[alg]) if mre_best[alg] else ""
        footer += [f"{fm:.8f}" if fm != "" else "", f"{fb:.8f}" if fb != "" else ""]
    rows.append(footer)
    return rows


def proof_table(records, best_known, algorithms=None):
    """Found/proved-optimal counts per algorithm for instances whose
    best-known entry is flagged optimal."""
    grouped = _by_instance_algorithm(records)
    if algorithms is None:
        algorithms = sorted({rec.algorithm for rec in records})
    header = ["instance", "optimal"]
    for alg in algorithms:
        header += [f"{alg}_found", f"{alg}_proved"]
    rows = [header]
    for name in sorted(grouped):
        bk = best_known.get(name)
        if bk is None or not bk.optimal:
            continue
        row = [name, bk.ub]
        for alg in algorithms:
            runs = grouped[name].get(alg, [])
            found = sum(1 for r in runs if r.best_makespan <= bk.ub or r.found_optimal)
            proved = sum(1 for r in runs if r.proved_optimal)
            row += [found, proved]
        rows.append(row)
    return rows


def write_csv(rows, path):
    text = "\n".join(",".join(str(v) for v in row) for row in rows) + "\n"
    Path(path).write_text(text)
