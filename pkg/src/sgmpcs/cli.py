"""Experiment command line: solve instances, run crossed parameter sweeps,
generate work-flow instances, and assemble result tables.

Commands
--------
solve     run one algorithm on one instance for N seeded runs
sweep     run every (parameter cell, instance, run) of a JSON sweep spec
generate  write work-flow JSP instance files in OR-Library format
report    aggregate RunRecord JSON files into result/proof CSV tables

Exit codes: 0 ok, 2 bad flags or malformed spec, 3 unreadable instance,
4 missing best-known bounds entries.

Runs are reproducible: run r of a command uses seed ``base_seed + r`` in
deterministic enumeration order, and all budgets are logical seconds, so a
repeated invocation writes byte-identical records.  The base seed falls
back to the SGMPCS_SEED environment variable when --seed is omitted.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import itertools
import json
import multiprocessing
import os
import sys
from pathlib import Path

from . import instance as inst_mod
from . import metrics, solver

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INSTANCE = 3
EXIT_BOUNDS = 4


def _base_seed(value):
    if value is not None:
        return value
    env = os.environ.get("SGMPCS_SEED")
    return int(env) if env else 0


def _record_path(outdir, record):
    return Path(outdir) / f"{record.instance}__{record.algorithm}__seed{record.seed}.json"


def _run_job(job):
    """One (instance path, algorithm, config, outdir) run in a worker."""
    path, fmt, algorithm, config, outdir = job
    instance = inst_mod.load_instance(path, fmt=fmt)
    best, inc, record = solver.run_algorithm(instance, algorithm, config)
    record.save(_record_path(outdir, record))
    return record


def _pool_map(jobs, max_parallel):
    if max_parallel <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    ctx = multiprocessing.get_context("fork")
    with cf.ProcessPoolExecutor(max_workers=max_parallel, mp_context=ctx) as pool:
        return list(pool.map(_run_job, jobs))


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args):
    try:
        instance = inst_mod.load_instance(args.instance, fmt=args.format)
    except (OSError, inst_mod.InstanceError) as exc:
        print(f"error: cannot read instance: {exc}", file=sys.stderr)
        return EXIT_INSTANCE
    base = _base_seed(args.seed)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = []
    try:
        for r in range(args.runs):
            config = solver.EngineConfig(
                elite_size=args.elite_size, p=args.p, seq=args.seq, bt=args.bt,
                div=args.div, bound_policy=args.bound, time_limit=args.time_limit,
                seed=base + r, critical_fraction=args.critical_fraction,
                init_samples=args.init_samples).validate()
            jobs.append((args.instance, args.format, args.algorithm, config, outdir))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    records = _pool_map(jobs, args.max_parallel)
    costs = [rec.best_makespan for rec in records]
    proved = sum(rec.proved_optimal for rec in records)
    print(f"{instance.name} algorithm={args.algorithm} runs={args.runs} "
          f"best={min(costs)} mean={sum(costs) / len(costs):.1f} "
          f"proved={proved}/{args.runs}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_SWEEP_DEFAULTS = {
    "elite_sizes": [4], "p_values": [0.25], "seqs": ["luby"], "bts": ["chron"],
    "divs": ["low"], "runs": 1, "time_limit": 60.0, "base_seed": 0,
    "bound_policy": "global", "algorithm": "sgmpcs", "bounds": None,
}


def _load_sweep_spec(path):
    spec = dict(_SWEEP_DEFAULTS)
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError("sweep spec must be a JSON object")
    unknown = set(doc) - set(_SWEEP_DEFAULTS) - {"instances"}
    if unknown:
        raise ValueError(f"unknown sweep spec fields: {sorted(unknown)}")
    spec.update(doc)
    if not spec.get("instances"):
        raise ValueError("sweep spec needs a non-empty 'instances' list")
    if spec["runs"] < 1:
        raise ValueError("runs must be >= 1")
    for key in ("elite_sizes", "p_values", "seqs", "bts", "divs"):
        if not isinstance(spec[key], list) or not spec[key]:
            raise ValueError(f"'{key}' must be a non-empty list")
    return spec


def _sweep_cells(spec):
    return list(itertools.product(spec["elite_sizes"], spec["p_values"],
                                  spec["seqs"], spec["bts"], spec["divs"]))


def cmd_sweep(args):
    try:
        spec = _load_sweep_spec(args.spec)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: bad sweep spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    outdir = Path(args.out)
    runs_dir = outdir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    cells = _sweep_cells(spec)

    jobs = []
    cell_of_job = []
    seed = spec["base_seed"]
    try:
        if spec["algorithm"] not in solver.ALGORITHMS:
            raise ValueError(f"unknown algorithm {spec['algorithm']!r}")
        for ci, (e, p, seq, bt, div) in enumerate(cells):
            for path in spec["instances"]:
                for _ in range(spec["runs"]):
                    config = solver.EngineConfig(
                        elite_size=e, p=p, seq=seq, bt=bt, div=div,
                        bound_policy=spec["bound_policy"],
                        time_limit=spec["time_limit"], seed=seed).validate()
                    jobs.append((path, "auto", spec["algorithm"], config, runs_dir))
                    cell_of_job.append(ci)
                    seed += 1
    except (TypeError, ValueError) as exc:
        print(f"error: bad sweep spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    records = _pool_map(jobs, args.max_parallel)

    if spec["bounds"]:
        best_known = inst_mod.load_bounds(spec["bounds"])
    else:
        # like the source experiments on generated instances: the reference
        # cost per instance is the best found by any run in the sweep
        best = {}
        for rec in records:
            cur = best.get(rec.instance)
            if cur is None or rec.best_makespan < cur:
                best[rec.instance] = rec.best_makespan
        best_known = {name: inst_mod.BestKnown(v, v, False) for name, v in best.items()}

    rows = [["elite_size", "p", "seq", "bt", "div", "runs", "mre"]]
    cell_mre = []
    for ci, (e, p, seq, bt, div) in enumerate(cells):
        cell_records = [rec for rec, c in zip(records, cell_of_job) if c == ci]
        value = metrics.mre(cell_records, best_known)
        cell_mre.append(value)
        rows.append([e, p, seq, bt, div, len(cell_records), f"{value:.8f}"])
    metrics.write_csv(rows, outdir / "cells.csv")

    ranked = sorted(range(len(cells)), key=lambda ci: (cell_mre[ci], ci))
    summary = [["rank", "elite_size", "p", "seq", "bt", "div", "mre"]]
    show = min(5, len(cells))
    for r, ci in enumerate(ranked[:show]):
        summary.append([f"best_{r + 1}", *cells[ci], f"{cell_mre[ci]:.8f}"])
    for r, ci in enumerate(ranked[-show:]):
        summary.append([f"worst_{show - r}", *cells[ci], f"{cell_mre[ci]:.8f}"])
    metrics.write_csv(summary, outdir / "summary.csv")
    print(f"sweep: {len(cells)} cells, {len(jobs)} runs -> {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args):
    if args.m % 2 != 0:
        print("error: work-flow instances need an even machine count", file=sys.stderr)
        return EXIT_USAGE
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        name = f"wf_{args.n}x{args.m}_{args.seed}_{i}"
        instance = inst_mod.generate_workflow(
            args.n, args.m, args.duration_lo, args.duration_hi,
            seed=args.seed + i, name=name)
        (outdir / f"{name}.jss").write_text(inst_mod.to_orlib(instance))
    print(f"generated {args.count} instances under {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args):
    try:
        records = metrics.load_records(args.records)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read records: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        best_known = inst_mod.load_bounds(args.bounds)
    except (OSError, inst_mod.InstanceError) as exc:
        print(f"error: cannot read bounds: {exc}", file=sys.stderr)
        return EXIT_USAGE
    missing = sorted({rec.instance for rec in records} - set(best_known))
    if missing:
        for name in missing:
            print(f"error: no best-known bounds for instance {name}", file=sys.stderr)
        return EXIT_BOUNDS
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics.write_csv(metrics.result_table(records, best_known), out)
    proofs = metrics.proof_table(records, best_known)
    proofs_path = out.with_name(out.stem + "_proofs" + out.suffix)
    metrics.write_csv(proofs, proofs_path)
    print(f"wrote {out} and {proofs_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _float_in(lo, hi):
    def parse(text):
        value = float(text)
        if not (lo <= value <= hi):
            raise argparse.ArgumentTypeError(f"value {value} not in [{lo}, {hi}]")
        return value
    return parse


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"value must be >= 1, got {value}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgmpcs",
        description="Job shop scheduling with solution-guided multi-point constructive search")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one algorithm on one instance")
    p_solve.add_argument("--instance", required=True)
    p_solve.add_argument("--algorithm", choices=solver.ALGORITHMS, default="sgmpcs")
    p_solve.add_argument("--elite-size", type=_positive_int, default=4)
    p_solve.add_argument("--p", type=_float_in(0.0, 1.0), default=0.25)
    p_solve.add_argument("--seq", choices=["luby", "poly"], default="luby")
    p_solve.add_argument("--bt", choices=["chron", "lds"], default="chron")
    p_solve.add_argument("--div", choices=["low", "med", "high"], default="low")
    p_solve.add_argument("--bound", choices=["global", "local"], default="global")
    p_solve.add_argument("--time-limit", type=float, default=60.0)
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("--runs", type=_positive_int, default=1)
    p_solve.add_argument("--output", default="records")
    p_solve.add_argument("--format", choices=["auto", "orlib", "taillard"], default="auto")
    p_solve.add_argument("--critical-fraction", type=_float_in(1e-9, 1.0), default=0.10)
    p_solve.add_argument("--init-samples", type=_positive_int, default=50)
    p_solve.add_argument("--max-parallel", type=_positive_int,
                         default=os.cpu_count() or 1)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run a crossed parameter sweep from a JSON spec")
    p_sweep.add_argument("--spec", required=True)
    p_sweep.add_argument("--out", default="sweep")
    p_sweep.add_argument("--max-parallel", type=_positive_int,
                         default=os.cpu_count() or 1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("generate", help="generate work-flow JSP instances")
    p_gen.add_argument("--n", type=_positive_int, default=20)
    p_gen.add_argument("--m", type=_positive_int, default=20)
    p_gen.add_argument("--count", type=_positive_int, default=1)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--duration-lo", type=_positive_int, default=1)
    p_gen.add_argument("--duration-hi", type=_positive_int, default=99)
    p_gen.add_argument("--out", default="instances")
    p_gen.set_defaults(func=cmd_generate)

    p_rep = sub.add_parser("report", help="aggregate run records into CSV tables")
    p_rep.add_argument("--records", required=True)
    p_rep.add_argument("--bounds", required=True)
    p_rep.add_argument("--out", required=True)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
