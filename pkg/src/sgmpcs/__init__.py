"""Job shop scheduling via solution-guided multi-point constructive search."""

from .engine import (CHRON, LDS, LUBY, POLY, ChoicePoint, FailLimitSchedule,
                     SearchOutcome, SearchState, TimeWindow, heuristic_descent,
                     luby, poly_limit, propagate, search)
from .heuristics import (ContentionPoint, HeuristicConfig, contention_points,
                         individual_demand, order_pair, select_pair)
from .instance import (Activity, BestKnown, CyclicError, DisjunctivePair,
                       Instance, InstanceError, Solution, enumerate_optimal,
                       generate_taillard, generate_workflow, load_bounds,
                       load_instance, make_solution, makespan_of, parse_orlib,
                       parse_taillard, save_bounds, to_orlib, to_taillard)
from .metrics import (RunRecord, RunRecorder, hamming, load_records,
                      mean_pairwise_diversity, mre, proof_table, record_snapshot,
                      result_table, write_csv)
from .solver import (ALGORITHMS, DIV_HIGH, DIV_LOW, DIV_MED, GLOBAL, LOCAL,
                     EliteSet, EngineConfig, Incumbent, init_elite,
                     replace_elite, run_algorithm, run_baseline, run_sgmpcs)

__version__ = "0.1.0"
