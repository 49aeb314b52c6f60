"""Optimal planning in hierarchical Mealy machines.

Exit costs of every machine are computed once (:func:`compute_exit_tables`);
each query then solves a reduced problem over the two root paths of its
endpoints (:func:`plan`) and expands the result into a concrete input plan.
"""

from ._jit import backend_name
from .core import (INF, HiMMError, Hierarchy, HierarchyStats, MealyMachine, Node, Run,
                   Violation, format_state, hierarchical_step, parse_state, replay_cost,
                   run_plan, start_state, stats, validate)
from .exits import ExitCostTable, augment, compute_exit_tables, dijkstra_multi, exit_cost
from .generators import (RandomParams, WarehouseParams, gen_nested, gen_random, gen_recursive,
                         gen_warehouse, opposite_states, warehouse_query)
from .io import load_cache, parse_himm, save_cache, serialize_himm
from .oracle import (FlatMachine, brute_force_exit_cost, brute_force_machine_exit_cost,
                     flat_plan, flatten)
from .planner import (PathDecomposition, Planner, PlanResult, ReducedHiMM, build_search_graph,
                      compute_paths, compute_transitions, expand_plan, iter_plan,
                      optimal_expansion, plan, reduce, solve_reduced)

__version__ = "0.1.0"
