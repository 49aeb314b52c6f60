"""Online step: reduce the hierarchy to the two root paths of a query, solve, expand.

Only the machines on the paths from ``s_init`` and ``s_goal`` up to the root
are kept. Every other subtree is summarised by its exit costs, so each query
touches ``O(depth)`` small machines instead of the flat state space.

Part 1 searches a small graph whose vertices are states of the reduced
hierarchy on the init side and whose arcs are single-machine Dijkstra runs.
It ends at the node ``B`` of the meeting machine that leads towards the
goal. Part 2 descends from ``start(B)`` to the goal one machine at a time.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import kernels
from .core import INF, GlobalState, HiMMError, Hierarchy, HierarchyIndex
from .exits import ExitCostTable


@dataclass(frozen=True)
class PathDecomposition:
    """Root paths of a query.

    ``U[i-1]`` is machine ``U_i`` (``U_1`` holds ``s_init``, ``U_n`` is the
    root), likewise ``D``. ``u_chain[0]`` is the init node and
    ``u_chain[i]`` the node of ``U_{i+1}`` refined into ``U_i``. The meeting
    machine is ``U_{alpha+1} = D_{beta+1}`` and ``b_node = d_chain[beta]``.
    """

    init: int
    goal: int
    U: tuple
    D: tuple
    u_chain: tuple
    d_chain: tuple
    alpha: int
    beta: int

    @property
    def n(self) -> int:
        return len(self.U)

    @property
    def m(self) -> int:
        return len(self.D)

    @property
    def meeting(self) -> int:
        return self.U[self.alpha]

    @property
    def b_node(self) -> int:
        return self.d_chain[self.beta]


def _chain(ix: HierarchyIndex, v: int) -> tuple:
    machines, nodes = [], [v]
    m = int(ix.node_machine[v])
    while True:
        machines.append(m)
        p = int(ix.parent_node[m])
        if p < 0:
            break
        nodes.append(p)
        m = int(ix.node_machine[p])
    return tuple(machines), tuple(nodes)


def compute_paths(h: Hierarchy, s_init, s_goal) -> PathDecomposition:
    ix = h.index
    a, b = ix.resolve_state(s_init), ix.resolve_state(s_goal)
    U, uc = _chain(ix, a)
    D, dc = _chain(ix, b)
    common = 0
    while common < min(len(U), len(D)) and U[-1 - common] == D[-1 - common]:
        common += 1
    return PathDecomposition(a, b, U, D, uc, dc, len(U) - common, len(D) - common)


class ReducedHiMM:
    """The hierarchy restricted to the machines of a decomposition.

    A view: nothing is copied. ``gamma_bar`` folds the exit cost of every
    pruned subtree into the transitions leaving it.
    """

    def __init__(self, h: Hierarchy, table: ExitCostTable, dec: PathDecomposition):
        self.h = h
        self.index = h.index
        self.table = table
        self.dec = dec
        self.kept = frozenset(dec.U) | frozenset(dec.D)

    def _kept_child(self, v: int) -> bool:
        return int(self.index.node_child[v]) in self.kept

    def is_state(self, v: int) -> bool:
        """States of the reduced system: nodes of kept machines not refined into kept ones."""
        return int(self.index.node_machine[v]) in self.kept and not self._kept_child(v)

    def gamma_bar(self, v: int, xi: int) -> float:
        ix = self.index
        defined = ix.trans_next[v, xi] >= 0
        if self._kept_child(v):
            return float(ix.trans_cost[v, xi]) if defined else 0.0
        c = ix.node_child[v]
        exit_c = 0.0 if c < 0 else float(self.table.cost_array[c, xi])
        return exit_c + float(ix.trans_cost[v, xi]) if defined else exit_c

    def _descend(self, t: int) -> int:
        ix = self.index
        while self._kept_child(t):
            t = int(ix.start_node[ix.node_child[t]])
        return t

    def start(self, m: int) -> int:
        return self._descend(int(self.index.start_node[m]))

    def step(self, v: int, xi: int) -> tuple:
        """Reduced transition and output: ``(next state, cost)`` or ``(-1, inf)``.

        Unlike the full system the output accumulates ``gamma_bar`` over every
        climbed level.
        """
        ix = self.index
        total = 0.0
        u = v
        while u >= 0:
            g = self.gamma_bar(u, xi)
            if g == INF:
                return -1, INF
            total += g
            t = ix.trans_next[u, xi]
            if t >= 0:
                return self._descend(int(t)), total
            u = int(ix.parent_node[ix.node_machine[u]])
        return -1, INF

    def cost(self, v: int, steps) -> float:
        """Reduced cumulative cost of ``steps`` from ``v`` (inf if infeasible)."""
        total = 0.0
        for q, xi in steps:
            if q != v:
                return INF
            v, c = self.step(q, xi)
            if v < 0:
                return INF
            total += c
        return total


def reduce(h: Hierarchy, s_init, s_goal, table: ExitCostTable) -> ReducedHiMM:
    return ReducedHiMM(h, table, compute_paths(h, s_init, s_goal))


@dataclass
class Transitions:
    """Where leaving ``U_i`` with each input lands, and where entering ``U_i`` descends to.

    Rows are 1-based levels. ``exit_to[i, x]`` is a reduced state (or
    ``B``) and ``exit_cost[i, x]`` the cost of the transition that fires
    above ``U_i``; ``-1``/inf when no level above defines ``x``.
    """

    exit_to: np.ndarray
    exit_cost: np.ndarray
    enter: np.ndarray

    def exits_open(self, i: int) -> np.ndarray:
        return self.exit_to[i] >= 0


def compute_transitions(reduced: ReducedHiMM) -> Transitions:
    ix, dec = reduced.index, reduced.dec
    n, k = dec.n, len(ix.inputs)

    enter = np.full(n + 1, -1, dtype=np.int64)

    def resolve(level: int, v: int) -> int:
        if level >= 2 and v == dec.u_chain[level - 1]:
            return int(enter[level - 1])
        return v

    enter[0] = dec.init
    for i in range(1, n + 1):
        enter[i] = resolve(i, int(ix.start_node[dec.U[i - 1]]))

    exit_to = np.full((n + 1, k), -1, dtype=np.int64)
    exit_cost = np.full((n + 1, k), INF)
    for i in range(n - 1, 0, -1):
        up = dec.u_chain[i]
        for xi in range(k):
            t = int(ix.trans_next[up, xi])
            if t >= 0:
                exit_to[i, xi] = resolve(i + 1, t)
                exit_cost[i, xi] = float(ix.trans_cost[up, xi])
            else:
                exit_to[i, xi] = exit_to[i + 1, xi]
                exit_cost[i, xi] = exit_cost[i + 1, xi]
    return Transitions(exit_to, exit_cost, enter)


@dataclass
class _Search:
    """One single-machine Dijkstra run from a graph vertex."""

    lo: int
    n: int
    dist: np.ndarray
    pred_v: np.ndarray
    pred_x: np.ndarray

    def segment(self, target: int) -> list:
        steps = []
        t = target
        while self.pred_v[t] >= 0:
            p = int(self.pred_v[t])
            steps.append((self.lo + p, int(self.pred_x[t])))
            t = p
        steps.reverse()
        return steps


@dataclass
class SearchGraph:
    """Vertices are reduced states on the init side plus ``B``.

    ``arcs[v]`` lists ``(cost, w, search, local target)`` and the witness
    segment is recovered from the stored search on demand.
    """

    source: int
    target: int
    arcs: dict = field(default_factory=dict)
    searches: int = 0

    @property
    def n_vertices(self) -> int:
        seen = set(self.arcs)
        for out in self.arcs.values():
            seen.update(w for _, w, _, _ in out)
        seen.add(self.source)
        return len(seen)


def build_search_graph(reduced: ReducedHiMM, trans: Transitions) -> SearchGraph:
    ix, dec, table = reduced.index, reduced.dec, reduced.table
    b = dec.b_node
    g = SearchGraph(dec.init, b)
    levels = {m: i + 1 for i, m in enumerate(dec.U)}
    work = [dec.init]
    seen = {dec.init}
    while work:
        v = work.pop()
        if v == b:
            g.arcs[v] = []
            continue
        i = levels[int(ix.node_machine[v])]
        m = dec.U[i - 1]
        lo, hi = int(ix.offsets[m]), int(ix.offsets[m + 1])
        sink0 = dec.u_chain[i - 1] if i >= 2 else -1
        sink1 = b if i == dec.alpha + 1 else -1
        dist, pred_v, pred_x = kernels.machine_search(
            v, lo, hi, ix.trans_next, ix.trans_cost, ix.node_child, table.cost_array,
            sink0, sink1, trans.exits_open(i))
        g.searches += 1
        s = _Search(lo, hi - lo, dist, pred_v, pred_x)
        out = []
        if sink0 >= 0 and dist[sink0 - lo] < INF:
            out.append((float(dist[sink0 - lo]), int(trans.enter[i - 1]), s, sink0 - lo))
        if sink1 >= 0 and dist[sink1 - lo] < INF:
            out.append((float(dist[sink1 - lo]), b, s, sink1 - lo))
        for xi in range(len(ix.inputs)):
            d = dist[s.n + xi]
            w = int(trans.exit_to[i, xi])
            if w >= 0 and d < INF:
                out.append((float(d + trans.exit_cost[i, xi]), w, s, s.n + xi))
        g.arcs[v] = out
        for _, w, _, _ in out:
            if w not in seen:
                seen.add(w)
                work.append(w)
    return g


@dataclass
class ReducedSolution:
    feasible: bool
    cost: float
    steps: list  # [(node, input index)] of the reduced trajectory
    part1_cost: float = INF
    part2_cost: float = INF


def solve_reduced(reduced: ReducedHiMM, graph: SearchGraph) -> ReducedSolution:
    ix, dec, table = reduced.index, reduced.dec, reduced.table
    # part 1: init -> B over the search graph
    dist = {graph.source: 0.0}
    pred = {}
    done = set()
    seq = itertools.count()
    heap = [(0.0, next(seq), graph.source)]
    while heap:
        d, _, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == graph.target:
            break
        for c, w, s, t in graph.arcs.get(v, ()):
            nd = d + c
            if nd < dist.get(w, INF):
                dist[w] = nd
                pred[w] = (v, s, t)
                heapq.heappush(heap, (nd, next(seq), w))
    if graph.target not in done:
        return ReducedSolution(False, INF, [])
    part1 = dist[graph.target]
    segments = []
    v = graph.target
    while v != graph.source:
        v, s, t = pred[v]
        segments.append(s.segment(t))
    steps = [st for seg in reversed(segments) for st in seg]

    # part 2: start(B) -> goal, one machine at a time
    part2 = 0.0
    no_exits = np.zeros(len(ix.inputs), dtype=np.bool_)
    level = dec.beta
    while level > 0:
        m = dec.D[level - 1]
        src = int(ix.start_node[m])
        sink = dec.d_chain[level - 1]
        if src != sink:
            lo, hi = int(ix.offsets[m]), int(ix.offsets[m + 1])
            d, pv, px = kernels.machine_search(
                src, lo, hi, ix.trans_next, ix.trans_cost, ix.node_child, table.cost_array,
                sink, -1, no_exits)
            if d[sink - lo] == INF:
                return ReducedSolution(False, INF, [])
            part2 += float(d[sink - lo])
            steps.extend(_Search(lo, hi - lo, d, pv, px).segment(sink - lo))
        level -= 1
    return ReducedSolution(True, part1 + part2, steps, part1, part2)


def optimal_expansion(table: ExitCostTable, v: int, xi: int) -> Iterator[tuple]:
    """Yield the state-level steps of an optimal exit of node ``v`` with input ``xi``."""
    c = int(table.index.node_child[v])
    if c < 0:
        yield v, xi
        return
    steps = table.witness_nodes(c, xi)
    if not steps:
        raise HiMMError(f"no {table.index.inputs[xi]!r}-exit from {table.index.node_name(v)}")
    for q, u in steps:
        yield from optimal_expansion(table, q, u)


def iter_plan(table: ExitCostTable, steps) -> Iterator[str]:
    """Stream the inputs of the expanded plan, one at a time."""
    inputs = table.index.inputs
    for q, xi in steps:
        for _, u in optimal_expansion(table, q, xi):
            yield inputs[u]


def expand_plan(table: ExitCostTable, steps) -> list:
    return list(iter_plan(table, steps))


@dataclass
class PlanResult:
    plan: list
    trajectory: list  # reduced trajectory as [(state path, input)]
    cost: float
    feasible: bool
    degenerate: bool = False
    stats: dict = field(default_factory=dict)

    def states(self) -> list:
        return [s for s, _ in self.trajectory]


def plan(h: Hierarchy, table: ExitCostTable, s_init, s_goal, *, expand: bool = True) -> PlanResult:
    """Optimal plan from ``s_init`` to ``s_goal`` using precomputed exit costs."""
    t0 = time.perf_counter()
    ix = h.index
    dec = compute_paths(h, s_init, s_goal)
    if dec.init == dec.goal:
        return PlanResult([], [], 0.0, True, True, {"online_s": time.perf_counter() - t0})
    reduced = ReducedHiMM(h, table, dec)
    trans = compute_transitions(reduced)
    graph = build_search_graph(reduced, trans)
    sol = solve_reduced(reduced, graph)
    t1 = time.perf_counter()
    stats = {"n": dec.n, "m": dec.m, "alpha": dec.alpha, "beta": dec.beta,
             "vertices": graph.n_vertices, "searches": graph.searches,
             "reduced_steps": len(sol.steps), "solve_s": t1 - t0}
    if not sol.feasible:
        stats["online_s"] = t1 - t0
        return PlanResult([], [], INF, False, False, stats)
    u = expand_plan(table, sol.steps) if expand else []
    stats["online_s"] = time.perf_counter() - t0
    stats["plan_length"] = len(u)
    traj = [(ix.path_of(v), ix.inputs[xi]) for v, xi in sol.steps]
    return PlanResult(u, traj, sol.cost, True, False, stats)


class Planner:
    """Offline tables computed once, then any number of queries."""

    def __init__(self, h: Hierarchy, table: Optional[ExitCostTable] = None):
        from .exits import compute_exit_tables

        self.h = h
        self.table = table if table is not None else compute_exit_tables(h)

    def plan(self, s_init, s_goal, **kw) -> PlanResult:
        return plan(self.h, self.table, s_init, s_goal, **kw)

    def steps(self, s_init, s_goal) -> Iterator[str]:
        """Streaming variant: yields the plan input by input."""
        dec = compute_paths(self.h, s_init, s_goal)
        if dec.init == dec.goal:
            return iter(())
        reduced = ReducedHiMM(self.h, self.table, dec)
        sol = solve_reduced(reduced, build_search_graph(reduced, compute_transitions(reduced)))
        if not sol.feasible:
            raise HiMMError("infeasible query")
        return iter_plan(self.table, sol.steps)
