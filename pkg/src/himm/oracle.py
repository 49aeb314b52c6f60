"""Ground truth: the equivalent flat machine and brute-force exit costs."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import INF, GlobalState, Hierarchy, HierarchyIndex


@dataclass
class FlatMachine:
    """psi/chi materialised over all states of the system.

    Row ``f`` is the state ``index.leaf_nodes[f]``; ``next[f, x] == -1``
    where the system stops. ``level[f, x]`` is the depth of the machine whose
    transition fired.
    """

    index: HierarchyIndex
    next: np.ndarray
    cost: np.ndarray
    level: np.ndarray

    @property
    def n_states(self) -> int:
        return self.next.shape[0]

    def state(self, f: int) -> GlobalState:
        return self.index.path_of(int(self.index.leaf_nodes[f]))

    @property
    def states(self) -> list:
        return [self.state(f) for f in range(self.n_states)]

    def row(self, s) -> int:
        return int(self.index.leaf_index[self.index.resolve_state(s)])

    def step(self, s, x: str):
        f = self.row(s)
        t = self.next[f, self.index.input(x)]
        if t < 0:
            return None
        return self.state(t), float(self.cost[f, self.index.input(x)])


def flatten(h: Hierarchy) -> FlatMachine:
    ix = h.index
    nxt, cost, level = kernels.flatten(ix.leaf_nodes, ix.leaf_index, ix.trans_next, ix.trans_cost,
                                       ix.node_child, ix.node_machine, ix.parent_node,
                                       ix.start_leaf, ix.machine_depth)
    return FlatMachine(ix, nxt, cost, level)


@dataclass
class FlatPlan:
    plan: list
    cost: float
    feasible: bool
    settled: int = 0


def flat_plan(fm: FlatMachine, s_init, s_goal) -> FlatPlan:
    """Plain Dijkstra on the flat machine."""
    src, dst = fm.row(s_init), fm.row(s_goal)
    if src == dst:
        return FlatPlan([], 0.0, True, 0)
    dist, pred, pred_input, settled = kernels.flat_search(fm.next, fm.cost, src, dst)
    if dist[dst] == INF:
        return FlatPlan([], INF, False, int(settled))
    inputs = fm.index.inputs
    plan = []
    v = dst
    while v != src:
        plan.append(inputs[pred_input[v]])
        v = pred[v]
    return FlatPlan(plan[::-1], float(dist[dst]), True, int(settled))


def brute_force_exit_cost(h: Hierarchy, q, x: str, fm: FlatMachine = None) -> float:
    """Exit cost of node ``q`` with ``x`` by search over the flat states below it.

    0 for states of the system; otherwise the machine-level oracle applied to
    the machine refining ``q``.
    """
    ix = h.index
    m = int(ix.node_child[ix.resolve(q)])
    if m < 0:
        return 0.0
    return brute_force_machine_exit_cost(h, ix.ids[m], x, fm)


def brute_force_machine_exit_cost(h: Hierarchy, machine: str, x: str,
                                  fm: FlatMachine = None) -> float:
    """Optimal ``(machine, x)`` exit cost from plain Dijkstra on the flat machine.

    Steps are allowed while the firing transition belongs to a machine inside
    the subtree; the answer is the cheapest cost of reaching a state whose
    ``x`` step fires above the subtree or stops the system.
    """
    ix = h.index
    m = ix.machine_of(machine)
    if fm is None:
        fm = flatten(h)
    xi = ix.input(x)
    floor = int(ix.machine_depth[m])
    src = int(ix.leaf_index[ix.start_leaf[m]])
    dist = {src: 0.0}
    done = set()
    seq = itertools.count()
    heap = [(0.0, next(seq), src)]
    while heap:
        d, _, f = heapq.heappop(heap)
        if f in done:
            continue
        done.add(f)
        if fm.level[f, xi] < floor:
            return d
        for y in range(len(ix.inputs)):
            if fm.level[f, y] < floor:
                continue
            t = int(fm.next[f, y])
            nd = d + float(fm.cost[f, y])
            if nd < dist.get(t, INF):
                dist[t] = nd
                heapq.heappush(heap, (nd, next(seq), t))
    return INF
