"""Offline step: optimal exit costs and witnesses for every machine.

For machine ``M`` and input ``x`` the exit cost ``c_x^M`` is the cheapest way
to go from the start of ``M`` to a state where ``x`` is undefined in ``M``,
excluding that final ``x`` step. Costs fold in the children's exit costs, so
machines are processed children first.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .core import INF, HiMMError, Hierarchy, HierarchyIndex, MealyMachine


class ExitState(NamedTuple):
    """Artificial sink ``E_x`` of an augmented machine."""

    input: str


@dataclass(frozen=True)
class AugmentedMachine:
    base: str
    states: tuple  # base states, then one ExitState per input
    edges: dict  # (state, input) -> (target, weight); weight inf when unusable

    def graph(self) -> dict:
        """Adjacency for :func:`dijkstra_multi`, infinite edges left out."""
        adj = {s: [] for s in self.states}
        for (q, x), (t, w) in self.edges.items():
            if w < INF:
                adj[q].append((x, t, w))
        return adj


def augment(m: MealyMachine, child_costs: Mapping, inputs: Sequence[str]) -> AugmentedMachine:
    """Total transition map over ``m`` plus exit sinks.

    ``child_costs[q][x]`` is ``c_x^q``: 0 for unrefined states, the child's
    exit cost otherwise.
    """
    edges = {}
    for q in m.states:
        try:
            row = child_costs[q]
        except KeyError:
            raise HiMMError(f"missing child cost for state {q!r} of {m.id!r}") from None
        for x in inputs:
            if x not in row:
                raise HiMMError(f"missing child cost for ({q!r}, {x!r}) of {m.id!r}")
            c = row[x]
            step = m.step(q, x)
            if step is None:
                edges[(q, x)] = (ExitState(x), c)
            else:
                edges[(q, x)] = (step[0], c + step[1])
    return AugmentedMachine(m.id, tuple(m.states) + tuple(ExitState(x) for x in inputs), edges)


def dijkstra_multi(graph: Mapping[Hashable, Sequence], source, targets) -> dict:
    """Shortest paths from ``source`` to each of ``targets``.

    ``graph[v]`` lists ``(label, w, weight)`` arcs. Returns
    ``{target: (cost, [(vertex, label), ...])}``; unreached targets map to
    ``(inf, [])``. Ties settle in discovery order.
    """
    if source not in graph:
        raise HiMMError(f"source {source!r} not in graph")
    targets = set(targets)
    dist = {source: 0.0}
    pred = {}
    done = set()
    seq = itertools.count()
    heap = [(0.0, next(seq), source)]
    remaining = len(targets)
    while heap and remaining:
        d, _, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v in targets:
            remaining -= 1
        for label, w, weight in graph.get(v, ()):
            nd = d + weight
            if nd < dist.get(w, INF):
                dist[w] = nd
                pred[w] = (v, label)
                heapq.heappush(heap, (nd, next(seq), w))
    out = {}
    for t in targets:
        if t not in done:
            out[t] = (INF, [])
            continue
        path = []
        v = t
        while v != source:
            v, label = pred[v]
            path.append((v, label))
        out[t] = (dist[t], path[::-1])
    return out


class ExitCostTable:
    """Exit costs ``cost[m, x]`` and witnesses, indexed like the hierarchy.

    Witnesses are stored as the shortest-path forest of each machine's
    search: ``exit_pred[m, x]`` is the last node before ``E_x`` and
    ``pred_node``/``pred_input`` lead back to the machine's start node.
    """

    def __init__(self, index: HierarchyIndex, cost, exit_pred, pred_node, pred_input):
        self.index = index
        self.cost_array = cost
        self.exit_pred = exit_pred
        self.pred_node = pred_node
        self.pred_input = pred_input

    def cost(self, machine: str, x: str) -> float:
        ix = self.index
        return float(self.cost_array[ix.machine_of(machine), ix.input(x)])

    def exit_cost(self, q, x: str) -> float:
        """``c_x^q``: 0 for states of the system, the child's table entry otherwise."""
        ix = self.index
        v = ix.resolve(q)
        c = ix.node_child[v]
        return 0.0 if c < 0 else float(self.cost_array[c, ix.input(x)])

    def witness_nodes(self, m: int, xi: int) -> list:
        """Witness of ``(m, xi)`` as ``[(node, input index), ...]``; empty if cost is inf."""
        last = int(self.exit_pred[m, xi])
        if last < 0:
            return []
        steps = [(last, xi)]
        v = last
        start = self.index.start_node[m]
        while v != start:
            steps.append((int(self.pred_node[v]), int(self.pred_input[v])))
            v = int(self.pred_node[v])
        steps.reverse()
        return steps

    def witness(self, machine: str, x: str) -> list:
        """``z_x^M`` as ``[(local state, input), ...]`` ending with the ``x`` step into ``E_x``."""
        ix = self.index
        steps = self.witness_nodes(ix.machine_of(machine), ix.input(x))
        return [(ix.local_name(v), ix.inputs[xi]) for v, xi in steps]

    def __eq__(self, other):
        if not isinstance(other, ExitCostTable):
            return NotImplemented
        if not np.array_equal(self.cost_array, other.cost_array):
            return False
        n, k = self.cost_array.shape
        return all(self.witness_nodes(m, x) == other.witness_nodes(m, x)
                   for m in range(n) for x in range(k))

    __hash__ = None


def compute_exit_tables(h: Hierarchy) -> ExitCostTable:
    """Run the offline step over the whole hierarchy (children before parents)."""
    ix = h.index
    arrays = kernels.exit_tables(ix.offsets, ix.start_node, ix.node_child,
                                 ix.trans_next, ix.trans_cost)
    return ExitCostTable(ix, *arrays)


def exit_cost(table: ExitCostTable, q, x: str) -> float:
    return table.exit_cost(q, x)
