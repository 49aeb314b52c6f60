"""Deterministic hierarchy builders: recursive nesting, warehouse, random, small fixtures."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import GlobalState, HiMMError, Hierarchy, HierarchyIndex, MealyMachine, Proto

# recursive family --------------------------------------------------------

RECURSIVE_INPUTS = ("x", "y", "z")
RECURSIVE_STATES = ("1", "2", "3")
# 1 and 3 are refined; every state reaches every other.
RECURSIVE_TRANSITIONS = {
    ("1", "x"): ("2", 1.0), ("2", "x"): ("3", 1.0),
    ("3", "y"): ("2", 1.0), ("2", "y"): ("1", 1.0),
    ("1", "z"): ("3", 1.0), ("3", "z"): ("1", 1.0),
}


class _HeapIds(Sequence):
    """Machine ids of the recursive family, computed on demand.

    Machine ``j`` sits at heap position ``j``; its children are ``2j+1``
    (under state 1) and ``2j+2`` (under state 3). The id spells the refined
    states on the way down, e.g. ``"M13"``.
    """

    def __init__(self, n: int):
        self._n = n

    def __len__(self):
        return self._n

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(self._n))]
        j = int(j)
        if j < 0:
            j += self._n
        if not 0 <= j < self._n:
            raise IndexError(j)
        bits = bin(j + 1)[3:]
        return "M" + bits.translate({48: "1", 49: "3"})

    def lookup(self, mid: str):
        if not mid.startswith("M") or any(c not in "13" for c in mid[1:]):
            return None
        j = int("1" + mid[1:].replace("1", "0").replace("3", "1"), 2) - 1
        return j if j < self._n else None


def gen_recursive(depth: int) -> Hierarchy:
    """Nest the three-state machine into its states 1 and 3 down to ``depth`` levels."""
    if depth < 1:
        raise HiMMError("depth must be >= 1")
    n_machines = 2 ** depth - 1
    proto = Proto.from_machine(
        MealyMachine("M", RECURSIVE_STATES, "2", RECURSIVE_TRANSITIONS),
        {x: i for i, x in enumerate(RECURSIVE_INPUTS)})
    j = np.arange(n_machines, dtype=np.int64)
    node_child = np.full((n_machines, 3), -1, dtype=np.int64)
    inner = 2 * j + 2 < n_machines
    node_child[inner, 0] = 2 * j[inner] + 1
    node_child[inner, 2] = 2 * j[inner] + 2
    ix = HierarchyIndex(RECURSIVE_INPUTS, _HeapIds(n_machines), [proto],
                        np.zeros(n_machines, dtype=np.int64), node_child.ravel())
    return Hierarchy.from_index(ix)


def opposite_states(depth: int) -> tuple:
    """Leftmost leaf under the first refined state and rightmost under the last."""
    return ("1",) * depth, ("3",) * depth


# warehouse -----------------------------------------------------------------

WAREHOUSE_INPUTS = ("left", "right", "up", "down", "scan")
_MOVES = {"left": (0, -1), "right": (0, 1), "up": (1, 0), "down": (-1, 0)}


@dataclass(frozen=True)
class WarehouseParams:
    houses: int = 10
    grid: int = 10
    rack: int = 3
    house_cost: float = 100.0
    grid_cost: float = 1.0
    desk_cost: float = 0.5
    scan_cost: float = 10.0

    def check(self):
        if min(self.houses, self.grid, self.rack) < 1:
            raise HiMMError("warehouse counts must be >= 1")
        if min(self.house_cost, self.grid_cost, self.desk_cost, self.scan_cost) < 0:
            raise HiMMError("warehouse costs must be >= 0")


def _tube(r, c, status):
    return f"t{r}_{c}_" + ("none" if status is None else f"scan{status[0]}_{status[1]}")


def warehouse_houses(p: WarehouseParams) -> MealyMachine:
    names = [f"house{i}" for i in range(1, p.houses + 1)]
    tr = {}
    for i, q in enumerate(names):
        tr[(q, "right")] = (names[min(i + 1, p.houses - 1)], p.house_cost)
        tr[(q, "left")] = (names[max(i - 1, 0)], p.house_cost)
    return MealyMachine("warehouse", names, names[0], tr)


def warehouse_room(p: WarehouseParams) -> MealyMachine:
    g = p.grid
    names = ["entrance"] + [f"g{r}_{c}" for r in range(1, g + 1) for c in range(1, g + 1)]
    tr = {("entrance", "up"): ("g1_1", p.grid_cost)}
    for r in range(1, g + 1):
        for c in range(1, g + 1):
            q = f"g{r}_{c}"
            for x, (dr, dc) in _MOVES.items():
                rr, cc = r + dr, c + dc
                if (r, c, x) == (1, 1, "down"):
                    tr[(q, x)] = ("entrance", p.grid_cost)
                elif 1 <= rr <= g and 1 <= cc <= g:
                    tr[(q, x)] = (f"g{rr}_{cc}", p.grid_cost)
                else:
                    tr[(q, x)] = (q, p.grid_cost)
    return MealyMachine("room", names, "entrance", tr)


def warehouse_desk(p: WarehouseParams) -> MealyMachine:
    k = p.rack
    spots = [(r, c) for r in range(1, k + 1) for c in range(1, k + 1)]
    statuses = [None] + spots
    names = ["entrance"] + [_tube(r, c, s) for s in statuses for (r, c) in spots]
    tr = {("entrance", "scan"): (_tube(1, 1, None), p.desk_cost)}
    for s in statuses:
        for r, c in spots:
            q = _tube(r, c, s)
            for x, (dr, dc) in _MOVES.items():
                rr, cc = r + dr, c + dc
                if (r, c, x) == (1, 1, "down"):
                    tr[(q, x)] = ("entrance", p.desk_cost)
                elif 1 <= rr <= k and 1 <= cc <= k:
                    tr[(q, x)] = (_tube(rr, cc, s), p.desk_cost)
                else:
                    tr[(q, x)] = (q, p.desk_cost)
            tr[(q, "scan")] = (_tube(r, c, (r, c) if s is None else s), p.scan_cost)
    return MealyMachine("desk", names, "entrance", tr)


def gen_warehouse(p: WarehouseParams = WarehouseParams()) -> Hierarchy:
    """Houses in a row, each a grid room whose every grid point is a sample desk."""
    p.check()
    input_index = {x: i for i, x in enumerate(WAREHOUSE_INPUTS)}
    protos = [Proto.from_machine(m, input_index)
              for m in (warehouse_houses(p), warehouse_room(p), warehouse_desk(p))]
    cells = p.grid * p.grid
    ids = ["warehouse"] + [f"room{i}" for i in range(1, p.houses + 1)]
    ids += [f"desk{i}_{r}_{c}" for i in range(1, p.houses + 1)
            for r in range(1, p.grid + 1) for c in range(1, p.grid + 1)]
    machine_proto = [0] + [1] * p.houses + [2] * (p.houses * cells)
    node_child = list(range(1, p.houses + 1))
    first_desk = 1 + p.houses
    for i in range(p.houses):
        node_child.append(-1)
        node_child.extend(range(first_desk + i * cells, first_desk + (i + 1) * cells))
    node_child.extend([-1] * (p.houses * cells * len(protos[2].states)))
    ix = HierarchyIndex(WAREHOUSE_INPUTS, ids, protos, machine_proto, node_child)
    return Hierarchy.from_index(ix)


def warehouse_query(p: WarehouseParams = WarehouseParams()) -> tuple:
    """At the far grid corner of the first and last house, holding the far tube scanned."""
    k, g = p.rack, p.grid
    tube = _tube(k, k, (k, k))
    return ("house1", f"g{g}_{g}", tube), (f"house{p.houses}", f"g{g}_{g}", tube)


# random --------------------------------------------------------------------

@dataclass(frozen=True)
class RandomParams:
    seed: int = 0
    max_depth: int = 3
    max_states: int = 5
    n_inputs: int = 3
    density: float = 0.6
    cost_low: float = 0.5
    cost_high: float = 10.0
    refine_prob: float = 0.6

    def check(self):
        if self.max_depth < 1 or self.max_states < 1 or self.n_inputs < 1:
            raise HiMMError("random params: sizes must be >= 1")
        if not 0 < self.density <= 1:
            raise HiMMError("random params: density must be in (0, 1]")
        if not 0 <= self.cost_low <= self.cost_high < float("inf"):
            raise HiMMError("random params: bad cost range")


def gen_random(p: RandomParams = RandomParams()) -> Hierarchy:
    """Seeded random hierarchy.

    Costs are multiples of 0.5 so path sums are exact in binary floating
    point. A state is refined with probability ``refine_prob * 0.8**(depth-1)``
    and never below ``max_depth``.
    """
    p.check()
    rng = random.Random(p.seed)
    inputs = tuple("abcdefghijklmnopqrstuvwxyz"[i] if i < 26 else f"i{i}" for i in range(p.n_inputs))
    lo, hi = int(round(2 * p.cost_low)), int(round(2 * p.cost_high))
    machines, refinement = [], {}
    queue = [("M0", 1)]
    count = 1
    while queue:
        mid, depth = queue.pop(0)
        states = [f"s{i}" for i in range(rng.randint(1, p.max_states))]
        tr = {}
        for q in states:
            for x in inputs:
                if rng.random() < p.density:
                    tr[(q, x)] = (rng.choice(states), rng.randint(lo, hi) / 2)
        machines.append(MealyMachine(mid, states, rng.choice(states), tr))
        if depth < p.max_depth:
            prob = p.refine_prob * 0.8 ** (depth - 1)
            for q in states:
                if rng.random() < prob:
                    child = f"M{count}"
                    count += 1
                    refinement[(mid, q)] = child
                    queue.append((child, depth + 1))
    return Hierarchy(machines, "M0", refinement, inputs)


# small fixtures ----------------------------------------------------------------

def gen_nested() -> Hierarchy:
    """Partial two-room example with unit costs.

    Only the facts needed by the examples are encoded: ``y`` from state 2
    climbs to the root and enters the ``9-10`` room at 9, and ``x`` from 6
    climbs one level to land at 7.
    """
    ms = [
        MealyMachine("R", ["1-8", "9-10"], "1-8", {("1-8", "y"): ("9-10", 1.0)}),
        MealyMachine("P", ["1-2", "3", "4-6", "7-8"], "1-2", {("4-6", "x"): ("7-8", 1.0)}),
        MealyMachine("A", ["1", "2"], "1", {("1", "x"): ("2", 1.0)}),
        MealyMachine("B", ["4-5", "6"], "4-5", {("4-5", "y"): ("6", 1.0)}),
        MealyMachine("C", ["4", "5"], "4"),
        MealyMachine("E", ["7", "8"], "7"),
        MealyMachine("F", ["9", "10"], "9", {("9", "x"): ("10", 1.0)}),
    ]
    ref = {("R", "1-8"): "P", ("R", "9-10"): "F", ("P", "1-2"): "A", ("P", "4-6"): "B",
           ("B", "4-5"): "C", ("P", "7-8"): "E"}
    return Hierarchy(ms, "R", ref, ("x", "y", "z"))


NESTED_STATES = {
    "1": ("1-8", "1-2", "1"), "2": ("1-8", "1-2", "2"), "3": ("1-8", "3"),
    "4": ("1-8", "4-6", "4-5", "4"), "5": ("1-8", "4-6", "4-5", "5"), "6": ("1-8", "4-6", "6"),
    "7": ("1-8", "7-8", "7"), "8": ("1-8", "7-8", "8"), "9": ("9-10", "9"), "10": ("9-10", "10"),
}


def single_machine(states, start, transitions, inputs) -> Hierarchy:
    return Hierarchy([MealyMachine("M", states, start, transitions)], "M", {}, inputs)
