"""Hierarchical Mealy machines: data model, validation and execution semantics.

A :class:`Hierarchy` is a tree of :class:`MealyMachine` objects glued by a
refinement map ``(machine id, local state) -> child machine id``. States of
the whole system are the unrefined nodes and are addressed externally by the
path of local names from the root machine, e.g. ``"house1/g10_10/entrance"``.

Internally every hierarchy compiles to a :class:`HierarchyIndex`, a set of
flat numpy arrays over global node ids that the kernels and planners share.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import kernels

INF = math.inf

GlobalState = tuple  # tuple[str, ...] of local names, root first


class HiMMError(ValueError):
    """Bad hierarchy, unknown state/machine/input, or invalid request."""


class Node(NamedTuple):
    """A (machine id, local state) pair; any node of the hierarchy."""

    machine: str
    state: str


@dataclass(frozen=True, eq=True)
class MealyMachine:
    id: str
    states: tuple
    start: str
    transitions: Mapping[tuple, tuple] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))

    def step(self, state: str, x: str) -> Optional[tuple]:
        """``(target, cost)`` or None when the transition is undefined."""
        return self.transitions.get((state, x))


@dataclass(frozen=True)
class Violation:
    machine: Optional[str]
    rule: str
    detail: str = ""

    def __str__(self):
        where = self.machine if self.machine is not None else "<hierarchy>"
        return f"{where}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


class HierarchyStats(NamedTuple):
    machines: int
    max_states: int
    depth: int
    flat_states: int


def format_state(path: Sequence[str]) -> str:
    return "/".join(path)


def parse_state(text: str) -> GlobalState:
    return tuple(text.split("/")) if text else ()


class Proto:
    """Local tables shared by every machine built from the same template."""

    __slots__ = ("states", "start", "next", "cost", "local", "_transitions")

    def __init__(self, states, start, nxt, cost):
        self.states = tuple(states)
        self.start = int(start)
        self.next = np.ascontiguousarray(nxt, dtype=np.int64)
        self.cost = np.ascontiguousarray(cost, dtype=np.float64)
        self.local = {s: i for i, s in enumerate(self.states)}
        self._transitions = None

    @classmethod
    def from_machine(cls, m: MealyMachine, input_index: Mapping[str, int]) -> "Proto":
        local = {s: i for i, s in enumerate(m.states)}
        nxt = np.full((len(m.states), len(input_index)), -1, dtype=np.int64)
        cost = np.zeros((len(m.states), len(input_index)))
        for (q, x), (t, c) in m.transitions.items():
            nxt[local[q], input_index[x]] = local[t]
            cost[local[q], input_index[x]] = c
        return cls(m.states, local[m.start], nxt, cost)

    def transitions(self, inputs) -> dict:
        if self._transitions is None:
            out = {}
            for i, q in enumerate(self.states):
                for j, x in enumerate(inputs):
                    t = self.next[i, j]
                    if t >= 0:
                        out[(q, x)] = (self.states[t], float(self.cost[i, j]))
            self._transitions = out
        return self._transitions


class HierarchyIndex:
    """Array view of a valid hierarchy.

    Machines are numbered parent-before-child with the root at 0; machine
    ``m`` owns global nodes ``offsets[m]:offsets[m+1]`` in local-state order.
    ``node_child[v]`` is the machine refining node ``v`` (``-1`` for states
    of the system), ``trans_next[v, x]`` the global target node or ``-1``.
    """

    def __init__(self, inputs: Sequence[str], ids: Sequence[str], protos: Sequence[Proto],
                 machine_proto, node_child):
        self.inputs = tuple(inputs)
        self.input_index = {x: i for i, x in enumerate(self.inputs)}
        self.ids = ids
        self.protos = list(protos)
        self.machine_proto = np.ascontiguousarray(machine_proto, dtype=np.int64)
        n_machines = len(self.machine_proto)
        k = len(self.inputs)

        proto_sizes = np.array([len(p.states) for p in self.protos], dtype=np.int64)
        sizes = proto_sizes[self.machine_proto]
        self.offsets = np.zeros(n_machines + 1, dtype=np.int64)
        np.cumsum(sizes, out=self.offsets[1:])
        n_nodes = int(self.offsets[-1])
        self.node_machine = np.repeat(np.arange(n_machines, dtype=np.int64), sizes)
        self.node_local = np.arange(n_nodes, dtype=np.int64) - self.offsets[self.node_machine]
        self.node_child = np.ascontiguousarray(node_child, dtype=np.int64)

        self.trans_next = np.empty((n_nodes, k), dtype=np.int64)
        self.trans_cost = np.empty((n_nodes, k))
        starts = np.empty(len(self.protos), dtype=np.int64)
        for p, proto in enumerate(self.protos):
            starts[p] = proto.start
            ms = np.flatnonzero(self.machine_proto == p)
            if len(ms) == 0:
                continue
            base = self.offsets[ms][:, None]
            rows = (base + np.arange(len(proto.states))).ravel()
            glob = np.where(proto.next[None] >= 0, base[:, :, None] + proto.next[None], -1)
            self.trans_next[rows] = glob.reshape(-1, k)
            self.trans_cost[rows] = np.broadcast_to(
                proto.cost[None], (len(ms),) + proto.cost.shape).reshape(-1, k)
        self.start_node = self.offsets[:-1] + starts[self.machine_proto]

        self.parent_node = np.full(n_machines, -1, dtype=np.int64)
        refined = np.flatnonzero(self.node_child >= 0)
        self.parent_node[self.node_child[refined]] = refined
        self.machine_depth, self.start_leaf = kernels.derive_tree(
            self.start_node, self.node_child, self.parent_node, self.node_machine)
        self.leaf_nodes = np.flatnonzero(self.node_child < 0).astype(np.int64)
        self.leaf_index = np.full(n_nodes, -1, dtype=np.int64)
        self.leaf_index[self.leaf_nodes] = np.arange(len(self.leaf_nodes), dtype=np.int64)
        self._machine_lookup = None

    # sizes -------------------------------------------------------------
    @property
    def n_machines(self) -> int:
        return len(self.machine_proto)

    @property
    def n_nodes(self) -> int:
        return int(self.offsets[-1])

    @property
    def n_states(self) -> int:
        return len(self.leaf_nodes)

    @property
    def depth(self) -> int:
        return int(self.machine_depth.max())

    # naming ------------------------------------------------------------
    def machine_of(self, mid: str) -> int:
        lookup = getattr(self.ids, "lookup", None)
        if lookup is not None:
            m = lookup(mid)
        else:
            if self._machine_lookup is None:
                self._machine_lookup = {s: i for i, s in enumerate(self.ids)}
            m = self._machine_lookup.get(mid)
        if m is None:
            raise HiMMError(f"unknown machine {mid!r}")
        return m

    def proto_of(self, m: int) -> Proto:
        return self.protos[self.machine_proto[m]]

    def local_name(self, v: int) -> str:
        return self.proto_of(int(self.node_machine[v])).states[int(self.node_local[v])]

    def node_name(self, v: int) -> Node:
        return Node(self.ids[int(self.node_machine[v])], self.local_name(v))

    def node(self, machine: Union[int, str], state: str) -> int:
        m = machine if isinstance(machine, (int, np.integer)) else self.machine_of(machine)
        i = self.proto_of(int(m)).local.get(state)
        if i is None:
            raise HiMMError(f"machine {self.ids[int(m)]!r} has no state {state!r}")
        return int(self.offsets[m]) + i

    def input(self, x: str) -> int:
        try:
            return self.input_index[x]
        except KeyError:
            raise HiMMError(f"unknown input {x!r}") from None

    def path_of(self, v: int) -> GlobalState:
        names = []
        v = int(v)
        while v >= 0:
            names.append(self.local_name(v))
            v = int(self.parent_node[self.node_machine[v]])
        return tuple(reversed(names))

    def node_of_path(self, path: Sequence[str]) -> int:
        if not path:
            raise HiMMError("empty state path")
        m = 0
        v = -1
        for depth, name in enumerate(path):
            if m < 0:
                raise HiMMError(f"path {format_state(path)!r} continues below a state of the system")
            i = self.proto_of(m).local.get(name)
            if i is None:
                prefix = format_state(path[: depth + 1])
                raise HiMMError(f"path {format_state(path)!r}: no state {prefix!r}")
            v = int(self.offsets[m]) + i
            m = int(self.node_child[v])
        return v

    def resolve(self, q) -> int:
        """Global node id from a :class:`Node`, path string, path tuple or id."""
        if isinstance(q, Node):
            return self.node(q.machine, q.state)
        if isinstance(q, (int, np.integer)):
            if not 0 <= q < self.n_nodes:
                raise HiMMError(f"unknown node {q}")
            return int(q)
        if isinstance(q, str):
            return self.node_of_path(parse_state(q))
        return self.node_of_path(tuple(q))

    def resolve_state(self, s) -> int:
        v = self.resolve(s)
        if self.node_child[v] >= 0:
            raise HiMMError(f"{format_state(self.path_of(v))!r} is refined, not a state of the system")
        return v

    # semantics ---------------------------------------------------------
    def step(self, v: int, xi: int) -> tuple:
        """``(landing leaf, cost)`` of psi/chi, or ``(-1, inf)`` if the system stops."""
        u = v
        while u >= 0:
            t = self.trans_next[u, xi]
            if t >= 0:
                c = self.node_child[t]
                land = t if c < 0 else self.start_leaf[c]
                return int(land), float(self.trans_cost[u, xi])
            u = self.parent_node[self.node_machine[u]]
        return -1, INF

    def in_subtree(self, v: int, m: int) -> bool:
        a = int(self.node_machine[v])
        while a >= 0:
            if a == m:
                return True
            p = self.parent_node[a]
            a = int(self.node_machine[p]) if p >= 0 else -1
        return False


def _tree_order(h: "Hierarchy") -> list:
    order = [h.root]
    children = {}
    for (mid, s), c in h.refinement.items():
        children.setdefault(mid, {})[s] = c
    i = 0
    while i < len(order):
        mid = order[i]
        kids = children.get(mid, {})
        for s in h.machines[mid].states:
            if s in kids:
                order.append(kids[s])
        i += 1
    return order


def build_index(h: "Hierarchy") -> HierarchyIndex:
    violations = validate(h)
    if violations:
        raise HiMMError("invalid hierarchy: " + "; ".join(map(str, violations[:5])))
    inputs = h.inputs
    input_index = {x: i for i, x in enumerate(inputs)}
    order = _tree_order(h)
    pos = {mid: i for i, mid in enumerate(order)}
    protos, proto_key, machine_proto = [], {}, []
    for mid in order:
        m = h.machines[mid]
        key = (m.states, m.start, id(m.transitions))
        p = proto_key.get(key)
        if p is None:
            p = proto_key[key] = len(protos)
            protos.append(Proto.from_machine(m, input_index))
        machine_proto.append(p)
    node_child = []
    for mid in order:
        for s in h.machines[mid].states:
            c = h.refinement.get((mid, s))
            node_child.append(-1 if c is None else pos[c])
    return HierarchyIndex(inputs, order, protos, machine_proto, node_child)


class Hierarchy:
    """A HiMM. Immutable once built; the array index is compiled on demand."""

    def __init__(self, machines: Iterable[MealyMachine], root: str,
                 refinement: Mapping[tuple, str], inputs: Sequence[str]):
        self._machine_list = list(machines)
        self._machines = None
        self._refinement = {tuple(k): v for k, v in dict(refinement).items()}
        self.root = root
        self.inputs = tuple(inputs)
        self._index = None

    @classmethod
    def from_index(cls, index: HierarchyIndex) -> "Hierarchy":
        h = cls.__new__(cls)
        h._machine_list = None
        h._machines = None
        h._refinement = None
        h.root = index.ids[0]
        h.inputs = index.inputs
        h._index = index
        return h

    def _materialise(self):
        ix = self._index
        machines = []
        for m in range(ix.n_machines):
            p = ix.proto_of(m)
            machines.append(MealyMachine(ix.ids[m], p.states, p.states[p.start],
                                         p.transitions(ix.inputs)))
        refinement = {}
        for v in np.flatnonzero(ix.node_child >= 0):
            refinement[tuple(ix.node_name(int(v)))] = ix.ids[int(ix.node_child[v])]
        self._machine_list = machines
        self._refinement = refinement

    @property
    def machine_list(self) -> list:
        if self._machine_list is None:
            self._materialise()
        return self._machine_list

    @property
    def machines(self) -> dict:
        if self._machines is None:
            self._machines = {m.id: m for m in self.machine_list}
        return self._machines

    @property
    def refinement(self) -> dict:
        if self._refinement is None:
            self._materialise()
        return self._refinement

    @property
    def index(self) -> HierarchyIndex:
        if self._index is None:
            self._index = build_index(self)
        return self._index

    def machine(self, mid: str) -> MealyMachine:
        try:
            return self.machines[mid]
        except KeyError:
            raise HiMMError(f"unknown machine {mid!r}") from None

    def __eq__(self, other):
        if not isinstance(other, Hierarchy):
            return NotImplemented
        return (self.root == other.root and self.inputs == other.inputs
                and self.machines == other.machines and self.refinement == other.refinement)

    __hash__ = None

    def __repr__(self):
        if self._index is not None:
            ix = self._index
            return f"Hierarchy(root={self.root!r}, machines={ix.n_machines}, states={ix.n_states})"
        return f"Hierarchy(root={self.root!r}, machines={len(self._machine_list)})"


def validate(h: Hierarchy) -> list:
    """Every broken invariant as a :class:`Violation`; empty when ``h`` is well formed."""
    out = []
    inputs = set(h.inputs)
    if len(inputs) != len(h.inputs):
        out.append(Violation(None, "duplicate input"))
    machines = {}
    for m in h.machine_list:
        if m.id in machines:
            out.append(Violation(m.id, "duplicate machine id"))
            continue
        machines[m.id] = m
    for m in machines.values():
        states = set(m.states)
        if not m.states:
            out.append(Violation(m.id, "no states"))
        if len(states) != len(m.states):
            out.append(Violation(m.id, "duplicate state"))
        for s in m.states:
            if not isinstance(s, str) or not s or "/" in s:
                out.append(Violation(m.id, "invalid state name", repr(s)))
        if m.start not in states:
            out.append(Violation(m.id, "start not in states", repr(m.start)))
        for (q, x), (t, c) in m.transitions.items():
            if q not in states:
                out.append(Violation(m.id, "unknown source state", repr(q)))
            if t not in states:
                out.append(Violation(m.id, "unknown target state", repr(t)))
            if x not in inputs:
                out.append(Violation(m.id, "unknown input", repr(x)))
            if not isinstance(c, (int, float)) or math.isnan(c) or math.isinf(c):
                out.append(Violation(m.id, "non-finite cost", f"{q},{x}"))
            elif c < 0:
                out.append(Violation(m.id, "negative cost", f"{q},{x}: {c}"))
    if h.root not in machines:
        out.append(Violation(h.root, "unknown root"))
    parents = {}
    for (mid, s), c in h.refinement.items():
        if mid not in machines:
            out.append(Violation(mid, "refinement from unknown machine"))
            continue
        if s not in set(machines[mid].states):
            out.append(Violation(mid, "refinement from unknown state", repr(s)))
        if c not in machines:
            out.append(Violation(mid, "refinement to unknown machine", repr(c)))
            continue
        if c in parents:
            out.append(Violation(c, "refinement not a tree", "machine has several parents"))
        parents[c] = mid
    if h.root in parents:
        out.append(Violation(h.root, "refinement not a tree", "root is refined"))
    if h.root in machines and not any(v.rule.startswith("refinement") for v in out):
        seen = {h.root}
        queue = deque([h.root])
        kids = {}
        for (mid, _), c in h.refinement.items():
            kids.setdefault(mid, []).append(c)
        while queue:
            for c in kids.get(queue.popleft(), ()):
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        for mid in machines:
            if mid not in seen:
                out.append(Violation(mid, "refinement not a tree", "unreachable from root"))
    return out


def start_state(h: Hierarchy, m: str) -> GlobalState:
    """Follow start states down from machine ``m`` to a state of the system."""
    ix = h.index
    return ix.path_of(int(ix.start_leaf[ix.machine_of(m)]))


def hierarchical_step(h: Hierarchy, q, x: str) -> Optional[tuple]:
    """``(psi(q, x), chi(q, x))`` or None if no ancestor defines ``x``."""
    ix = h.index
    v, c = ix.step(ix.resolve(q), ix.input(x))
    if v < 0:
        return None
    return ix.path_of(v), c


@dataclass
class Run:
    trajectory: list  # (state path, input, cost) per executed step
    cost: float
    final: Optional[GlobalState]  # None once the system stopped

    @property
    def stopped(self) -> bool:
        return self.final is None


def run_plan(h: Hierarchy, s0, plan: Sequence[str]) -> Run:
    """Execute ``plan`` from ``s0``; cost is inf if some input stops the system."""
    ix = h.index
    v = ix.resolve_state(s0)
    xs = [ix.input(x) for x in plan]
    steps, total = [], 0.0
    for x, xi in zip(plan, xs):
        t, c = ix.step(v, xi)
        if t < 0:
            steps.append((ix.path_of(v), x, INF))
            return Run(steps, INF, None)
        steps.append((ix.path_of(v), x, c))
        total += c
        v = t
    return Run(steps, total, ix.path_of(v))


def replay_cost(h: Hierarchy, s0, plan: Sequence[str]) -> tuple:
    """Cost and final leaf node of ``plan``; cheaper than :func:`run_plan` for long plans."""
    ix = h.index
    v = ix.resolve_state(s0)
    total = 0.0
    for x in plan:
        v, c = ix.step(v, ix.input(x))
        if v < 0:
            return INF, -1
        total += c
    return total, v


def stats(h: Hierarchy) -> HierarchyStats:
    ix = h.index
    sizes = np.diff(ix.offsets)
    return HierarchyStats(ix.n_machines, int(sizes.max()), ix.depth, ix.n_states)
