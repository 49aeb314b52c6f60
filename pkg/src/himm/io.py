"""JSON documents for hierarchies, exit-cost caches and plans.

Hierarchy document::

    {"format": "himm", "version": 1, "inputs": [...], "root": "M0",
     "machines": [{"id", "states", "start",
                   "transitions": [{"from", "input", "to", "cost"}]}],
     "refinement": [{"machine", "state", "child"}]}

Serialisation is canonical: machines in breadth-first tree order,
transitions by (state, input) position, one machine per line. Costs are
JSON numbers written with the shortest round-tripping repr. The cache
document records the sha256 of the canonical hierarchy text, and loading it
against any other hierarchy fails.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Iterator

import numpy as np

from .core import HiMMError, Hierarchy, MealyMachine, validate
from .exits import ExitCostTable

HIMM_FORMAT = "himm"
CACHE_FORMAT = "himm-exit-cache"
VERSION = 1


class FormatError(HiMMError):
    """Malformed document; ``where`` is a line/column or a JSON pointer."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


class StaleCacheError(FormatError):
    pass


def _loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(e.msg, f"line {e.lineno} column {e.colno}") from None


def _get(obj, key, where, kind=None):
    if not isinstance(obj, dict):
        raise FormatError("expected an object", where)
    if key not in obj:
        raise FormatError(f"missing field {key!r}", where)
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise FormatError(f"field {key!r} has wrong type", f"{where}/{key}")
    return val


def _cost(val, where):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise FormatError("cost must be a number", where)
    return float(val)


# hierarchy ---------------------------------------------------------------------

def parse_himm(text: str, check: bool = True) -> Hierarchy:
    """Parse a hierarchy document; with ``check`` it must also pass :func:`validate`."""
    doc = _loads(text)
    if _get(doc, "format", "") != HIMM_FORMAT:
        raise FormatError(f"not a {HIMM_FORMAT} document", "/format")
    if _get(doc, "version", "") != VERSION:
        raise FormatError(f"unsupported version {doc['version']!r}", "/version")
    inputs = _get(doc, "inputs", "", list)
    root = _get(doc, "root", "", str)
    machines, where_of = [], {}
    for i, md in enumerate(_get(doc, "machines", "", list)):
        at = f"/machines/{i}"
        mid = _get(md, "id", at, str)
        states = _get(md, "states", at, list)
        start = _get(md, "start", at, str)
        tr = {}
        for j, td in enumerate(_get(md, "transitions", at, list)):
            tat = f"{at}/transitions/{j}"
            key = (_get(td, "from", tat, str), _get(td, "input", tat, str))
            if key in tr:
                raise FormatError(f"duplicate transition {key}", tat)
            tr[key] = (_get(td, "to", tat, str), _cost(_get(td, "cost", tat), f"{tat}/cost"))
        where_of.setdefault(mid, at)
        machines.append(MealyMachine(mid, states, start, tr))
    refinement, ref_at = {}, []
    for i, rd in enumerate(_get(doc, "refinement", "", list)):
        at = f"/refinement/{i}"
        key = (_get(rd, "machine", at, str), _get(rd, "state", at, str))
        if key in refinement:
            raise FormatError(f"state {key[1]!r} of {key[0]!r} refined twice", at)
        refinement[key] = _get(rd, "child", at, str)
        ref_at.append((key[0], refinement[key], at))
    h = Hierarchy(machines, root, refinement, inputs)
    problems = validate(h) if check else []
    if problems:
        v = problems[0]
        at = where_of.get(v.machine, "")
        if v.rule == "unknown root":
            at = "/root"
        elif v.rule.startswith("refinement"):
            at = next((a for parent, child, a in ref_at if v.machine in (parent, child)), at)
        more = f" (+{len(problems) - 1} more)" if len(problems) > 1 else ""
        raise FormatError(str(v) + more, at)
    return h


def _himm_chunks(h: Hierarchy) -> Iterator[str]:
    ix = h.index
    dumps = json.dumps
    yield "{\n"
    yield f' "format": {dumps(HIMM_FORMAT)},\n "version": {VERSION},\n'
    yield f' "inputs": {dumps(list(ix.inputs))},\n "root": {dumps(ix.ids[0])},\n'
    yield ' "machines": [\n'
    body = {}
    for p, proto in enumerate(ix.protos):
        rows = []
        for i, q in enumerate(proto.states):
            for j, x in enumerate(ix.inputs):
                t = proto.next[i, j]
                if t >= 0:
                    rows.append({"from": q, "input": x, "to": proto.states[t],
                                 "cost": float(proto.cost[i, j])})
        body[p] = (dumps(list(proto.states)), dumps(proto.states[proto.start]), dumps(rows))
    n = ix.n_machines
    for m in range(n):
        states, start, rows = body[int(ix.machine_proto[m])]
        sep = ",\n" if m + 1 < n else "\n"
        yield (f'  {{"id": {dumps(ix.ids[m])}, "states": {states}, "start": {start}, '
               f'"transitions": {rows}}}{sep}')
    yield ' ],\n "refinement": [\n'
    refined = np.flatnonzero(ix.node_child >= 0)
    for i, v in enumerate(refined):
        v = int(v)
        sep = ",\n" if i + 1 < len(refined) else "\n"
        yield (f'  {{"machine": {dumps(ix.ids[int(ix.node_machine[v])])}, '
               f'"state": {dumps(ix.local_name(v))}, '
               f'"child": {dumps(ix.ids[int(ix.node_child[v])])}}}{sep}')
    yield " ]\n}\n"


def serialize_himm(h: Hierarchy) -> str:
    return "".join(_himm_chunks(h))


def write_himm(h: Hierarchy, fp) -> None:
    for chunk in _himm_chunks(h):
        fp.write(chunk)


def digest(h: Hierarchy) -> str:
    """sha256 of the canonical serialisation."""
    s = hashlib.sha256()
    for chunk in _himm_chunks(h):
        s.update(chunk.encode("utf-8"))
    return s.hexdigest()


# exit-cost cache -------------------------------------------------------------------

def _cost_text(c: float):
    return "inf" if c == math.inf else float(c)


def save_cache(table: ExitCostTable, h: Hierarchy) -> str:
    ix = table.index
    dumps = json.dumps
    parts = ["{\n", f' "format": {dumps(CACHE_FORMAT)},\n "version": {VERSION},\n',
             f' "digest": {dumps(digest(h))},\n "inputs": {dumps(list(ix.inputs))},\n',
             ' "machines": [\n']
    n = ix.n_machines
    for m in range(n):
        exits = {}
        for xi, x in enumerate(ix.inputs):
            w = [[ix.local_name(v), ix.inputs[u]] for v, u in table.witness_nodes(m, xi)]
            exits[x] = {"cost": _cost_text(table.cost_array[m, xi]), "witness": w}
        sep = ",\n" if m + 1 < n else "\n"
        parts.append(f'  {{"id": {dumps(ix.ids[m])}, "exits": {dumps(exits)}}}{sep}')
    parts.append(" ]\n}\n")
    return "".join(parts)


def load_cache(text: str, h: Hierarchy) -> ExitCostTable:
    """Rebuild a table, refusing caches made for another hierarchy.

    Witnesses are checked step by step: they must start at the machine's
    start state, follow defined transitions, end with an undefined one, and
    their augmented cost must add up to the stored cost.
    """
    doc = _loads(text)
    if _get(doc, "format", "") != CACHE_FORMAT:
        raise FormatError(f"not a {CACHE_FORMAT} document", "/format")
    if _get(doc, "version", "") != VERSION:
        raise FormatError(f"unsupported version {doc['version']!r}", "/version")
    want = digest(h)
    got = _get(doc, "digest", "", str)
    if got != want:
        raise StaleCacheError(
            f"cache digest {got[:12]}... does not match hierarchy digest {want[:12]}...; "
            "recompute the exit costs for this hierarchy", "/digest")
    ix = h.index
    if list(_get(doc, "inputs", "", list)) != list(ix.inputs):
        raise FormatError("input alphabet differs from hierarchy", "/inputs")
    entries = _get(doc, "machines", "", list)
    if len(entries) != ix.n_machines:
        raise FormatError(f"expected {ix.n_machines} machines, found {len(entries)}", "/machines")
    k = len(ix.inputs)
    cost = np.full((ix.n_machines, k), math.inf)
    exit_pred = np.full((ix.n_machines, k), -1, dtype=np.int64)
    pred_node = np.full(ix.n_nodes, -1, dtype=np.int64)
    pred_input = np.full(ix.n_nodes, -1, dtype=np.int64)
    # children first, so child costs are known when a witness is checked
    for m in range(ix.n_machines - 1, -1, -1):
        at = f"/machines/{m}"
        e = entries[m]
        if _get(e, "id", at, str) != ix.ids[m]:
            raise FormatError(f"expected machine {ix.ids[m]!r}", f"{at}/id")
        exits = _get(e, "exits", at, dict)
        for xi, x in enumerate(ix.inputs):
            xat = f"{at}/exits/{x}"
            ent = _get(exits, x, f"{at}/exits", dict)
            raw = _get(ent, "cost", xat)
            c = math.inf if raw == "inf" else _cost(raw, f"{xat}/cost")
            steps = _get(ent, "witness", xat, list)
            cost[m, xi] = c
            if c == math.inf:
                if steps:
                    raise FormatError("infinite cost with a witness", xat)
                continue
            _load_witness(ix, m, xi, c, steps, cost, exit_pred, pred_node, pred_input, xat)
    return ExitCostTable(ix, cost, exit_pred, pred_node, pred_input)


def _load_witness(ix, m, xi, c, steps, cost, exit_pred, pred_node, pred_input, at):
    if not steps:
        raise FormatError("finite cost without a witness", at)
    nodes = []
    for i, st in enumerate(steps):
        if not (isinstance(st, list) and len(st) == 2):
            raise FormatError("witness step must be [state, input]", f"{at}/witness/{i}")
        try:
            nodes.append((ix.node(m, st[0]), ix.input(st[1])))
        except HiMMError as err:
            raise FormatError(str(err), f"{at}/witness/{i}") from None
    if nodes[0][0] != ix.start_node[m]:
        raise FormatError("witness does not start at the start state", f"{at}/witness/0")
    total = 0.0
    for i, (v, u) in enumerate(nodes):
        ch = ix.node_child[v]
        cc = 0.0 if ch < 0 else cost[ch, u]
        t = ix.trans_next[v, u]
        last = i + 1 == len(nodes)
        if last:
            if u != xi or t >= 0:
                raise FormatError("witness must end by leaving with its input", f"{at}/witness/{i}")
            total = total + cc
            continue
        if t < 0 or t != nodes[i + 1][0]:
            raise FormatError("witness steps are not connected", f"{at}/witness/{i}")
        total = total + (cc + ix.trans_cost[v, u])
        nxt = nodes[i + 1][0]
        if nxt == ix.start_node[m]:
            raise FormatError("witness revisits the start state", f"{at}/witness/{i + 1}")
        if pred_node[nxt] >= 0 and (pred_node[nxt] != v or pred_input[nxt] != u):
            raise FormatError("witnesses of one machine disagree", f"{at}/witness/{i + 1}")
        pred_node[nxt] = v
        pred_input[nxt] = u
    if total != c:
        raise FormatError(f"witness costs {total}, table says {c}", f"{at}/cost")
    exit_pred[m, xi] = nodes[-1][0]


# plans -------------------------------------------------------------------------------

def format_plan(plan) -> str:
    return "".join(f"{x}\n" for x in plan)


def parse_plan(text: str) -> list:
    return [line.strip() for line in text.splitlines() if line.strip()]
