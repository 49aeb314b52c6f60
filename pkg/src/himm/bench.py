"""Timing harness: offline, online and flat-search phases per instance."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from . import kernels
from .core import Hierarchy
from .exits import compute_exit_tables
from .generators import gen_recursive, opposite_states
from .oracle import flat_plan, flatten
from .planner import plan

FIELDS = ("instance", "depth", "states", "offline_s", "online_s", "flat_s",
          "h_cost", "f_cost", "equal")
DEFAULT_FLAT_LIMIT = 4_000_000


def costs_equal(a: float, b: float, tol: float = 1e-9) -> bool:
    if math.isinf(a) or math.isinf(b):
        return math.isinf(a) and math.isinf(b)
    return abs(a - b) <= tol


@dataclass
class BenchRecord:
    instance: str
    depth: int
    states: int
    offline_s: float
    online_s: float
    flat_s: Optional[float]
    h_cost: float
    f_cost: Optional[float]
    equal: Optional[bool]
    flatten_s: Optional[float] = None

    def row(self) -> list:
        def num(v):
            return "" if v is None else repr(float(v)) if not math.isinf(v) else "inf"
        eq = "" if self.equal is None else str(self.equal).lower()
        return [self.instance, str(self.depth), str(self.states), num(self.offline_s),
                num(self.online_s), num(self.flat_s), num(self.h_cost), num(self.f_cost), eq]


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def bench_instance(label: str, h: Hierarchy, s_init, s_goal, *,
                   flat_limit: int = DEFAULT_FLAT_LIMIT) -> BenchRecord:
    """Time the three phases once; flat search is skipped above ``flat_limit`` states."""
    kernels.warmup()
    ix = h.index
    table, offline_s = timed(compute_exit_tables, h)
    res, online_s = timed(plan, h, table, s_init, s_goal)
    rec = BenchRecord(label, ix.depth, ix.n_states, offline_s, online_s, None,
                      res.cost, None, None)
    if ix.n_states <= flat_limit:
        fm, rec.flatten_s = timed(flatten, h)
        fres, rec.flat_s = timed(flat_plan, fm, s_init, s_goal)
        rec.f_cost = fres.cost
        rec.equal = costs_equal(res.cost, fres.cost)
    return rec


def sweep_recursive(depths: Iterable[int], repetitions: int = 1, *,
                    flat_limit: int = DEFAULT_FLAT_LIMIT) -> Iterator[BenchRecord]:
    """One record per (depth, repetition) on the opposite-states query."""
    for d in depths:
        h = gen_recursive(d)
        a, b = opposite_states(d)
        for _ in range(repetitions):
            yield bench_instance(f"recursive-d{d}", h, a, b, flat_limit=flat_limit)


def write_csv(records: Iterable[BenchRecord], fp) -> list:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(FIELDS)
    out = []
    for r in records:
        w.writerow(r.row())
        fp.flush()
        out.append(r)
    return out
