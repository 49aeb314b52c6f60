"""Command line: validate, offline, plan, gen, bench."""

from __future__ import annotations

import argparse
import sys
import time

from . import kernels
from ._jit import backend_name
from .bench import DEFAULT_FLAT_LIMIT, bench_instance, sweep_recursive, write_csv
from .core import HiMMError, format_state, parse_state, stats, validate
from .exits import compute_exit_tables
from .generators import (RandomParams, WarehouseParams, gen_nested, gen_random, gen_recursive,
                         gen_warehouse, warehouse_query)
from .io import FormatError, format_plan, load_cache, parse_himm, save_cache, write_himm
from .oracle import flat_plan, flatten
from .planner import plan

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fp:
        return fp.read()


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _load(path: str):
    return parse_himm(_read(path))


def _depths(text: str) -> list:
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        out.extend(range(int(lo), int(hi or lo) + 1))
    return out


def cmd_validate(args) -> int:
    h = parse_himm(_read(args.input), check=False)
    problems = validate(h)
    if problems:
        for v in problems:
            print(v)
        return EXIT_FAIL
    st = stats(h)
    print(f"ok: {st.machines} machines, depth {st.depth}, {st.flat_states} states, "
          f"at most {st.max_states} states per machine")
    return EXIT_OK


def cmd_offline(args) -> int:
    h = _load(args.input)
    kernels.warmup()
    t0 = time.perf_counter()
    table = compute_exit_tables(h)
    elapsed = time.perf_counter() - t0
    out, close = _open_out(args.cache)
    try:
        out.write(save_cache(table, h))
    finally:
        if close:
            out.close()
    print(f"offline_s {elapsed:.6f} machines {h.index.n_machines}", file=sys.stderr)
    return EXIT_OK


def _table_for(h, cache):
    if cache:
        try:
            return load_cache(_read(cache), h), 0.0
        except FileNotFoundError:
            pass
    kernels.warmup()
    t0 = time.perf_counter()
    table = compute_exit_tables(h)
    elapsed = time.perf_counter() - t0
    if cache:
        with open(cache, "w", encoding="utf-8") as fp:
            fp.write(save_cache(table, h))
    return table, elapsed


def cmd_plan(args) -> int:
    h = _load(args.input)
    s_init, s_goal = parse_state(args.from_), parse_state(args.to)
    ix = h.index
    ix.resolve_state(s_init)
    ix.resolve_state(s_goal)
    info = {"backend": backend_name()}
    if args.mode == "flat":
        if ix.n_states > args.flat_limit:
            print(f"error: {ix.n_states} states exceed --flat-limit {args.flat_limit}",
                  file=sys.stderr)
            return EXIT_FAIL
        kernels.warmup()
        t0 = time.perf_counter()
        fm = flatten(h)
        t1 = time.perf_counter()
        res = flat_plan(fm, s_init, s_goal)
        info.update(flatten_s=t1 - t0, flat_s=time.perf_counter() - t1, settled=res.settled)
        feasible, cost, u = res.feasible, res.cost, res.plan
    else:
        table, info["offline_s"] = _table_for(h, args.cache)
        kernels.warmup()
        res = plan(h, table, s_init, s_goal)
        info.update(res.stats)
        feasible, cost, u = res.feasible, res.cost, res.plan
    print(f"feasible {str(feasible).lower()}")
    print(f"cost {cost!r}" if feasible else "cost inf")
    print(f"length {len(u)}")
    if args.stats:
        for k, v in info.items():
            print(f"{k} {v}")
    if args.emit_plan:
        out, close = _open_out(args.emit_plan)
        try:
            out.write(format_plan(u))
        finally:
            if close:
                out.close()
    if args.expect_feasible and not feasible:
        print("error: query is infeasible", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "recursive":
        h = gen_recursive(args.depth)
    elif args.kind == "warehouse":
        p = WarehouseParams(houses=args.houses, grid=args.grid, rack=args.rack)
        h = gen_warehouse(p)
        a, b = warehouse_query(p)
        print(f"query {format_state(a)} -> {format_state(b)}", file=sys.stderr)
    elif args.kind == "random":
        h = gen_random(RandomParams(seed=args.seed, max_depth=args.depth,
                                    max_states=args.max_states, n_inputs=args.inputs,
                                    density=args.density))
    else:
        h = gen_nested()
    out, close = _open_out(args.output)
    try:
        write_himm(h, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    depths = _depths(args.depths) if args.depths else [args.depth]
    records = list(sweep_recursive(depths, args.reps, flat_limit=args.flat_limit))
    if args.warehouse:
        h = gen_warehouse()
        a, b = warehouse_query()
        records.append(bench_instance("warehouse", h, a, b, flat_limit=args.flat_limit))
    out, close = _open_out(args.csv)
    try:
        write_csv(records, out)
    finally:
        if close:
            out.close()
    bad = [r.instance for r in records if r.equal is False]
    if bad:
        print("error: cost mismatch on " + ", ".join(bad), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="himm", description="Optimal planning in hierarchical Mealy machines.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a hierarchy document")
    v.add_argument("--input", required=True, help="hierarchy document ('-' for stdin)")
    v.set_defaults(func=cmd_validate)

    o = sub.add_parser("offline", help="compute and save exit costs")
    o.add_argument("--input", required=True)
    o.add_argument("--cache", default="-", help="output cache file (default stdout)")
    o.set_defaults(func=cmd_offline)

    q = sub.add_parser("plan", help="optimal plan between two states")
    q.add_argument("--input", required=True)
    q.add_argument("--from", dest="from_", required=True, metavar="PATH",
                   help="initial state, local names joined by '/'")
    q.add_argument("--to", required=True, metavar="PATH")
    q.add_argument("--cache", help="exit-cost cache; computed and written if missing")
    q.add_argument("--mode", choices=("hierarchical", "flat"), default="hierarchical")
    q.add_argument("--emit-plan", metavar="FILE", help="write the plan, one input per line ('-' for stdout)")
    q.add_argument("--stats", action="store_true", help="print timings and search sizes")
    q.add_argument("--expect-feasible", action="store_true", help="exit nonzero if infeasible")
    q.add_argument("--flat-limit", type=int, default=DEFAULT_FLAT_LIMIT)
    q.set_defaults(func=cmd_plan)

    g = sub.add_parser("gen", help="write a generated hierarchy")
    g.add_argument("kind", choices=("recursive", "warehouse", "random", "nested"))
    g.add_argument("--depth", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-states", type=int, default=5)
    g.add_argument("--inputs", type=int, default=3)
    g.add_argument("--density", type=float, default=0.6)
    g.add_argument("--houses", type=int, default=10)
    g.add_argument("--grid", type=int, default=10)
    g.add_argument("--rack", type=int, default=3)
    g.add_argument("-o", "--output", default="-")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="depth sweep on the recursive family")
    b.add_argument("--depths", help="e.g. 1-14 or 10,12,14")
    b.add_argument("--depth", type=int, default=10)
    b.add_argument("--reps", type=int, default=1)
    b.add_argument("--csv", default="-")
    b.add_argument("--flat-limit", type=int, default=DEFAULT_FLAT_LIMIT)
    b.add_argument("--warehouse", action="store_true", help="append the warehouse instance")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, HiMMError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
