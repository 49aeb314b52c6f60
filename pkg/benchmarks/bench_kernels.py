"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter, since the backend is fixed at
import time by HIMM_DISABLE_NUMBA:

    python3 benchmarks/bench_kernels.py --depth 12
"""

import argparse
import json
import os
import subprocess
import sys
import time


def measure(depth: int, reps: int) -> dict:
    import himm
    from himm import kernels

    kernels.warmup()
    h = himm.gen_recursive(depth)
    a, b = himm.opposite_states(depth)

    def best(fn):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            out = fn()
            times.append(time.perf_counter() - t0)
        return out, min(times)

    table, offline = best(lambda: himm.compute_exit_tables(h))
    res, online = best(lambda: himm.plan(h, table, a, b))
    fm, flat_build = best(lambda: himm.flatten(h))
    fres, flat_search = best(lambda: himm.flat_plan(fm, a, b))
    assert res.cost == fres.cost
    return {"backend": himm.backend_name(), "offline": offline, "online": online,
            "flatten": flat_build, "flat_search": flat_search, "cost": res.cost}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.child:
        print(json.dumps(measure(args.depth, args.reps)))
        return
    rows = []
    for flag in ("0", "1"):
        env = dict(os.environ, HIMM_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--child", "--depth", str(args.depth),
                              "--reps", str(args.reps)],
                             env=env, check=True, capture_output=True, text=True).stdout
        rows.append(json.loads(out.strip().splitlines()[-1]))
    phases = ("offline", "online", "flatten", "flat_search")
    print(f"depth {args.depth}")
    print(f"{'phase':<12}" + "".join(f"{r['backend']:>12}" for r in rows) + f"{'speedup':>10}")
    for ph in phases:
        fast, slow = rows[0][ph], rows[1][ph]
        print(f"{ph:<12}{fast:>12.5f}{slow:>12.5f}{slow / fast:>10.1f}")


if __name__ == "__main__":
    main()
