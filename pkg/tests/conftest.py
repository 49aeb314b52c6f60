import pytest

from himm import (MealyMachine, Hierarchy, RandomParams, compute_exit_tables, gen_nested,
                  gen_random, gen_warehouse, kernels)
from himm.generators import NESTED_STATES


@pytest.fixture(scope="session", autouse=True)
def _compiled():
    kernels.warmup()


@pytest.fixture(scope="session")
def nested():
    return gen_nested()


@pytest.fixture(scope="session")
def nested_states():
    return NESTED_STATES


@pytest.fixture(scope="session")
def warehouse():
    return gen_warehouse()


@pytest.fixture(scope="session")
def warehouse_table(warehouse):
    return compute_exit_tables(warehouse)


def random_params(seed, **kw):
    """Parameter mix used across suites: depth 2..5, up to 6 states, 1..4 inputs."""
    base = dict(seed=seed, max_depth=2 + seed % 4, max_states=6, n_inputs=1 + seed % 4,
                density=0.6)
    base.update(kw)
    return RandomParams(**base)


@pytest.fixture(scope="session")
def randoms():
    return [gen_random(random_params(s)) for s in range(40)]


def three_level(x_at_root=True):
    """R(r1 -> P, r2); P(p1 -> Q, p2); Q(q1, q2). Only R may define x."""
    r_tr = {("r1", "x"): ("r2", 2.0)} if x_at_root else {}
    r_tr[("r2", "y")] = ("r1", 1.0)
    ms = [
        MealyMachine("R", ["r1", "r2"], "r1", r_tr),
        MealyMachine("P", ["p1", "p2"], "p1", {("p1", "y"): ("p2", 1.0), ("p2", "y"): ("p1", 1.0)}),
        MealyMachine("Q", ["q1", "q2"], "q1", {("q1", "y"): ("q2", 1.0)}),
    ]
    return Hierarchy(ms, "R", {("R", "r1"): "P", ("P", "p1"): "Q"}, ("x", "y"))


def scaled(h, k):
    ms = [MealyMachine(m.id, m.states, m.start,
                       {key: (t, c * k) for key, (t, c) in m.transitions.items()})
          for m in h.machine_list]
    return Hierarchy(ms, h.root, h.refinement, h.inputs)


ACCEPTANCE = []


def report(criterion, ok, detail):
    """Record one acceptance verdict; all are printed at the end of the run."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
