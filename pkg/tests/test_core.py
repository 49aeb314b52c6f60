import math

import pytest
from hypothesis import given, settings, strategies as st

from himm import (HiMMError, Hierarchy, MealyMachine, Node, flatten, gen_random, gen_recursive,
                  hierarchical_step, run_plan, start_state, stats, validate)
from himm.core import format_state, parse_state

from conftest import random_params


def one_machine(transitions, states=("a", "b", "c"), start="a", inputs=("x", "y")):
    return Hierarchy([MealyMachine("M", states, start, transitions)], "M", {}, inputs)


# validate --------------------------------------------------------------------

def test_validate_generated(warehouse, nested):
    assert validate(warehouse) == []
    assert validate(nested) == []
    assert validate(gen_recursive(4)) == []


def test_validate_cycle():
    ms = [MealyMachine("A", ["a"], "a"), MealyMachine("B", ["b"], "b")]
    h = Hierarchy(ms, "A", {("A", "a"): "B", ("B", "b"): "A"}, ["x"])
    rules = {v.rule for v in validate(h)}
    assert "refinement not a tree" in rules


def test_validate_two_parents():
    ms = [MealyMachine("A", ["a", "b"], "a"), MealyMachine("C", ["c"], "c")]
    h = Hierarchy(ms, "A", {("A", "a"): "C", ("A", "b"): "C"}, ["x"])
    assert [v.machine for v in validate(h) if v.rule == "refinement not a tree"] == ["C"]


def test_validate_negative_cost():
    h = one_machine({("a", "x"): ("b", -1.0)})
    (v,) = validate(h)
    assert v.rule == "negative cost" and v.machine == "M"
    assert "negative cost" in str(v)


@pytest.mark.parametrize("bad, rule", [
    ({("a", "x"): ("zz", 1.0)}, "unknown target state"),
    ({("zz", "x"): ("a", 1.0)}, "unknown source state"),
    ({("a", "w"): ("a", 1.0)}, "unknown input"),
    ({("a", "x"): ("a", math.inf)}, "non-finite cost"),
])
def test_validate_transition_rules(bad, rule):
    assert [v.rule for v in validate(one_machine(bad))] == [rule]


def test_validate_misc_rules():
    assert validate(one_machine({}, start="q"))[0].rule == "start not in states"
    assert validate(one_machine({}, states=("a", "a")))[0].rule == "duplicate state"
    assert validate(one_machine({}, states=("a", "b/c")))[0].rule == "invalid state name"
    h = Hierarchy([MealyMachine("M", ["a"], "a")] * 2, "M", {}, ["x"])
    assert validate(h)[0].rule == "duplicate machine id"
    h = Hierarchy([MealyMachine("M", ["a"], "a")], "Z", {}, ["x"])
    assert validate(h)[0].rule == "unknown root"
    h = Hierarchy([MealyMachine("M", ["a"], "a")], "M", {("M", "a"): "Q"}, ["x"])
    assert validate(h)[0].rule == "refinement to unknown machine"


def test_invalid_hierarchy_refuses_index():
    with pytest.raises(HiMMError, match="negative cost"):
        one_machine({("a", "x"): ("b", -1.0)}).index


# start_state --------------------------------------------------------------------

def test_start_state_nested(nested):
    assert start_state(nested, "F") == ("9-10", "9")


def test_start_state_unrefined_start():
    assert start_state(one_machine({}, start="b"), "M") == ("b",)


def test_start_state_recursive_root():
    # root start is state 2, which is never refined
    assert start_state(gen_recursive(2), "M") == ("2",)
    assert start_state(gen_recursive(3), "M1") == ("1", "2")


def test_start_state_unknown():
    with pytest.raises(HiMMError):
        start_state(gen_recursive(2), "nope")


# hierarchical_step ----------------------------------------------------------------

def test_step_nested(nested, nested_states):
    assert hierarchical_step(nested, nested_states["2"], "y") == (nested_states["9"], 1.0)
    assert hierarchical_step(nested, nested_states["6"], "x") == (nested_states["7"], 1.0)
    # z is defined nowhere
    assert hierarchical_step(nested, nested_states["2"], "z") is None


def test_step_self_loop():
    h = one_machine({("b", "x"): ("b", 2.5)})
    assert hierarchical_step(h, "b", "x") == (("b",), 2.5)


def test_step_warehouse_house_move(warehouse):
    assert hierarchical_step(warehouse, "house1/entrance", "right") == (("house2", "entrance"), 100.0)


def test_step_accepts_node_forms(nested, nested_states):
    by_path = hierarchical_step(nested, "1-8/1-2/2", "y")
    assert hierarchical_step(nested, Node("A", "2"), "y") == by_path
    assert hierarchical_step(nested, nested.index.node("A", "2"), "y") == by_path
    # a refined node climbs from its own machine
    assert hierarchical_step(nested, Node("P", "1-2"), "y") == by_path


def test_step_errors(nested):
    with pytest.raises(HiMMError):
        hierarchical_step(nested, "1-8/nope", "y")
    with pytest.raises(HiMMError):
        hierarchical_step(nested, "1-8/3", "w")


# run_plan ---------------------------------------------------------------------

def test_run_empty_plan(nested, nested_states):
    r = run_plan(nested, nested_states["2"], [])
    assert r.trajectory == [] and r.cost == 0.0 and r.final == nested_states["2"]


def test_run_nested(nested, nested_states):
    r = run_plan(nested, nested_states["2"], ["y"])
    assert r.final == nested_states["9"] and r.cost == 1.0


def test_run_warehouse(warehouse):
    r = run_plan(warehouse, "house1/entrance", ["right", "right"])
    assert r.final == ("house3", "entrance") and r.cost == 200.0
    assert [c for _, _, c in r.trajectory] == [100.0, 100.0]


def test_run_stops(nested, nested_states):
    r = run_plan(nested, nested_states["2"], ["y", "z", "x"])
    assert r.stopped and r.cost == math.inf and len(r.trajectory) == 2


def test_run_requires_state(nested):
    with pytest.raises(HiMMError, match="refined"):
        run_plan(nested, "1-8", [])


# stats ----------------------------------------------------------------------------

def test_stats_single():
    assert tuple(stats(one_machine({})))[:3] == (1, 3, 1)


def test_stats_recursive_and_warehouse(warehouse):
    assert stats(gen_recursive(20)).flat_states == 2_097_151
    s = stats(warehouse)
    assert (s.machines, s.depth, s.flat_states, s.max_states) == (1011, 3, 91_010, 101)


# addressing -------------------------------------------------------------------------

def test_state_text_round_trip():
    assert parse_state("a/b/c") == ("a", "b", "c")
    assert format_state(parse_state("house1/g1_1")) == "house1/g1_1"


def test_path_round_trip(warehouse):
    ix = warehouse.index
    for v in (0, 5, ix.n_nodes // 2, ix.n_nodes - 1):
        assert ix.node_of_path(ix.path_of(v)) == v


def test_materialised_equals_index(nested):
    rebuilt = Hierarchy(nested.machine_list, nested.root, nested.refinement, nested.inputs)
    assert rebuilt == nested
    again = Hierarchy.from_index(rebuilt.index)
    assert again == nested


# properties ---------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_step_matches_flattened(seed):
    h = gen_random(random_params(seed))
    ix = h.index
    fm = flatten(h)
    for f in range(fm.n_states):
        s = fm.state(f)
        for xi, x in enumerate(ix.inputs):
            got = hierarchical_step(h, s, x)
            t = fm.next[f, xi]
            assert (got is None) == (t < 0)
            if got is not None:
                assert got == (fm.state(t), fm.cost[f, xi])
                assert ix.node_child[ix.node_of_path(got[0])] == -1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_run_cost_additive(seed, data):
    h = gen_random(random_params(seed))
    ix = h.index
    s = ix.path_of(data.draw(st.sampled_from(list(ix.leaf_nodes))))
    u1 = data.draw(st.lists(st.sampled_from(ix.inputs), max_size=6))
    u2 = data.draw(st.lists(st.sampled_from(ix.inputs), max_size=6))
    r1 = run_plan(h, s, u1)
    if r1.stopped:
        return
    r2 = run_plan(h, r1.final, u2)
    whole = run_plan(h, s, u1 + u2)
    assert whole.cost == r1.cost + r2.cost
    assert whole == run_plan(h, s, u1 + u2)
