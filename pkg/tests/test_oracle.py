from __future__ import annotations

from math import factorial

import pytest
from hypothesis import given

from atab.corpus import Corpus
from atab.oracle import (
    OracleError,
    Schedule,
    child_termination,
    double_final_acquisition,
    enumerate_schedules,
    find_complete_schedule,
    is_schedulable,
    join_lock,
    judge,
    lock_cycle,
    lock_dependency_graph,
    oracle_pairwise_reachable,
    oracle_property,
    pairwise_witness,
    unsafe,
    validate_schedule,
)
from atab.tree import ACQ, JOIN, CheckConfig, acq, bot, br, jo, lab, parse_tree, rel, sp, term

from conftest import JOIN_LOCK_TREE, CROSSED_TREE, well_formed_trees

SMALL = CheckConfig(2, ("A", "B"))


def test_single_leaf():
    assert enumerate_schedules(term()) == [Schedule(((),))]
    assert is_schedulable(term())


def test_join_lock_tree_is_unschedulable():
    t = parse_tree(JOIN_LOCK_TREE)
    schedules = enumerate_schedules(t)
    assert schedules
    assert all(len(s) < len(t) for s in schedules)
    # every maximal schedule stalls before the child's acquire
    assert all((1, 2) not in s.steps for s in schedules)
    assert not is_schedulable(t)
    assert find_complete_schedule(t) is None


def test_crossed_tree_can_deadlock_but_is_schedulable():
    t = parse_tree(CROSSED_TREE)
    lengths = {len(s) for s in enumerate_schedules(t)}
    assert len(t) in lengths
    assert min(lengths) < len(t)
    assert is_schedulable(t)
    assert validate_schedule(t, find_complete_schedule(t))


def test_joins_wait_for_the_whole_spawned_subtree():
    # the grandchild never terminates, so the join blocks
    assert not is_schedulable(sp(jo(term()), sp(term(), bot())))
    assert is_schedulable(sp(jo(term()), sp(term(), term())))
    # a join only waits for spawns its own thread made before it
    assert is_schedulable(sp(sp(term(), bot()), jo(term())))
    assert is_schedulable(jo(sp(term(), bot())))


def test_held_locks_survive_non_terminating_threads():
    # whichever thread stops first keeps lock 1 for good
    assert is_schedulable(sp(acq(1, rel(1, term())), acq(1, bot())))
    assert not is_schedulable(sp(acq(1, bot()), acq(1, bot())))


def test_oracle_rejects_bad_input():
    with pytest.raises(OracleError):
        is_schedulable(br(term(), term()))
    with pytest.raises(OracleError):
        is_schedulable(acq(1, term()))


def test_pairwise_reachability_examples():
    assert oracle_pairwise_reachable(sp(lab("A"), lab("B")), "A", "B")
    left = parse_tree("(sp (jo ($)) (sp (acq1 (lab P)) (acq1 (lab P))))")
    assert not oracle_pairwise_reachable(left, "P", "P")
    center = parse_tree("(sp (jo (lab P)) (sp (acq1 (lab P)) (acq1 (rel1 ($)))))")
    # the join waits for a thread that stops at a label
    assert not oracle_pairwise_reachable(center, "P", "P")
    assert not is_schedulable(center)
    # same thread: never reachable together
    assert not oracle_pairwise_reachable(jo(lab("A")), "A", "A")
    with pytest.raises(OracleError):
        oracle_pairwise_reachable(term(), "A", "B")


def test_pairwise_witness_is_a_valid_schedule():
    t = sp(acq(1, lab("A")), sp(lab("B"), term()))
    witness = pairwise_witness(t, "A", "B")
    assert validate_schedule(t, witness)
    assert {(1, 1), (2, 1)} <= set(witness.steps)


@given(well_formed_trees(SMALL, 9))
def test_pairwise_reachability_is_symmetric(t):
    if not {"A", "B"} <= {n.arg for n in t.iter_nodes()}:
        return
    assert oracle_pairwise_reachable(t, "A", "B") == oracle_pairwise_reachable(t, "B", "A")


@given(well_formed_trees(SMALL, 8))
def test_emitted_schedules_validate(t):
    schedules = enumerate_schedules(t)
    assert schedules == sorted(schedules, key=lambda s: s.steps)
    for s in schedules:
        assert validate_schedule(t, s)
    complete = any(len(s) == len(t) for s in schedules)
    assert complete == is_schedulable(t)


def test_validator_rejects_bad_schedules():
    t = parse_tree(JOIN_LOCK_TREE)
    assert not validate_schedule(t, Schedule(((1,),)))  # parent missing
    assert not validate_schedule(t, Schedule(((), ())))  # repeated
    steps = ((), (1,), (1, 2), (1, 2, 1))  # lock 1 is held by the parent
    assert not validate_schedule(t, Schedule(steps))
    assert not validate_schedule(t, Schedule(((), (1,), (1, 1))))  # join before child ends


def _extensions(t) -> int:
    """Linear extensions of a tree order: n! over the product of subtree sizes."""
    sizes = 1
    for _, node in t.nodes():
        sizes *= len(node)
    return factorial(len(t)) // sizes


def test_schedule_count_matches_linear_extensions():
    corpus = Corpus(0, ("A",))
    checked = 0
    for t in corpus.up_to(7):
        if any(n.kind in (ACQ, JOIN) for n in t.iter_nodes()):
            continue
        assert len(enumerate_schedules(t)) == _extensions(t)
        checked += 1
    assert checked > 100


def test_double_final_acquisition():
    left = parse_tree("(sp (jo ($)) (sp (acq1 (lab P)) (acq1 (lab P))))")
    assert double_final_acquisition(left, 1)
    assert not double_final_acquisition(parse_tree(JOIN_LOCK_TREE), 1)
    assert not double_final_acquisition(term(), 1)
    # the same thread cannot finally acquire twice
    assert not double_final_acquisition(acq(1, sp(bot(), bot())), 1)


def test_child_termination():
    assert child_termination(sp(jo(term()), bot()))
    assert not child_termination(sp(jo(term()), term()))
    assert child_termination(sp(jo(term()), sp(term(), lab("A"))))
    assert not child_termination(sp(term(), bot()))
    assert not child_termination(term())


def test_join_lock():
    assert join_lock(parse_tree(JOIN_LOCK_TREE), 1)
    assert not join_lock(parse_tree("(acq1 (sp (rel1 (jo ($))) (acq1 (rel1 ($)))))"), 1)
    assert not join_lock(term(), 1)
    # a grandchild that needs the lock also blocks the join
    assert join_lock(acq(1, sp(jo(rel(1, term())), sp(term(), acq(1, rel(1, term()))))), 1)


def test_lock_cycle():
    assert not lock_cycle(parse_tree(CROSSED_TREE))
    crossed = parse_tree("(sp (acq1 (acq2 (bot))) (acq2 (acq1 (bot))))")
    assert lock_dependency_graph(crossed) == {1: {2}, 2: {1}}
    assert lock_cycle(crossed)
    assert not lock_cycle(acq(1, bot()))
    assert lock_cycle(acq(1, sp(bot(), acq(1, bot()))))


def test_oracle_property_names():
    t = parse_tree(JOIN_LOCK_TREE)
    assert oracle_property(t, "join_lock_1")
    assert oracle_property(t, "join_lock", 1)
    assert oracle_property(t, "all_deadlock")
    assert not oracle_property(t, "dfa_1")
    for prop in ("dfa_1", "child_term", "join_lock_1", "all_deadlock", "cycle"):
        assert not oracle_property(term(), prop)
    with pytest.raises(OracleError):
        oracle_property(t, "dfa")
    with pytest.raises(OracleError):
        oracle_property(t, "bogus")


@given(well_formed_trees(SMALL, 9))
def test_properties_imply_unschedulable(t):
    if double_final_acquisition(t, 1) or double_final_acquisition(t, 2) or child_termination(t) \
            or join_lock(t, 1) or join_lock(t, 2):
        assert not is_schedulable(t)


@given(well_formed_trees(SMALL, 9))
def test_judge_matches_unsafe(t):
    pairs = (("A", "B"), ("A", "A"))
    verdict = judge(t, pairs)
    assert verdict.schedulable == is_schedulable(t)
    assert verdict.unsafe == unsafe(t, pairs)
