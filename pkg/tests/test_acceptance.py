"""Headline acceptance checks, one PASS/FAIL line each.

Run with ``pytest -v tests/test_acceptance.py``; the lines are printed even
when output capture is on.
"""

from __future__ import annotations

import random
import statistics
import time

import pytest

from atab.ata import FALSE, TRUE, Ata, Atom, conj, disj, evaluate, parse_ata, serialize
from atab.builders import WIDGETS, build_full, build_join_lock, build_unschedulable, build_widget
from atab.check import check
from atab.corpus import random_tree
from atab.diff import oracle_diff
from atab.forest import build_forest
from atab.oracle import is_schedulable
from atab.tree import CheckConfig, parse_tree, ranked_alphabet, serialize_tree

from conftest import JOIN_LOCK_TREE, CROSSED_TREE, PRINTER


@pytest.fixture
def report(capsys):
    def emit(name: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return emit


def test_printer_example(report):
    start = time.perf_counter()
    config = CheckConfig(1, ("P",), (("P", "P"),))
    result = check(parse_tree(PRINTER), config)
    elapsed = time.perf_counter() - start
    reasons = [result.crop_reasons(i) for i in range(len(result.forest.label_crops))]
    deadlock = {"childterm", "cycle", "joinlock:1"}
    dfa_crops = [i for i, r in enumerate(reasons) if "dfa:1" in r]
    others = [r for i, r in enumerate(reasons) if i not in dfa_crops]
    ok = (result.safe and len(reasons) == 3 and len(dfa_crops) == 1
          and all(r & deadlock and "dfa:1" not in r for r in others)
          and all(c.safe for c in result.constituents) and elapsed < 1.0)
    detail = "; ".join(f"crop {i + 1}: {sorted(r)}" for i, r in enumerate(reasons))
    report("printer", ok, f"{'SAFE' if result.safe else 'UNSAFE'}, {detail}, {elapsed:.3f}s")
    assert ok


def test_join_lock_tree(report):
    start = time.perf_counter()
    t = parse_tree(JOIN_LOCK_TREE)
    schedulable = is_schedulable(t)
    accepted = evaluate(build_join_lock(1, CheckConfig(1)), t).accepted
    elapsed = time.perf_counter() - start
    ok = not schedulable and accepted and elapsed < 1.0
    report("join-lock tree", ok, f"schedulable={schedulable}, joinlock:1 accepts={accepted}, {elapsed:.3f}s")
    assert ok


def test_crossed_locks_tree(report):
    start = time.perf_counter()
    t = parse_tree(CROSSED_TREE)
    schedulable = is_schedulable(t)
    config = CheckConfig(2)
    # no label pairs to reach: safe, and not because of any deadlock widget
    safe = evaluate(build_full(config), build_forest(t, config).spine).accepted
    deadlock_fires = evaluate(build_unschedulable(config), t).accepted
    # labels at both thread ends are reachable: the possible deadlock does not hide them
    labelled = parse_tree(CROSSED_TREE.replace("($)", "(lab A)", 1).replace("($)", "(lab B)", 1))
    lconfig = CheckConfig(2, ("A", "B"), (("A", "B"),))
    labelled_safe = check(labelled, lconfig).safe
    elapsed = time.perf_counter() - start
    ok = schedulable and safe and not deadlock_fires and not labelled_safe and elapsed < 1.0
    report("crossed-locks tree", ok, f"schedulable={schedulable}, SAFE without pairs={safe}, "
           f"unschedulability widgets fire={deadlock_fires}, labelled A:B SAFE={labelled_safe}, {elapsed:.3f}s")
    assert ok


def test_oracle_equivalence(report):
    start = time.perf_counter()
    config = CheckConfig(2, ("A", "B"), (("A", "B"), ("A", "A")))
    result = oracle_diff(config, 9)
    elapsed = time.perf_counter() - start
    ok = result.ok
    first = f", first: {result.disagreements[0]}" if result.disagreements else ""
    report("oracle-equivalence", ok, f"{result.summary()}, {elapsed:.0f}s (target 300s){first}")
    assert ok


def _max_relative_residual(xs, ys, fit) -> float:
    return max(abs(fit(x) - y) / y for x, y in zip(xs, ys))


def test_scalability_shape(report):
    ks = list(range(1, 9))
    states, transitions = [], []
    automata = {}
    for k in ks:
        a = build_full(CheckConfig(k, ("A", "B"), (("A", "B"),)))
        automata[k] = a
        states.append(len(a.states))
        transitions.append(a.transition_count)
    start = time.perf_counter()
    text = serialize(automata[8])
    serialize_time = time.perf_counter() - start
    slope, intercept = statistics.linear_regression(ks, states)
    state_res = _max_relative_residual(ks, states, lambda k: slope * k + intercept)
    # least squares through the origin
    c = sum(k * k * y for k, y in zip(ks, transitions)) / sum(k ** 4 for k in ks)
    trans_res = _max_relative_residual(ks, transitions, lambda k: c * k * k)
    ok = state_res < 0.05 and trans_res < 0.05 and serialize_time < 10
    report("scalability", ok,
           f"states {states} fit {slope:.1f}k{intercept:+.1f} max residual {state_res:.1%}; "
           f"transitions {transitions} fit {c:.1f}k^2 max residual {trans_res:.1%}; "
           f"k=8 serialization {serialize_time:.3f}s ({len(text)} bytes)")
    assert ok


def _random_ata(rng: random.Random) -> Ata:
    config = CheckConfig(rng.randint(0, 2), ("A", "B")[: rng.randint(0, 2)])
    alphabet = ranked_alphabet(config, with_br=rng.random() < 0.3)
    states = [f"q{i}" for i in range(rng.randint(1, 5))]

    def formula(arity, depth):
        roll = rng.random()
        if depth == 0 or roll < 0.3:
            if arity and roll < 0.2:
                return Atom(rng.randint(1, arity), rng.choice(states))
            return rng.choice([TRUE, FALSE])
        parts = [formula(arity, depth - 1) for _ in range(rng.randint(2, 3))]
        return conj(*parts) if roll < 0.65 else disj(*parts)

    delta = {(q, s): formula(n, 3) for q in states for s, n in alphabet.items()}
    return Ata(alphabet, tuple(states), rng.choice(states), delta)


def _random_widget(rng: random.Random) -> Ata:
    k = rng.randint(1, 3)
    labels = ("A", "B")
    config = CheckConfig(k, labels, (("A", "B"),) if rng.random() < 0.5 else (("A", "A"), ("B", "B")))
    widget = rng.choice(WIDGETS)
    widget = widget.replace("X:Y", f"{rng.randint(1, k)}:{rng.randint(1, k)}").replace("X", str(rng.randint(1, k)))
    widget = widget.replace("A:B", f"{rng.choice(labels)}:{rng.choice(labels)}")
    return build_widget(widget, config)


def test_round_trips(report):
    start = time.perf_counter()
    rng = random.Random(2024)
    config = CheckConfig(3, ("A", "B"))
    tree_bad = 0
    for _ in range(500):
        t = random_tree(rng, config, 40)
        if parse_tree(serialize_tree(t)) != t:
            tree_bad += 1
    ata_bad = 0
    for i in range(500):
        a = _random_widget(rng) if i % 2 else _random_ata(rng)
        text = serialize(a)
        back = parse_ata(text)
        if back != a or serialize(back) != text:
            ata_bad += 1
    elapsed = time.perf_counter() - start
    ok = tree_bad == 0 and ata_bad == 0
    report("round-trips", ok, f"500 trees: {tree_bad} mismatches; 500 automata: {ata_bad} mismatches; {elapsed:.1f}s")
    assert ok
