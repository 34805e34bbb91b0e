"""Brute-force scheduling oracle.

A schedule executes tree nodes one at a time.  A node becomes enabled once
its parent has executed and, additionally:

* ``acqN`` needs lock N to be free;
* ``jo`` needs every thread spawned, directly or through descendants, from
  a spawn that the joining thread executed earlier to have executed its
  ``$`` leaf.  A thread ending in ``bot`` or a label never terminates, so a
  join waiting for it blocks forever.

Threads that stop at ``bot`` or a label keep whatever locks they hold.

The search state is the set of executed nodes, kept as a bitmask over the
preorder numbering.  Lock ownership is a function of that set, because each
thread's locking is nested, so the bitmask is a complete memo key.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass
from typing import Iterator

from .tree import (
    ACQ,
    BOT,
    BR,
    JOIN,
    LABEL,
    REL,
    SPAWN,
    TERM,
    ActionTree,
    Address,
    format_address,
    is_join_lock_well_formed,
    locking_sequence,
    max_lock,
    own_segment,
    thread_kinds,
    threads,
)


class OracleError(ValueError):
    """Raised when a tree is outside the oracle's domain."""


@dataclass(frozen=True)
class Schedule:
    steps: tuple[Address, ...]

    def __len__(self):
        return len(self.steps)

    def __str__(self):
        return " ".join(format_address(a) for a in self.steps)


class _Scheduler:
    """Preorder-indexed view of a tree, precomputed for fast search."""

    def __init__(self, t: ActionTree, check: bool = True):
        if check:
            if any(n.kind == BR for n in t.iter_nodes()):
                raise OracleError("the oracle takes single trees, not br forests")
            if not is_join_lock_well_formed(t, max(max_lock(t), 1)):
                raise OracleError("tree is not join-lock-well-formed")
        self.tree = t
        self.addresses: list[Address] = []
        self.nodes: list[ActionTree] = []
        index: dict[Address, int] = {}
        for addr, node in t.nodes():
            index[addr] = len(self.addresses)
            self.addresses.append(addr)
            self.nodes.append(node)
        self.index = index
        n = len(self.nodes)
        self.full = (1 << n) - 1
        self.parent = [index[a[:-1]] if a else -1 for a in self.addresses]
        self.acq_mask: dict[int, int] = {}
        self.rel_mask: dict[int, int] = {}
        for i, node in enumerate(self.nodes):
            if node.kind == ACQ:
                self.acq_mask[node.arg] = self.acq_mask.get(node.arg, 0) | (1 << i)
            elif node.kind == REL:
                self.rel_mask[node.arg] = self.rel_mask.get(node.arg, 0) | (1 << i)
        # per join: bitmask of the '$' leaves it waits for, or None if it
        # waits for a thread that can never terminate
        self.join_needs: dict[int, int | None] = {}
        for i, addr in enumerate(self.addresses):
            if self.nodes[i].kind != JOIN:
                continue
            need = 0
            for leaf in _joined_leaves(t, addr):
                if t.subtree(leaf).kind != TERM:
                    need = None
                    break
                need |= 1 << index[leaf]
            self.join_needs[i] = need

    def enabled(self, mask: int) -> list[int]:
        out = []
        for i, node in enumerate(self.nodes):
            bit = 1 << i
            if mask & bit:
                continue
            p = self.parent[i]
            if p >= 0 and not mask & (1 << p):
                continue
            kind = node.kind
            if kind == ACQ:
                x = node.arg
                held = (mask & self.acq_mask[x]).bit_count() - (mask & self.rel_mask.get(x, 0)).bit_count()
                if held:
                    continue
            elif kind == JOIN:
                need = self.join_needs[i]
                if need is None or mask & need != need:
                    continue
            out.append(i)
        return out

    def complete_path(self) -> list[int] | None:
        """Some execution order covering every node, or None."""
        dead: set[int] = set()
        path: list[int] = []
        stack = [(0, iter(self.enabled(0)))]
        if self.full == 0:
            return []
        while stack:
            mask, it = stack[-1]
            step = next(it, None)
            if step is None:
                dead.add(mask)
                stack.pop()
                if path:
                    path.pop()
                continue
            nxt = mask | (1 << step)
            if nxt in dead:
                continue
            path.append(step)
            if nxt == self.full:
                return path
            stack.append((nxt, iter(self.enabled(nxt))))
        return None

    def reachable(self) -> set[int]:
        seen = {0}
        todo = [0]
        while todo:
            mask = todo.pop()
            for step in self.enabled(mask):
                nxt = mask | (1 << step)
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return seen

    def path_to_cover(self, target: int) -> list[int] | None:
        """Some partial schedule whose executed set contains ``target``."""
        dead: set[int] = set()
        path: list[int] = []
        if target == 0:
            return []
        stack = [(0, iter(self.enabled(0)))]
        while stack:
            mask, it = stack[-1]
            step = next(it, None)
            if step is None:
                dead.add(mask)
                stack.pop()
                if path:
                    path.pop()
                continue
            nxt = mask | (1 << step)
            if nxt in dead:
                continue
            path.append(step)
            if nxt & target == target:
                return path
            stack.append((nxt, iter(self.enabled(nxt))))
        return None

    def schedule(self, path: list[int]) -> Schedule:
        return Schedule(tuple(self.addresses[i] for i in path))


def _joined_spawns(t: ActionTree, join: Address) -> list[Address]:
    """Spawns executed by the joining thread before the join."""
    branch = [join[:i] for i in range(len(join) + 1)]
    return [a for a in own_segment(branch)[:-1] if t.subtree(a).kind == SPAWN]


def _joined_leaves(t: ActionTree, join: Address) -> list[Address]:
    """Leaves of every thread a join waits for."""
    leaves = []
    for s in _joined_spawns(t, join):
        child = s + (2,)
        leaves += [child + a for a, n in t.subtree(child).nodes() if n.is_leaf]
    return leaves


# --- public operations -----------------------------------------------------------

def iter_schedules(t: ActionTree) -> Iterator[Schedule]:
    """Lazily yield every maximal schedule in lexicographic order."""
    sched = _Scheduler(t)
    if sched.full == 0:
        return
    path: list[int] = []
    stack = [iter(sched.enabled(0))]
    mask = 0
    while stack:
        step = next(stack[-1], None)
        if step is None:
            stack.pop()
            if path:
                last = path.pop()
                mask &= ~(1 << last)
            continue
        path.append(step)
        mask |= 1 << step
        nxt = sched.enabled(mask)
        if not nxt:
            yield sched.schedule(path)
            path.pop()
            mask &= ~(1 << step)
            continue
        stack.append(iter(nxt))


def enumerate_schedules(t: ActionTree) -> list[Schedule]:
    """All maximal schedules, lexicographically ordered by step addresses.

    Exponential in the number of concurrent nodes; intended for small trees.
    """
    return list(iter_schedules(t))


def is_schedulable(t: ActionTree) -> bool:
    return _Scheduler(t).complete_path() is not None


def find_complete_schedule(t: ActionTree) -> Schedule | None:
    sched = _Scheduler(t)
    path = sched.complete_path()
    return None if path is None else sched.schedule(path)


def _label_nodes(t: ActionTree, label: str) -> list[Address]:
    return [a for a, n in t.nodes() if n.kind == LABEL and n.arg == label]


def _reach_pairs(t: ActionTree, l1: str, l2: str) -> list[tuple[Address, Address]]:
    p1 = _label_nodes(t, l1)
    p2 = _label_nodes(t, l2)
    if not p1 or not p2:
        missing = l1 if not p1 else l2
        raise OracleError(f"label {missing!r} does not occur in the tree")
    pairs = []
    for a in p1:
        for b in p2:
            if a[: len(b)] == b or b[: len(a)] == a:
                continue
            pairs.append((a, b))
    return pairs


def oracle_pairwise_reachable(t: ActionTree, l1: str, l2: str) -> bool:
    """Some schedule executes an ``l1`` node and an ``l2`` node on distinct threads."""
    return pairwise_witness(t, l1, l2) is not None


def pairwise_witness(t: ActionTree, l1: str, l2: str) -> Schedule | None:
    pairs = _reach_pairs(t, l1, l2)
    if not pairs:
        return None
    sched = _Scheduler(t)
    complete = sched.complete_path()
    if complete is not None:
        # a complete schedule executes every node, both labels included
        return sched.schedule(complete)
    reach = sched.reachable()
    for a, b in pairs:
        target = (1 << sched.index[a]) | (1 << sched.index[b])
        if any(m & target == target for m in reach):
            return sched.schedule(sched.path_to_cover(target))
    return None


def validate_schedule(t: ActionTree, schedule: Schedule) -> bool:
    """Independent check of a schedule against the action-sequence rules.

    Replays the steps with explicit per-lock holders and per-thread progress
    instead of the search's bitmask encoding.
    """
    nodes = dict(t.nodes())
    seen: set[Address] = set()
    holder: dict[int, Address] = {}  # lock -> thread start address
    for addr in schedule.steps:
        if addr not in nodes or addr in seen:
            return False
        if addr and addr[:-1] not in seen:
            return False
        node = nodes[addr]
        thread = _thread_start(addr)
        if node.kind == ACQ:
            if node.arg in holder:
                return False
            holder[node.arg] = thread
        elif node.kind == REL:
            if holder.get(node.arg) != thread:
                return False
            del holder[node.arg]
        elif node.kind == JOIN:
            for leaf in _joined_leaves(t, addr):
                if nodes[leaf].kind != TERM or leaf not in seen:
                    return False
        seen.add(addr)
    return True


def _thread_start(addr: Address) -> Address:
    for i in range(len(addr), 0, -1):
        if addr[i - 1] == 2:
            return addr[:i]
    return ()


# --- structural properties ------------------------------------------------------

def final_acquisitions(t: ActionTree) -> list[tuple[int, Address]]:
    """``(lock, acquire address)`` for each lock a thread still holds at its leaf."""
    result: list[tuple[int, Address]] = []
    stack: list[tuple[ActionTree, Address, tuple]] = [(t, (), ())]
    while stack:
        node, addr, held = stack.pop()
        kind = node.kind
        if kind == ACQ:
            held = held + ((node.arg, addr),)
        elif kind == REL and held and held[-1][0] == node.arg:
            held = held[:-1]
        if kind == SPAWN:
            stack.append((node.children[1], addr + (2,), ()))
        if node.children:
            stack.append((node.children[0], addr + (1,), held))
        else:
            result.extend(held)
    return result


def double_final_acquisition(t: ActionTree, x: int) -> bool:
    holders = [addr for lock, addr in final_acquisitions(t) if lock == x]
    return len(holders) >= 2


def _all_terminate(t: ActionTree) -> bool:
    return all(n.kind == TERM for n in t.iter_nodes() if not n.children)


def child_termination(t: ActionTree) -> bool:
    """Some join waits for a thread that never reaches ``$``."""
    # walk threads, remembering whether an earlier spawn of the current
    # thread left a subtree that cannot fully terminate
    stack: list[tuple[ActionTree, bool]] = [(t, False)]
    while stack:
        node, pending = stack.pop()
        if node.kind == JOIN and pending:
            return True
        if node.kind == SPAWN:
            stack.append((node.children[1], False))
            stack.append((node.children[0], pending or not _all_terminate(node.children[1])))
        elif node.children:
            stack.append((node.children[0], pending))
    return False


def _joins_before_release(t: ActionTree, x: int) -> bool:
    """Following the current thread, a join comes before any release of x."""
    node = t
    while True:
        if node.kind == JOIN:
            return True
        if (node.kind == REL and node.arg == x) or not node.children:
            return False
        node = node.children[0]


def join_lock(t: ActionTree, x: int) -> bool:
    """A thread holds x over a spawn and joins before releasing x, while some
    thread of the spawned subtree acquires x."""
    stack: list[tuple[ActionTree, bool]] = [(t, False)]
    while stack:
        node, holds = stack.pop()
        if node.kind == ACQ and node.arg == x:
            holds = True
        elif node.kind == REL and node.arg == x:
            holds = False
        if node.kind == SPAWN:
            parent, child = node.children
            if holds and _joins_before_release(parent, x) and any(
                n.kind == ACQ and n.arg == x for n in child.iter_nodes()
            ):
                return True
            stack.append((child, False))
        if node.children:
            stack.append((node.children[0], holds))
    return False


def lock_dependency_graph(t: ActionTree) -> dict[int, set[int]]:
    """Edge x -> y when y is acquired anywhere below a final acquisition of x."""
    graph: dict[int, set[int]] = {}
    for lock, addr in final_acquisitions(t):
        below = graph.setdefault(lock, set())
        for n in t.subtree(addr).children[0].iter_nodes():
            if n.kind == ACQ:
                below.add(n.arg)
    return graph


def lock_cycle(t: ActionTree) -> bool:
    graph = lock_dependency_graph(t)
    try:
        graphlib.TopologicalSorter(graph).prepare()
    except graphlib.CycleError:
        return True
    return False


PROPERTIES = ("dfa", "child_term", "join_lock", "all_deadlock", "cycle")


def oracle_property(t: ActionTree, prop: str, x: int | None = None) -> bool:
    """Decide a named property; ``dfa`` and ``join_lock`` take a lock ``x``.

    ``prop`` may also be spelled ``dfa_1`` or ``join_lock_2``.
    """
    name, _, suffix = prop.rpartition("_")
    if suffix.isdigit() and name in ("dfa", "join_lock"):
        prop, x = name, int(suffix)
    _Scheduler(t)  # domain checks
    if prop == "dfa":
        return double_final_acquisition(t, _need_lock(prop, x))
    if prop == "child_term":
        return child_termination(t)
    if prop == "join_lock":
        return join_lock(t, _need_lock(prop, x))
    if prop == "all_deadlock":
        return not is_schedulable(t)
    if prop == "cycle":
        return lock_cycle(t)
    raise OracleError(f"unknown property {prop!r}")


def _need_lock(prop: str, x: int | None) -> int:
    if x is None:
        raise OracleError(f"property {prop} needs a lock")
    return x


@dataclass(frozen=True)
class TreeVerdict:
    """Oracle facts about one tree for a list of label pairs."""

    schedulable: bool
    reachable: tuple[tuple[str, str], ...]  # configured pairs that are reachable

    @property
    def unsafe(self) -> bool:
        return self.schedulable and bool(self.reachable)


def judge(t: ActionTree, pairs, check: bool = True) -> TreeVerdict:
    """Schedulability and, for schedulable trees, the reachable pairs.

    Reachability is only worked out when the tree is schedulable, which is
    all that the safety verdict needs; use :func:`oracle_pairwise_reachable`
    for the general question.
    """
    sched = _Scheduler(t, check=check)
    if sched.complete_path() is None:
        return TreeVerdict(False, ())
    present = {n.arg: [] for n in sched.nodes if n.kind == LABEL}
    for addr, node in zip(sched.addresses, sched.nodes):
        if node.kind == LABEL:
            present[node.arg].append(addr)
    reachable = []
    for l1, l2 in pairs:
        found = any(
            not (a[: len(b)] == b or b[: len(a)] == a)
            for a in present.get(l1, ())
            for b in present.get(l2, ())
        )
        if found:
            reachable.append((l1, l2))
    return TreeVerdict(True, tuple(reachable))


def unsafe(t: ActionTree, pairs) -> bool:
    """Schedulable and some configured pair is pairwise reachable."""
    if not is_schedulable(t):
        return False
    for l1, l2 in pairs:
        try:
            if oracle_pairwise_reachable(t, l1, l2):
                return True
        except OracleError:
            continue
    return False


__all__ = [
    "OracleError",
    "PROPERTIES",
    "Schedule",
    "child_termination",
    "double_final_acquisition",
    "enumerate_schedules",
    "final_acquisitions",
    "find_complete_schedule",
    "is_schedulable",
    "judge",
    "TreeVerdict",
    "iter_schedules",
    "join_lock",
    "lock_cycle",
    "lock_dependency_graph",
    "oracle_pairwise_reachable",
    "oracle_property",
    "pairwise_witness",
    "unsafe",
    "validate_schedule",
]
