"""Cross-check automaton verdicts against the oracle over a whole corpus.

Each generated tree is checked three ways:

* as a forest constituent: the safety automaton accepts it exactly when
  the oracle finds it unschedulable or finds no configured pair reachable;
* widget by widget: double final acquisition, child termination and
  join-lock widgets against the oracle's structural properties, and the
  disjunction of all unschedulability widgets against schedulability;
* as a source tree: the forest automaton on ``build_forest(t)`` against the
  oracle verdicts of every constituent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .ata import Evaluator
from .builders import build_child_term, build_dfa, build_full, build_join_lock, build_unschedulable
from .corpus import Corpus
from .forest import ForestError, build_forest
from .oracle import child_termination, double_final_acquisition, join_lock, judge
from .tree import BR, LABEL, ActionTree, CheckConfig


@dataclass(frozen=True)
class Disagreement:
    check: str
    tree: ActionTree
    automaton: bool
    oracle: bool

    def __str__(self):
        return f"{self.check}: automaton={self.automaton} oracle={self.oracle} on {self.tree}"


@dataclass
class DiffReport:
    trees: int = 0
    forests: int = 0
    constituents: int = 0
    skipped_forests: int = 0
    comparisons: dict[str, int] = field(default_factory=dict)
    disagreements: list[Disagreement] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def summary(self) -> str:
        checks = ", ".join(f"{k}={v}" for k, v in sorted(self.comparisons.items()))
        return (f"{len(self.disagreements)} disagreements over {self.trees} trees "
                f"({self.forests} forests, {self.constituents} constituents, "
                f"{self.skipped_forests} trees without a forest); comparisons: {checks}")


# oracle codes cached per tree
_UNSCHED, _SAFE, _UNSAFE = 0, 1, 2


class _Differ:
    def __init__(self, config: CheckConfig, widgets: bool, stop_at_first: bool):
        self.config = config
        self.widgets = widgets
        self.stop_at_first = stop_at_first
        self.report = DiffReport()
        self.full = Evaluator(build_full(config))
        self.unsched = Evaluator(build_unschedulable(config))
        self.dfa = {x: Evaluator(build_dfa(x, config)) for x in config.locks}
        self.jl = {x: Evaluator(build_join_lock(x, config)) for x in config.locks}
        self.ct = Evaluator(build_child_term(config))
        self.oracle: dict[ActionTree, int] = {}

    def compare(self, check: str, tree: ActionTree, automaton: bool, oracle: bool) -> None:
        counts = self.report.comparisons
        counts[check] = counts.get(check, 0) + 1
        if automaton != oracle:
            self.report.disagreements.append(Disagreement(check, tree, automaton, oracle))

    @property
    def done(self) -> bool:
        return self.stop_at_first and bool(self.report.disagreements)

    def code(self, t: ActionTree) -> int:
        got = self.oracle.get(t)
        if got is None:
            v = judge(t, self.config.pairs, check=False)
            got = _UNSAFE if v.unsafe else (_SAFE if v.schedulable else _UNSCHED)
            self.oracle[t] = got
        return got

    def tree(self, t: ActionTree) -> None:
        self.report.trees += 1
        code = self.code(t)
        self.compare("full", t, self.full.accepts(t), code != _UNSAFE)
        if not self.widgets:
            return
        self.compare("unschedulable", t, self.unsched.accepts(t), code == _UNSCHED)
        for x in self.config.locks:
            self.compare(f"dfa:{x}", t, self.dfa[x].accepts(t), double_final_acquisition(t, x))
            self.compare(f"joinlock:{x}", t, self.jl[x].accepts(t), join_lock(t, x))
        self.compare("childterm", t, self.ct.accepts(t), child_termination(t))

    def forest(self, t: ActionTree) -> None:
        try:
            forest = build_forest(t, self.config)
        except ForestError:
            self.report.skipped_forests += 1
            return
        self.report.forests += 1
        trees = forest.trees
        self.report.constituents += len(trees)
        oracle_safe = all(self.code(c) != _UNSAFE for c in trees)
        spine = forest.spine
        self.compare("forest", t, self.full.accepts(spine), oracle_safe)
        # drop the br nodes from the memo; constituents stay cached
        node = spine
        while node.kind == BR:
            self.full.cache.pop(node, None)
            node = node.children[1]


def oracle_diff(config: CheckConfig, max_nodes: int, *, widgets: bool = True, forests: bool = True,
                stop_at_first: bool = False, label_children: tuple[int, ...] = (0,),
                progress: Callable[[int], None] | None = None) -> DiffReport:
    """Compare automata and oracle on every join-lock-well-formed tree with
    at most ``max_nodes`` nodes over the configuration's locks and labels."""
    differ = _Differ(config, widgets, stop_at_first)
    corpus = Corpus.for_config(config, label_children)
    for i, t in enumerate(corpus.up_to(max_nodes), 1):
        if 1 not in label_children or _is_cropped(t):
            differ.tree(t)
        if forests:
            differ.forest(t)
        if progress is not None:
            progress(i)
        if differ.done:
            break
    return differ.report


def _is_cropped(t: ActionTree) -> bool:
    """Labels only as leaves, the shape of a forest constituent."""
    return all(n.kind != LABEL or not n.children for n in t.iter_nodes())
