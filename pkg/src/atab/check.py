"""Forest safety check with a per-constituent explanation.

The verdict is exactly the full automaton run on the br-joined forest.
The explanation re-runs the individual widgets on every constituent so a
reader can see which property made it safe, and asks the oracle for a
witness schedule when the forest is unsafe.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ata import Evaluator
from .builders import build_full, build_pair_reach, build_safe_tree, named_widgets
from .forest import Constituent, Forest, build_forest
from .oracle import Schedule, judge, pairwise_witness
from .tree import ActionTree, CheckConfig, serialize_tree


@dataclass(frozen=True)
class ConstituentReport:
    constituent: Constituent
    safe: bool  # accepted by the single-tree safety automaton
    fired: tuple[str, ...]  # widgets that accept the constituent

    def line(self) -> str:
        reason = ", ".join(self.fired) if self.fired else "none"
        verdict = "safe" if self.safe else "UNSAFE"
        return f"{self.constituent.describe()}: {verdict} [{reason}] {serialize_tree(self.constituent.tree)}"


@dataclass(frozen=True)
class CheckReport:
    safe: bool
    forest: Forest
    constituents: tuple[ConstituentReport, ...]
    witness: tuple[Constituent, tuple[str, str], Schedule] | None = None

    def crop_reasons(self, crop: int) -> set[str]:
        """Widgets firing on the uncut copy of a label crop."""
        for r in self.constituents:
            if r.constituent.label_crop == crop and r.constituent.cropped_at is None:
                return set(r.fired)
        raise IndexError(crop)

    def lines(self) -> list[str]:
        out = ["SAFE" if self.safe else "UNSAFE"]
        for i, crop in enumerate(self.forest.label_crops):
            out.append(f"label crop {i + 1}: {serialize_tree(crop)}")
        out += [r.line() for r in self.constituents]
        if self.witness is not None:
            con, (l1, l2), schedule = self.witness
            out.append(f"witness ({con.describe()}, {l1}:{l2}): {schedule}")
        return out


def check(tree: ActionTree, config: CheckConfig) -> CheckReport:
    forest = build_forest(tree, config)
    full = Evaluator(build_full(config))
    safe = full.accepts(forest.spine)
    single = Evaluator(build_safe_tree(config))
    widgets = [(name, Evaluator(w)) for name, w in named_widgets(config)]
    seen = []
    for pair in config.pairs:
        key = tuple(sorted(pair))
        if key not in seen:
            seen.append(key)
    widgets += [(f"unreachable:{a}:{b}", Evaluator(build_pair_reach(a, b, config))) for a, b in seen]
    if not config.pairs:
        widgets.append(("no-pairs", None))
    reports = []
    for con in forest.constituents:
        fired = tuple(name for name, ev in widgets if ev is None or ev.accepts(con.tree))
        reports.append(ConstituentReport(con, single.accepts(con.tree), fired))
    witness = None
    if not safe:
        witness = _witness(forest, config)
    return CheckReport(safe, forest, tuple(reports), witness)


def _witness(forest: Forest, config: CheckConfig):
    for con in forest.constituents:
        verdict = judge(con.tree, config.pairs)
        if verdict.unsafe:
            l1, l2 = verdict.reachable[0]
            return con, (l1, l2), pairwise_witness(con.tree, l1, l2)
    return None
