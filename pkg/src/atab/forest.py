"""Action forests: cropped copies of a tree glued together with ``br``.

For a source tree and a set of label pairs the forest holds

* one *label crop* per pair of label occurrences on different threads: the
  tree truncated at the two chosen label nodes, which become leaves;
* one *operator crop* per lock or join operator occurring in those
  label crops, with that node replaced by ``bot`` (a finite prefix on which
  a thread stops before the operator);
* the label crops themselves.

Every constituent is checked separately; the forest is safe when all of
them are.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tree import (
    ACQ,
    BOT,
    BR,
    JOIN,
    LABEL,
    REL,
    ActionTree,
    Address,
    CheckConfig,
    br,
    descendant,
    format_address,
    lab,
    serialize_tree,
)


class ForestError(ValueError):
    """Raised when no forest can be built for a tree and configuration."""


@dataclass(frozen=True)
class Constituent:
    """One tree of a forest and where it came from."""

    tree: ActionTree
    label_crop: int  # index into Forest.label_crops
    cropped_at: Address | None = None  # operator replaced by bot, if any

    def describe(self) -> str:
        where = f"label crop {self.label_crop + 1}"
        if self.cropped_at is None:
            return where
        return f"{where}, cut at {format_address(self.cropped_at)}"


@dataclass(frozen=True)
class Forest:
    label_crops: tuple[ActionTree, ...]
    constituents: tuple[Constituent, ...]

    @property
    def trees(self) -> list[ActionTree]:
        return [c.tree for c in self.constituents]

    @property
    def spine(self) -> ActionTree:
        return br_join(self.trees)

    def __str__(self):
        return serialize_tree(self.spine)


def neutralize_labels(t: ActionTree, keep: frozenset[Address] = frozenset()) -> ActionTree:
    """Remove every label not at an address in ``keep``.

    A label with a continuation is spliced out; a label leaf becomes ``bot``
    (both stop being observed without executing ``$``).
    """
    def go(node: ActionTree, addr: Address) -> ActionTree:
        if node.kind == LABEL and addr not in keep:
            if node.children:
                return go(node.children[0], addr)
            return ActionTree(BOT)
        if not node.children:
            return node
        children = tuple(go(c, addr + (i,)) for i, c in enumerate(node.children, 1))
        if all(a is b for a, b in zip(children, node.children)):
            return node
        return ActionTree(node.kind, node.arg, children)

    return go(t, ())


def _truncate(t: ActionTree, addr: Address) -> ActionTree:
    node = t.subtree(addr)
    if node.kind != LABEL:
        raise ForestError(f"address {format_address(addr)} is not a label")
    return t.replace(addr, lab(node.arg))


def crop_label(t: ActionTree, p1, p2) -> list[ActionTree]:
    """One tree per pair of chosen label nodes on different threads.

    Both chosen nodes become label leaves.  Pairs where one address is an
    ancestor of the other are skipped, and so are repeats of an unordered
    pair.  Labels at other addresses are removed (see
    :func:`neutralize_labels`) so each crop marks exactly two points.
    """
    p1 = list(p1)
    p2 = list(p2)
    for a in p1 + p2:
        t.subtree(a)
    crops = []
    seen: set[frozenset[Address]] = set()
    for a in p1:
        for b in p2:
            key = frozenset((a, b))
            if key in seen or descendant(t, a, b) or descendant(t, b, a):
                continue
            seen.add(key)
            cut = _truncate(_truncate(t, a), b)
            crops.append(neutralize_labels(cut, frozenset((a, b))))
    return crops


def operator_addresses(t: ActionTree) -> list[Address]:
    return [a for a, n in t.nodes() if n.kind in (ACQ, REL, JOIN)]


def crop_operator(t: ActionTree) -> list[ActionTree]:
    """One copy per acquire/release/join (preorder) with that node made ``bot``."""
    return [t.replace(a, ActionTree(BOT)) for a in operator_addresses(t)]


def br_join(trees) -> ActionTree:
    """Right-nested br spine; a single tree is returned unchanged."""
    trees = list(trees)
    if not trees:
        raise ForestError("br_join needs at least one tree")
    out = trees[-1]
    for t in reversed(trees[:-1]):
        out = br(t, out)
    return out


def flatten(t: ActionTree) -> list[ActionTree]:
    """Constituents of a br spine in left-to-right order."""
    out = []
    stack = [t]
    while stack:
        node = stack.pop()
        if node.kind == BR:
            stack.append(node.children[1])
            stack.append(node.children[0])
        else:
            out.append(node)
    return out


def build_forest(t: ActionTree, config: CheckConfig) -> Forest:
    """Label crops for every configured pair, then every operator crop.

    Without configured pairs the single label crop is the tree itself with
    its labels removed.
    """
    where: dict[str, list[Address]] = {}
    for addr, node in t.nodes():
        if node.kind == BR:
            raise ForestError("source tree already contains br")
        if node.kind == LABEL:
            where.setdefault(node.arg, []).append(addr)
    crops: list[ActionTree] = []
    done: set[frozenset[str]] = set()
    for l1, l2 in config.pairs:
        for label in (l1, l2):
            if label not in where:
                raise ForestError(f"label {label!r} does not occur in the tree")
        key = frozenset((l1, l2))
        if key in done:
            continue
        done.add(key)
        crops.extend(crop_label(t, where[l1], where[l2]))
    if not config.pairs:
        crops = [neutralize_labels(t)]
    if not crops:
        raise ForestError("no two configured label occurrences lie on different threads")
    constituents = []
    # operator crops of the br-joined label crops, one forest copy per operator
    for victim, crop in enumerate(crops):
        for addr in operator_addresses(crop):
            cut = crop.replace(addr, ActionTree(BOT))
            for i, other in enumerate(crops):
                constituents.append(Constituent(cut, i, addr) if i == victim else Constituent(other, i))
    constituents.extend(Constituent(c, i) for i, c in enumerate(crops))
    return Forest(tuple(crops), tuple(constituents))


__all__ = [
    "Constituent",
    "Forest",
    "ForestError",
    "br_join",
    "build_forest",
    "crop_label",
    "crop_operator",
    "flatten",
    "neutralize_labels",
    "operator_addresses",
]
