"""Action trees with their text format and well-formedness checks.

An action tree is a finite ranked tree over the symbols

    sp (2)   jo (1)   acqN (1)   relN (1)   lab L (0 or 1)   $ (0)   bot (0)

plus ``br`` (2), which only ever glues trees of a forest together.  Trees
are written in parenthesised prefix form, e.g.::

    (acq1 (sp (jo (rel1 ($))) (acq1 (rel1 ($)))))

Node addresses are tuples of 1-based child indices from the root.  A
spawn's first child continues the spawning thread; its second child is
the first action of the new thread.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence

Address = tuple[int, ...]

SPAWN = "sp"
JOIN = "jo"
ACQ = "acq"
REL = "rel"
LABEL = "lab"
TERM = "$"
BOT = "bot"
BR = "br"

_FIXED_ARITY = {SPAWN: 2, JOIN: 1, ACQ: 1, REL: 1, TERM: 0, BOT: 0, BR: 2}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class TreeError(ValueError):
    """Raised for malformed action trees or tree text."""


class TreeSyntaxError(TreeError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class CheckConfig:
    """Lock count, label universe and the label pairs to check."""

    lock_count: int
    labels: tuple[str, ...] = ()
    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.lock_count < 0:
            raise ValueError(f"lock count must be non-negative, got {self.lock_count}")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        for label in self.labels:
            if not _IDENT.match(label):
                raise ValueError(f"invalid label identifier {label!r}")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels")
        for pair in self.pairs:
            if len(pair) != 2:
                raise ValueError(f"pair must have two members: {pair!r}")
            for label in pair:
                if label not in self.labels:
                    raise ValueError(f"pair {pair[0]}:{pair[1]} references unknown label {label!r}")

    @property
    def locks(self) -> range:
        return range(1, self.lock_count + 1)


_SYMBOLS: dict[tuple[str, object], str] = {}


def _symbol_name(kind: str, arg) -> str:
    """Alphabet symbol name, e.g. ``acq1`` or ``lab:A`` (interned)."""
    key = (kind, arg)
    name = _SYMBOLS.get(key)
    if name is None:
        if kind in (ACQ, REL):
            name = f"{kind}{arg}"
        elif kind == LABEL:
            name = f"lab:{arg}"
        else:
            name = kind
        _SYMBOLS[key] = name
    return name


class ActionTree:
    """Immutable action-tree node.

    ``arg`` is the lock id for acquire/release, the label id for labels and
    ``None`` otherwise.  Equality is structural; the hash is computed once.
    """

    __slots__ = ("kind", "arg", "children", "symbol", "_hash", "_size")

    def __init__(self, kind: str, arg: int | str | None = None, children: Sequence[ActionTree] = ()):
        children = tuple(children)
        if kind == LABEL:
            if len(children) > 1:
                raise TreeError(f"label {arg} takes at most one child, got {len(children)}")
            if not isinstance(arg, str):
                raise TreeError("label needs a string id")
        elif kind in _FIXED_ARITY:
            if len(children) != _FIXED_ARITY[kind]:
                raise TreeError(f"{kind} takes {_FIXED_ARITY[kind]} children, got {len(children)}")
            if kind in (ACQ, REL):
                if not isinstance(arg, int) or isinstance(arg, bool) or arg < 1:
                    raise TreeError(f"{kind} needs a positive lock id, got {arg!r}")
            elif arg is not None:
                raise TreeError(f"{kind} takes no argument")
        else:
            raise TreeError(f"unknown symbol {kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "arg", arg)
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "symbol", _symbol_name(kind, arg))
        object.__setattr__(self, "_hash", hash((kind, arg, children)))
        object.__setattr__(self, "_size", 1 + sum(c._size for c in children))

    def __setattr__(self, name, value):
        raise AttributeError("ActionTree is immutable")

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, ActionTree):
            return NotImplemented
        return (
            self._hash == other._hash
            and self.kind == other.kind
            and self.arg == other.arg
            and self.children == other.children
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"ActionTree({serialize_tree(self)!r})"

    def __str__(self):
        return serialize_tree(self)

    def __len__(self):
        return self._size

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def subtree(self, address: Address) -> ActionTree:
        node = self
        for i in address:
            if not 1 <= i <= len(node.children):
                raise TreeError(f"address {format_address(address)} does not resolve")
            node = node.children[i - 1]
        return node

    def iter_nodes(self) -> Iterator[ActionTree]:
        """Preorder walk without addresses."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def nodes(self) -> Iterator[tuple[Address, ActionTree]]:
        """Preorder walk, first child before second."""
        stack: list[tuple[Address, ActionTree]] = [((), self)]
        while stack:
            addr, node = stack.pop()
            yield addr, node
            for i in range(len(node.children), 0, -1):
                stack.append((addr + (i,), node.children[i - 1]))

    def replace(self, address: Address, new: ActionTree) -> ActionTree:
        """Return a copy with the subtree at ``address`` replaced by ``new``."""
        if not address:
            return new
        i = address[0]
        if not 1 <= i <= len(self.children):
            raise TreeError(f"address {format_address(address)} does not resolve")
        children = list(self.children)
        children[i - 1] = children[i - 1].replace(address[1:], new)
        return ActionTree(self.kind, self.arg, children)


# constructors, mostly for tests and builders

def sp(parent: ActionTree, child: ActionTree) -> ActionTree:
    return ActionTree(SPAWN, None, (parent, child))


def jo(then: ActionTree) -> ActionTree:
    return ActionTree(JOIN, None, (then,))


def acq(lock: int, then: ActionTree) -> ActionTree:
    return ActionTree(ACQ, lock, (then,))


def rel(lock: int, then: ActionTree) -> ActionTree:
    return ActionTree(REL, lock, (then,))


def lab(label: str, then: ActionTree | None = None) -> ActionTree:
    return ActionTree(LABEL, label, () if then is None else (then,))


def term() -> ActionTree:
    return ActionTree(TERM)


def bot() -> ActionTree:
    return ActionTree(BOT)


def br(left: ActionTree, right: ActionTree) -> ActionTree:
    return ActionTree(BR, None, (left, right))


def format_address(address: Address) -> str:
    return ".".join(map(str, address)) if address else "ε"


# --- text format -------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokenize(text: str) -> list[tuple[str, int, int]]:
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
    tokens = []
    line = 0
    for m in _TOKEN.finditer(text):
        while line + 1 < len(line_starts) and line_starts[line + 1] <= m.start():
            line += 1
        tokens.append((m.group(), line + 1, m.start() - line_starts[line] + 1))
    return tokens


def _eof_position(text: str) -> tuple[int, int]:
    lines = text.split("\n")
    return len(lines), len(lines[-1]) + 1


def parse_tree(text: str, config: CheckConfig | None = None) -> ActionTree:
    """Parse a tree in parenthesised prefix notation.

    With a ``config``, lock ids must lie in ``1..lock_count`` and labels
    must be declared.  Labels accept zero or one child.
    """
    tokens = _tokenize(text)
    pos = 0

    def error(msg: str, at: int | None = None):
        if at is None or at >= len(tokens):
            line, col = _eof_position(text)
        else:
            _, line, col = tokens[at]
        raise TreeSyntaxError(msg, line, col)

    def read_symbol() -> tuple[str, int | str | None]:
        nonlocal pos
        if pos >= len(tokens):
            error("unexpected end of input, expected a symbol")
        word = tokens[pos][0]
        at = pos
        if word in "()":
            error(f"expected a symbol, got {word!r}", at)
        pos += 1
        if word in (SPAWN, JOIN, BR, TERM, BOT):
            return word, None
        m = re.fullmatch(r"(acq|rel)(\d*)", word)
        if m:
            digits = m.group(2)
            if not digits:
                if pos < len(tokens) and tokens[pos][0].isdigit():
                    digits = tokens[pos][0]
                    pos += 1
                else:
                    error(f"{word} needs a lock id", at)
            return m.group(1), int(digits)
        if word == LABEL:
            if pos >= len(tokens) or not _IDENT.match(tokens[pos][0]):
                error("lab needs an identifier", at)
            pos += 1
            return LABEL, tokens[pos - 1][0]
        error(f"unknown symbol {word!r}", at)

    # frames: [kind, arg, token index of the symbol, children]
    stack: list[list] = []
    result = None
    if not tokens:
        error("empty input")
    while True:
        if pos >= len(tokens):
            error("unbalanced parentheses: missing ')'")
        tok = tokens[pos][0]
        if tok == "(":
            if result is not None and not stack:
                error(f"trailing input {tok!r}", pos)
            pos += 1
            sym_at = pos
            kind, arg = read_symbol()
            stack.append([kind, arg, sym_at, []])
        elif tok == ")":
            if not stack:
                error("unbalanced parentheses: unexpected ')'", pos)
            kind, arg, sym_at, children = stack.pop()
            pos += 1
            try:
                node = ActionTree(kind, arg, children)
            except TreeError as exc:
                error(f"arity mismatch: {exc}", sym_at)
            if config is not None:
                if kind in (ACQ, REL) and arg > config.lock_count:
                    error(f"unknown lock {arg} (lock count is {config.lock_count})", sym_at)
                if kind == LABEL and arg not in config.labels:
                    error(f"unknown label {arg!r}", sym_at)
            if stack:
                stack[-1][3].append(node)
            else:
                result = node
                break
        else:
            error(f"unexpected token {tok!r}", pos)
    if pos != len(tokens):
        error(f"trailing input {tokens[pos][0]!r}", pos)
    _check_br_prefix(result)
    return result


def serialize_tree(tree: ActionTree) -> str:
    out: list[str] = []
    stack: list[ActionTree | str] = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        if item.kind in (ACQ, REL):
            head = f"({item.kind}{item.arg}"
        elif item.kind == LABEL:
            head = f"(lab {item.arg}"
        else:
            head = f"({item.kind}"
        out.append(head)
        stack.append(")")
        for child in reversed(item.children):
            stack.append(child)
            stack.append(" ")
    return "".join(out)


def _check_br_prefix(tree: ActionTree) -> None:
    """br may only occur on the forest spine, never below another symbol."""
    stack = [(tree, True)]
    while stack:
        node, on_spine = stack.pop()
        if node.kind == BR and not on_spine:
            raise TreeError("br below a non-br node")
        for child in node.children:
            stack.append((child, on_spine and node.kind == BR))


# --- addressing and threads ---------------------------------------------------

def descendant(t: ActionTree, a: Address, b: Address) -> bool:
    """True iff the node at ``a`` is an ancestor-or-self of the node at ``b``."""
    t.subtree(a)
    t.subtree(b)
    return b[: len(a)] == a


def threads(t: ActionTree) -> list[list[Address]]:
    """Root-to-leaf branches, one per leaf, in preorder of the leaves."""
    result = []
    for addr, node in t.nodes():
        if node.is_leaf:
            result.append([addr[:i] for i in range(len(addr) + 1)])
    return result


def own_segment(branch: Sequence[Address]) -> list[Address]:
    """The part of a branch executed by the thread owning its leaf.

    A thread starts at the root or at the second child of a spawn.
    """
    start = 0
    for i, addr in enumerate(branch):
        if addr and addr[-1] == 2:
            start = i
    return list(branch[start:])


def thread_kinds(t: ActionTree, branch: Sequence[Address]) -> list[ActionTree]:
    return [t.subtree(a) for a in own_segment(branch)]


def locking_sequence(branch: Sequence[ActionTree]) -> list[tuple[str, int]]:
    """Keep only the acquire/release actions of a thread, as ``(kind, lock)``."""
    return [(n.kind, n.arg) for n in branch if n.kind in (ACQ, REL)]


def _locks_ok(seq: Sequence[tuple[str, int]], k: int) -> tuple[bool, list[int]]:
    held: list[int] = []
    for kind, lock in seq:
        if not 1 <= lock <= k:
            return False, held
        if kind == ACQ:
            if lock in held:
                return False, held
            held.append(lock)
        else:
            if not held or held[-1] != lock:
                return False, held
            held.pop()
    return True, held


def is_lock_well_formed(t: ActionTree, k: int) -> bool:
    """Every thread's locking sequence is nested and respects locks."""
    for branch in threads(t):
        ok, _ = _locks_ok(locking_sequence(thread_kinds(t, branch)), k)
        if not ok:
            return False
    return True


def is_join_lock_well_formed(t: ActionTree, k: int) -> bool:
    """Lock-well-formed, and every thread ending in ``$`` holds no lock."""
    for branch in threads(t):
        own = thread_kinds(t, branch)
        ok, held = _locks_ok(locking_sequence(own), k)
        if not ok:
            return False
        if own[-1].kind == TERM and held:
            return False
    # nothing can follow $: it has arity 0 by construction
    return True


def ranked_alphabet(config: CheckConfig, with_br: bool = False) -> dict[str, int]:
    alphabet = {SPAWN: 2, JOIN: 1, TERM: 0, BOT: 0}
    for label in config.labels:
        alphabet[f"lab:{label}"] = 0
    for i in config.locks:
        alphabet[f"acq{i}"] = 1
        alphabet[f"rel{i}"] = 1
    if with_br:
        alphabet[BR] = 2
    return alphabet


def labels_in(t: ActionTree) -> set[str]:
    return {n.arg for n in t.iter_nodes() if n.kind == LABEL}


def max_lock(t: ActionTree) -> int:
    return max((n.arg for n in t.iter_nodes() if n.kind in (ACQ, REL)), default=0)
