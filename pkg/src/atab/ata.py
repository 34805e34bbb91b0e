"""Alternating tree automata over ranked alphabets.

Transitions map ``(state, symbol)`` to positive boolean formulas over atoms
``(i, q)`` meaning "child ``i`` is accepted from state ``q``".  All inputs
are finite trees, so the trivial Büchi condition never comes into play and
acceptance is plain formula evaluation from the leaves up.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .tree import BR, ActionTree, Address


class AtaError(ValueError):
    """Raised for malformed automata or automaton text."""


# --- formulas -----------------------------------------------------------------

def _natural_key(name: str):
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in re.split(r"(\d+)", name) if p)


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Atom:
    child: int
    state: str

    def __str__(self):
        return f"({self.child},{self.state})"


@dataclass(frozen=True)
class And:
    terms: tuple

    def __str__(self):
        return " /\\ ".join(_wrap(t, Or) for t in self.terms)


@dataclass(frozen=True)
class Or:
    terms: tuple

    def __str__(self):
        return " \\/ ".join(str(t) for t in self.terms)


Formula = Const | Atom | And | Or


def _wrap(f, kind) -> str:
    return f"({f})" if isinstance(f, kind) else str(f)


def _sort_key(f):
    if isinstance(f, Atom):
        return (0, f.child, _natural_key(f.state), "")
    return (1 if isinstance(f, And) else 2, 0, (), str(f))


def _combine(kind, unit: Const, zero: Const, parts: Iterable) -> Formula:
    flat: list = []
    stack = list(parts)[::-1]
    while stack:
        p = stack.pop()
        if isinstance(p, kind):
            stack.extend(reversed(p.terms))
        elif p == zero:
            return zero
        elif p != unit:
            flat.append(p)
    unique = sorted(set(flat), key=_sort_key)
    if not unique:
        return unit
    if len(unique) == 1:
        return unique[0]
    return kind(tuple(unique))


def conj(*parts: Formula) -> Formula:
    """Canonical conjunction: flattened, units dropped, deduplicated, sorted."""
    return _combine(And, TRUE, FALSE, parts)


def disj(*parts: Formula) -> Formula:
    return _combine(Or, FALSE, TRUE, parts)


def atom(child: int, state: str) -> Atom:
    return Atom(child, state)


def canonical(f: Formula) -> Formula:
    if isinstance(f, And):
        return conj(*(canonical(t) for t in f.terms))
    if isinstance(f, Or):
        return disj(*(canonical(t) for t in f.terms))
    return f


def atoms(f: Formula) -> set[Atom]:
    if isinstance(f, Atom):
        return {f}
    if isinstance(f, (And, Or)):
        out: set[Atom] = set()
        for t in f.terms:
            out |= atoms(t)
        return out
    return set()


def rename(f: Formula, mapping: Mapping[str, str]) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.child, mapping.get(f.state, f.state))
    if isinstance(f, And):
        return conj(*(rename(t, mapping) for t in f.terms))
    if isinstance(f, Or):
        return disj(*(rename(t, mapping) for t in f.terms))
    return f


def eval_formula(f: Formula, lookup) -> bool:
    """Evaluate with ``lookup(child, state) -> bool`` for atoms."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Atom):
        return lookup(f.child, f.state)
    if isinstance(f, And):
        return all(eval_formula(t, lookup) for t in f.terms)
    return any(eval_formula(t, lookup) for t in f.terms)


# --- automata -----------------------------------------------------------------

_STATE = re.compile(r"[A-Za-z_][A-Za-z0-9_.:\-]*\Z")
_SYMBOL = re.compile(r"[^\s]+\Z")


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    witness: dict[tuple[Address, str], bool] | None = None

    def __bool__(self):
        return self.accepted


@dataclass(frozen=True, eq=False)
class Ata:
    """Alphabet, states, start state and transition table.

    ``delta`` only stores rules that are not ``false``; every other
    ``(state, symbol)`` pair maps to ``false``.
    """

    alphabet: Mapping[str, int]
    states: tuple[str, ...]
    start: str
    delta: Mapping[tuple[str, str], Formula]
    _compiled: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        alphabet = dict(sorted(self.alphabet.items()))
        states = tuple(sorted(set(self.states)))
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "states", states)
        known = set(states)
        for name in states:
            if not _STATE.match(name):
                raise AtaError(f"invalid state name {name!r}")
        for sym, arity in alphabet.items():
            if not _SYMBOL.match(sym) or sym.endswith(":") or arity < 0:
                raise AtaError(f"invalid alphabet entry {sym!r} {arity}")
        if self.start not in known:
            raise AtaError(f"start state {self.start!r} is not declared")
        delta = {}
        for (q, sym), f in self.delta.items():
            if q not in known:
                raise AtaError(f"rule for undeclared state {q!r}")
            if sym not in alphabet:
                raise AtaError(f"rule for symbol {sym!r} outside the alphabet")
            f = canonical(f)
            for a in atoms(f):
                if not 1 <= a.child <= alphabet[sym]:
                    raise AtaError(f"rule {q} {sym}: child {a.child} exceeds arity {alphabet[sym]}")
                if a.state not in known:
                    raise AtaError(f"rule {q} {sym}: undeclared state {a.state!r}")
            if f != FALSE:
                delta[(q, sym)] = f
        object.__setattr__(self, "delta", dict(sorted(delta.items())))

    def rule(self, state: str, symbol: str) -> Formula:
        if symbol not in self.alphabet:
            raise AtaError(f"symbol {symbol!r} is not in the alphabet")
        return self.delta.get((state, symbol), FALSE)

    def row(self, state: str) -> dict[str, Formula]:
        return {sym: f for (q, sym), f in self.delta.items() if q == state}

    @property
    def transition_count(self) -> int:
        """Number of ``(state, symbol)`` pairs whose rule is not ``false``."""
        return len(self.delta)

    def __eq__(self, other):
        if not isinstance(other, Ata):
            return NotImplemented
        return (self.alphabet, self.states, self.start, self.delta) == (
            other.alphabet, other.states, other.start, other.delta)

    def __hash__(self):
        return hash((self.start, self.states, tuple(self.delta.items())))

    # -- compiled bottom-up evaluation ---------------------------------------

    def _symbol_function(self, symbol: str):
        """Map children's accepted-state bitmasks to this node's bitmask.

        Each symbol's rules are compiled once into a Python function; this
        is what keeps the exhaustive oracle comparison fast.
        """
        fn = self._compiled.get(symbol)
        if fn is not None:
            return fn
        bit = {q: i for i, q in enumerate(self.states)}

        def emit(f) -> str:
            if isinstance(f, Const):
                return "True" if f.value else "False"
            if isinstance(f, Atom):
                return f"(c{f.child} >> {bit[f.state]} & 1)"
            op = " and " if isinstance(f, And) else " or "
            return "(" + op.join(emit(t) for t in f.terms) + ")"

        arity = self.alphabet[symbol]
        lines = [f"def f({', '.join(f'c{i}' for i in range(1, arity + 1))}):", "    r = 0"]
        for q in self.states:
            rule = self.delta.get((q, symbol))
            if rule is None:
                continue
            if rule == TRUE:
                lines.append(f"    r |= {1 << bit[q]}")
            else:
                lines.append(f"    if {emit(rule)}: r |= {1 << bit[q]}")
        lines.append("    return r")
        namespace: dict = {}
        exec("\n".join(lines), namespace)  # noqa: S102 - generated from validated rules
        fn = namespace["f"]
        self._compiled[symbol] = fn
        return fn

    def state_mask(self, state: str) -> int:
        return 1 << self.states.index(state)


class Evaluator:
    """Bottom-up evaluation with a memo keyed by (structural) subtree.

    For every node it records the set of states accepting that subtree, so
    the memo plays the role of the (state, node) table.  A single evaluator
    may be reused across many trees; identical subtrees are evaluated once.
    """

    def __init__(self, ata: Ata, cache_limit: int | None = None):
        self.ata = ata
        self.cache: dict[ActionTree, int] = {}
        self.cache_limit = cache_limit
        self._start = ata.state_mask(ata.start)
        self._fns: dict = {}

    def _function(self, node: ActionTree):
        fn = self._fns.get(node.symbol)
        if fn is None:
            arity = self.ata.alphabet.get(node.symbol)
            if arity is None:
                raise AtaError(f"symbol {node.symbol!r} is not in the alphabet")
            fn = self.ata._symbol_function(node.symbol)
            self._fns[node.symbol] = fn
        return fn

    def accepting_states(self, t: ActionTree) -> int:
        cache = self.cache
        got = cache.get(t)
        if got is not None:
            return got
        # common case: every child is already known
        try:
            masks = [cache[c] for c in t.children]
        except KeyError:
            pass
        else:
            if len(masks) == self.ata.alphabet.get(t.symbol, -1):
                got = cache[t] = self._function(t)(*masks)
                return got
        ata = self.ata
        stack = [(t, False)]
        while stack:
            node, ready = stack.pop()
            if node in cache:
                continue
            if not ready:
                stack.append((node, True))
                for c in node.children:
                    if c not in cache:
                        stack.append((c, False))
                continue
            symbol = node.symbol
            arity = ata.alphabet.get(symbol)
            if arity is None:
                raise AtaError(f"symbol {symbol!r} is not in the alphabet")
            if arity != len(node.children):
                raise AtaError(f"symbol {symbol!r} has arity {arity}, node has {len(node.children)} children")
            fn = ata._symbol_function(symbol)
            cache[node] = fn(*(cache[c] for c in node.children))
        result = cache[t]
        if self.cache_limit is not None and len(cache) > self.cache_limit:
            cache.clear()
        return result

    def accepts(self, t: ActionTree, state: str | None = None) -> bool:
        mask = self._start if state is None else self.ata.state_mask(state)
        return bool(self.accepting_states(t) & mask)

    def states_of(self, t: ActionTree) -> set[str]:
        mask = self.accepting_states(t)
        return {q for i, q in enumerate(self.ata.states) if mask >> i & 1}


def evaluate(a: Ata, t: ActionTree, witness: bool = False) -> Verdict:
    """Decide whether ``a`` accepts the finite tree ``t``.

    With ``witness=True`` the verdict carries the full evaluation table
    ``(address, state) -> bool``.
    """
    ev = Evaluator(a)
    accepted = ev.accepts(t)
    table = None
    if witness:
        table = {}
        for addr, node in t.nodes():
            mask = ev.cache[node]
            for i, q in enumerate(a.states):
                table[(addr, q)] = bool(mask >> i & 1)
    return Verdict(accepted, table)


def evaluate_naive(a: Ata, t: ActionTree, state: str | None = None) -> bool:
    """Direct top-down evaluation without memoization (reference semantics)."""
    q = a.start if state is None else state
    f = a.rule(q, t.symbol)
    if a.alphabet[t.symbol] != len(t.children):
        raise AtaError(f"symbol {t.symbol!r} arity mismatch")
    return eval_formula(f, lambda i, p: evaluate_naive(a, t.children[i - 1], p))


# --- combinators ---------------------------------------------------------------

def _fresh(name: str, taken: set[str]) -> str:
    if name not in taken:
        return name
    i = 2
    while f"{name}_{i}" in taken:
        i += 1
    return f"{name}_{i}"


def _mergeable(a: Ata, b: Ata) -> set[str]:
    """States of ``b`` that may be identified with the same-named state of ``a``.

    A state qualifies when its rows agree and every state it refers to also
    qualifies (a greatest fixpoint), so merging never changes a language.
    """
    cand = {q for q in b.states if q in set(a.states) and a.row(q) == b.row(q)}
    changed = True
    while changed:
        changed = False
        for q in list(cand):
            refs = {x.state for f in b.row(q).values() for x in atoms(f)}
            if not refs <= cand:
                cand.discard(q)
                changed = True
    return cand


def _union(automata: list[Ata]) -> tuple[dict, dict, list[str]]:
    """Disjoint union up to sharing of identical sub-automata.

    Returns the merged delta, the merged state set and each automaton's
    (possibly renamed) start state.
    """
    alphabet = automata[0].alphabet
    for other in automata[1:]:
        if other.alphabet != alphabet:
            raise AtaError("alphabets differ")
    delta: dict = {}
    states: set[str] = set()
    starts: list[str] = []
    acc: Ata | None = None
    for b in automata:
        if acc is None:
            mapping = {q: q for q in b.states}
        else:
            shared = _mergeable(acc, b)
            taken = set(states) | set(b.states)
            mapping = {}
            for q in b.states:
                if q in shared or q not in states:
                    mapping[q] = q
                else:
                    mapping[q] = _fresh(q, taken)
                    taken.add(mapping[q])
        for (q, sym), f in b.delta.items():
            delta[(mapping[q], sym)] = rename(f, mapping)
        states |= set(mapping.values())
        starts.append(mapping[b.start])
        acc = Ata(alphabet, tuple(states), starts[0], delta)
    return delta, states, starts


def _combine_automata(automata: list[Ata], op, start_name: str) -> Ata:
    if not automata:
        raise AtaError("nothing to combine")
    delta, states, starts = _union(automata)
    alphabet = automata[0].alphabet
    top = _fresh(start_name, states)
    for sym in alphabet:
        f = op(*(delta.get((s, sym), FALSE) for s in starts))
        if f != FALSE:
            delta[(top, sym)] = f
    return Ata(alphabet, tuple(states | {top}), top, delta)


def conjoin(a: Ata, b: Ata, start: str = "top") -> Ata:
    return _combine_automata([a, b], conj, start)


def disjoin(a: Ata, b: Ata, start: str = "top") -> Ata:
    return _combine_automata([a, b], disj, start)


def conjoin_all(automata: list[Ata], start: str = "top") -> Ata:
    return _combine_automata(list(automata), conj, start)


def disjoin_all(automata: list[Ata], start: str = "top") -> Ata:
    return _combine_automata(list(automata), disj, start)


def lift_over_br(a: Ata, state: str = "q_br") -> Ata:
    """Accept a br-joined forest iff ``a`` accepts every constituent."""
    if BR in a.alphabet:
        raise AtaError("alphabet already contains br")
    alphabet = dict(a.alphabet)
    alphabet[BR] = 2
    q_br = _fresh(state, set(a.states))
    delta = dict(a.delta)
    delta[(q_br, BR)] = conj(Atom(1, a.start), Atom(2, q_br))
    for sym in a.alphabet:
        f = a.delta.get((a.start, sym))
        if f is not None:
            delta[(q_br, sym)] = f
    return Ata(alphabet, a.states + (q_br,), q_br, delta)


def trim(a: Ata) -> Ata:
    """Drop states unreachable from the start state."""
    seen = {a.start}
    todo = [a.start]
    by_state: dict[str, list[Formula]] = {}
    for (q, _), f in a.delta.items():
        by_state.setdefault(q, []).append(f)
    while todo:
        q = todo.pop()
        for f in by_state.get(q, ()):
            for x in atoms(f):
                if x.state not in seen:
                    seen.add(x.state)
                    todo.append(x.state)
    delta = {k: f for k, f in a.delta.items() if k[0] in seen}
    return Ata(a.alphabet, tuple(seen), a.start, delta)


def constant(alphabet: Mapping[str, int], value: bool, state: str = "q") -> Ata:
    """The automaton accepting every tree (``True``) or none."""
    delta = {}
    if value:
        for sym, arity in alphabet.items():
            delta[(state, sym)] = conj(*(Atom(i, state) for i in range(1, arity + 1)))
    return Ata(alphabet, (state,), state, delta)


# --- text format ----------------------------------------------------------------

def serialize(a: Ata) -> str:
    lines = ["alphabet:"]
    lines += [f"  {sym} {arity}" for sym, arity in a.alphabet.items()]
    lines.append("states: " + " ".join(a.states))
    lines.append(f"start: {a.start}")
    lines.append("rules:")
    lines += [f"  {q} {sym} -> {f}" for (q, sym), f in a.delta.items()]
    return "\n".join(lines) + "\n"


_FTOKEN = re.compile(r"\s*(/\\|\\/|\(|\)|,|[^\s(),/\\]+)")


def parse_formula(text: str) -> Formula:
    tokens: list[str] = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _FTOKEN.match(text, pos)
        if not m:
            raise AtaError(f"cannot tokenize formula at {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else None

    def take(expected=None):
        nonlocal i
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise AtaError(f"expected {expected or 'a token'} in formula {text!r}, got {tok!r}")
        i += 1
        return tok

    def parse_or():
        parts = [parse_and()]
        while peek() == "\\/":
            take()
            parts.append(parse_and())
        return disj(*parts) if len(parts) > 1 else parts[0]

    def parse_and():
        parts = [parse_primary()]
        while peek() == "/\\":
            take()
            parts.append(parse_primary())
        return conj(*parts) if len(parts) > 1 else parts[0]

    def parse_primary():
        tok = take()
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok != "(":
            raise AtaError(f"unexpected {tok!r} in formula {text!r}")
        if peek() is not None and peek().isdigit() and i + 1 < len(tokens) and tokens[i + 1] == ",":
            child = int(take())
            take(",")
            state = take()
            if not _STATE.match(state):
                raise AtaError(f"invalid state name {state!r}")
            take(")")
            return Atom(child, state)
        inner = parse_or()
        take(")")
        return inner

    f = parse_or()
    if i != len(tokens):
        raise AtaError(f"trailing tokens in formula {text!r}")
    return canonical(f)


def parse_ata(text: str) -> Ata:
    alphabet: dict[str, int] = {}
    states: list[str] | None = None
    start: str | None = None
    delta: dict = {}
    section = None
    seen_alphabet = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line == "alphabet:":
                section = "alphabet"
                seen_alphabet = True
            elif line.startswith("states:"):
                states = line[len("states:"):].split()
                section = None
            elif line.startswith("start:"):
                start = line[len("start:"):].strip()
                section = None
            elif line == "rules:":
                section = "rules"
            elif section == "rules" and "->" in line:
                lhs, rhs = line.split("->", 1)
                parts = lhs.split()
                if len(parts) != 2:
                    raise AtaError("rule needs 'state symbol -> formula'")
                key = (parts[0], parts[1])
                if key in delta:
                    raise AtaError(f"duplicate rule {parts[0]} {parts[1]}")
                delta[key] = parse_formula(rhs)
            elif section == "alphabet":
                parts = line.split()
                if len(parts) != 2 or not parts[1].isdigit():
                    raise AtaError("alphabet entries are 'symbol arity'")
                alphabet[parts[0]] = int(parts[1])
            else:
                raise AtaError(f"unexpected line {line!r}")
        except AtaError as exc:
            raise AtaError(f"line {lineno}: {exc}") from None
    if not seen_alphabet or states is None or start is None:
        raise AtaError("missing 'alphabet:', 'states:' or 'start:' header")
    return Ata(alphabet, tuple(states), start, delta)
