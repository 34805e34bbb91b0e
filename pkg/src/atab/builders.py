"""Widget automata and the assembled safety automaton.

Every builder returns an :class:`~atab.ata.Ata` over the alphabet of a
:class:`~atab.tree.CheckConfig`.  State names carry the lock or label they
are specialised to, so widgets for different parameters can be combined
without clashes while parameter-free helpers (such as ``dep_fa_1``) are shared.

A widget *accepts* a tree that has its property.  The full automaton
accepts exactly the safe trees: those that cannot be scheduled, or in
which no configured label pair is reachable at once.
"""

from __future__ import annotations

from itertools import product
from typing import Callable

from .ata import (
    FALSE,
    TRUE,
    Ata,
    Atom,
    Formula,
    conj,
    conjoin_all,
    constant,
    disj,
    disjoin_all,
    lift_over_br,
    trim,
)
from .tree import ACQ, BOT, JOIN, LABEL, REL, SPAWN, TERM, CheckConfig, ranked_alphabet


def _a(child: int, state: str) -> Atom:
    return Atom(child, state)


def _lock(config: CheckConfig, x: int) -> int:
    if not 1 <= x <= config.lock_count:
        raise ValueError(f"lock {x} is outside 1..{config.lock_count}")
    return x


def _label(config: CheckConfig, label: str) -> str:
    if label not in config.labels:
        raise ValueError(f"unknown label {label!r}")
    return label


def _kind(symbol: str) -> tuple[str, int | str | None]:
    if symbol.startswith("lab:"):
        return LABEL, symbol[4:]
    for k in (ACQ, REL):
        if symbol.startswith(k) and symbol[len(k):].isdigit():
            return k, int(symbol[len(k):])
    return symbol, None


def _make(config: CheckConfig, start: str, rows: dict[str, Callable[[str, int | str | None], Formula]]) -> Ata:
    """Build an automaton from per-state functions ``(kind, arg) -> formula``."""
    alphabet = ranked_alphabet(config)
    delta = {}
    for state, fn in rows.items():
        for sym in alphabet:
            f = fn(*_kind(sym))
            if f != FALSE:
                delta[(state, sym)] = f
    return Ata(alphabet, tuple(rows), start, delta)


def _thread(state: str, on_spawn: Formula | None = None, leaves: bool = False,
            acq: dict | None = None, rel: dict | None = None, jo: Formula | None = None):
    """A row that walks one thread: unary actions pass ``state`` to child 1.

    ``acq``/``rel`` override the rule for specific locks, ``on_spawn`` and
    ``jo`` override spawn and join, ``leaves`` is the value at every leaf.
    """
    acq = acq or {}
    rel = rel or {}
    default = _a(1, state)

    def row(kind, arg):
        if kind == SPAWN:
            return default if on_spawn is None else on_spawn
        if kind == JOIN:
            return default if jo is None else jo
        if kind == ACQ:
            return acq.get(arg, default)
        if kind == REL:
            return rel.get(arg, default)
        # leaves: $, bot, labels
        return TRUE if leaves else FALSE

    return row


# --- double final acquisition ------------------------------------------------------

def build_final_acq(x: int, config: CheckConfig) -> Ata:
    """Finally-acquires automaton with its literal transition set.

    The spawn rule of the released state demands that *both* subtrees
    finally acquire x, so on its own this accepts only trees where every
    thread ends holding x.
    """
    _lock(config, x)
    qr, qa = f"fa_qr_{x}", f"fa_qa_{x}"
    return _make(config, qr, {
        qr: _thread(qr, on_spawn=conj(_a(1, qr), _a(2, qr)), acq={x: _a(1, qa)}, rel={x: FALSE}),
        qa: _thread(qa, on_spawn=conj(_a(1, qa), _a(2, qr)), leaves=True, acq={x: FALSE}, rel={x: _a(1, qr)}),
    })


def build_spawn_pair(config: CheckConfig) -> Ata:
    """Accepts trees containing a spawn, hence two distinct threads.

    ``s_q1`` accepts every tree, so the search state ``s_q2`` is the start.
    """
    q2, q1 = "s_q2", "s_q1"
    return _make(config, q2, {
        q2: _thread(q2, on_spawn=disj(_a(1, q2), _a(2, q2), conj(_a(1, q1), _a(2, q1)))),
        q1: _thread(q1, on_spawn=conj(_a(1, q1), _a(2, q1)), leaves=True),
    })


def build_dfa(x: int, config: CheckConfig) -> Ata:
    """Two distinct threads terminate holding lock x.

    ``*2`` states still need two holders below, ``*1`` states need one; the
    ``r``/``a`` letter records whether the current thread holds x.
    """
    _lock(config, x)
    r2, a2, r1, a1 = (f"dfa_{s}_{x}" for s in ("qr2", "qa2", "qr1", "qa1"))
    return _make(config, r2, {
        r2: _thread(r2, on_spawn=disj(_a(1, r2), _a(2, r2), conj(_a(1, r1), _a(2, r1))),
                    acq={x: _a(1, a2)}, rel={x: FALSE}),
        a2: _thread(a2, on_spawn=disj(_a(1, a2), _a(2, r2), conj(_a(1, a1), _a(2, r1))),
                    acq={x: FALSE}, rel={x: _a(1, r2)}),
        r1: _thread(r1, on_spawn=disj(_a(1, r1), _a(2, r1)), acq={x: _a(1, a1)}, rel={x: FALSE}),
        a1: _thread(a1, on_spawn=disj(_a(1, a1), _a(2, r1)), leaves=True,
                    acq={x: FALSE}, rel={x: _a(1, r1)}),
    })


# --- child termination ----------------------------------------------------------------

def build_child_term(config: CheckConfig) -> Ata:
    """A thread joins after spawning a child that never executes ``$``."""
    b0, bjo, bbot = "ct_b0", "ct_jo", "ct_bot"

    return _make(config, b0, {
        b0: _thread(b0, on_spawn=disj(_a(1, b0), _a(2, b0), conj(_a(1, bjo), _a(2, bbot)))),
        bjo: _thread(bjo, jo=TRUE),
        bbot: _child_bot_row(bbot),
    })


def _is_leaf(kind: str) -> bool:
    return kind in (TERM, BOT, LABEL)


def _child_bot_row(state: str):
    """Some thread of the spawned subtree stops without executing ``$``."""

    def row(kind, arg):
        if kind == TERM:
            return FALSE
        if kind in (BOT, LABEL):
            return TRUE
        if kind == SPAWN:
            return disj(_a(1, state), _a(2, state))
        return _a(1, state)

    return row


# --- join-lock dependence ----------------------------------------------------------------

def build_join_lock(x: int, config: CheckConfig) -> Ata:
    """A thread holds x over a spawn and joins before releasing x, while some
    thread of the spawned subtree acquires x (the join waits for all of them)."""
    _lock(config, x)
    br, ba, keep, use = f"jl_br_{x}", f"jl_ba_{x}", f"jl_keep_{x}", f"jl_use_{x}"
    return _make(config, br, {
        br: _thread(br, on_spawn=disj(_a(1, br), _a(2, br)), acq={x: _a(1, ba)}, rel={x: FALSE}),
        ba: _thread(ba, on_spawn=disj(_a(1, ba), _a(2, br), conj(_a(1, keep), _a(2, use))),
                    acq={x: FALSE}, rel={x: _a(1, br)}),
        keep: _thread(keep, jo=TRUE, rel={x: FALSE}),
        use: _thread(use, on_spawn=disj(_a(1, use), _a(2, use)), acq={x: TRUE}),
    })


# --- lock dependency and cycles ------------------------------------------------------------

def _dep(x: int, y: int) -> str:
    return f"dep_{x}_{y}"


def _dependency_rows(config: CheckConfig) -> dict:
    """Rows for every ``dep_x_y`` plus the shared helper states.

    ``dep_x_y``: somewhere in this subtree lock x is finally acquired and,
    below that acquisition, y is acquired (directly), or some lock b is
    acquired and b in turn depends on y (indirectly).  At a spawn the chain
    may also split, one segment per side, through an intermediate lock z.
    """
    locks = list(config.locks)
    rows = {}
    for a in locks:
        fa, ac = f"dep_fa_{a}", f"dep_acq_{a}"
        # thread keeps a until its leaf
        rows[fa] = _thread(fa, leaves=True, rel={a: FALSE})
        # some acq_a anywhere in the subtree
        rows[ac] = _thread(ac, on_spawn=disj(_a(1, ac), _a(2, ac)), acq={a: TRUE})
    for x, y in product(locks, repeat=2):
        me = _dep(x, y)
        split = []
        for z in locks:
            if z in (x, y):
                continue
            split.append(conj(_a(1, _dep(x, z)), _a(2, _dep(z, y))))
            split.append(conj(_a(2, _dep(x, z)), _a(1, _dep(z, y))))
        on_spawn = disj(_a(1, me), _a(2, me), *split)
        later = [_a(1, f"dep_acq_{y}")]
        later += [conj(_a(1, f"dep_acq_{b}"), _a(1, _dep(b, y))) for b in locks if b not in (x, y)]
        on_acq = disj(_a(1, me), conj(_a(1, f"dep_fa_{x}"), disj(*later)))
        rows[me] = _thread(me, on_spawn=on_spawn, acq={x: on_acq})
    return rows


def build_depends_on(x: int, y: int, config: CheckConfig) -> Ata:
    _lock(config, x)
    _lock(config, y)
    return trim(_make(config, _dep(x, y), _dependency_rows(config)))


def build_cycle_check(config: CheckConfig) -> Ata:
    """Some lock depends on itself."""
    rows = _dependency_rows(config)
    start = "cyc"
    entry = [f"dep_{x}_{x}" for x in config.locks]
    rows[start] = lambda kind, arg: disj(*(rows[e](kind, arg) for e in entry))
    return trim(_make(config, start, rows))


# --- pairwise reachability --------------------------------------------------------------------

def build_pair_reach(l1: str, l2: str, config: CheckConfig) -> Ata:
    """Rejects trees where one spawn separates a thread reaching ``l1`` from
    a thread reaching ``l2``; accepts every other tree."""
    _label(config, l1)
    _label(config, l2)
    q2 = f"pr_q2_{l1}_{l2}" if l1 != l2 else f"pr_q2_{l1}"
    free1, free2 = f"pr_q1_{l1}", f"pr_q1_{l2}"
    separated = conj(disj(_a(1, free1), _a(2, free2)), disj(_a(1, free2), _a(2, free1)))

    def q2_row(kind, arg):
        if kind == SPAWN:
            return conj(_a(1, q2), _a(2, q2), separated)
        if _is_leaf(kind):
            return TRUE
        return _a(1, q2)

    def free(label):
        state = f"pr_q1_{label}"

        def row(kind, arg):
            if kind == SPAWN:
                return conj(_a(1, state), _a(2, state))
            if kind == LABEL:
                return FALSE if arg == label else TRUE
            if _is_leaf(kind):
                return TRUE
            return _a(1, state)

        return row

    rows = {q2: q2_row, free1: free(l1)}
    rows[free2] = free(l2)
    return _make(config, q2, rows)


# --- assembly -------------------------------------------------------------------------------------

def build_unschedulable(config: CheckConfig) -> Ata:
    """Disjunction of every unschedulability widget."""
    parts = []
    if config.lock_count:
        parts.append(build_cycle_check(config))
        parts += [build_join_lock(x, config) for x in config.locks]
        parts += [build_dfa(x, config) for x in config.locks]
    parts.append(build_child_term(config))
    return trim(disjoin_all(parts, start="unsched"))


def build_safe_tree(config: CheckConfig) -> Ata:
    """Single-tree safety automaton (no br)."""
    parts = list(_widgets(config))
    if config.pairs:
        seen = []
        for pair in config.pairs:
            key = tuple(sorted(pair))
            if key not in seen:
                seen.append(key)
        reach = [build_pair_reach(a, b, config) for a, b in seen]
        parts.append(reach[0] if len(reach) == 1 else conjoin_all(reach, start="reach"))
    else:
        # no pair can ever be reached
        parts.append(constant(ranked_alphabet(config), True, state="all"))
    return trim(disjoin_all(parts, start="safe"))


def _widgets(config: CheckConfig):
    for _, widget in named_widgets(config):
        yield widget


def named_widgets(config: CheckConfig) -> list[tuple[str, Ata]]:
    """The unschedulability widgets of the safety automaton with CLI names."""
    out = []
    if config.lock_count:
        out.append(("cycle", build_cycle_check(config)))
        out += [(f"joinlock:{x}", build_join_lock(x, config)) for x in config.locks]
        out += [(f"dfa:{x}", build_dfa(x, config)) for x in config.locks]
    out.append(("childterm", build_child_term(config)))
    return out


def build_full(config: CheckConfig) -> Ata:
    """Forest automaton: accepts iff every constituent tree is safe."""
    return lift_over_br(build_safe_tree(config))


WIDGETS = ("full", "dfa:X", "childterm", "joinlock:X", "cycle", "pairreach:A:B",
           "finalacq:X", "spawnpair", "depends:X:Y")


def build_widget(widget: str, config: CheckConfig) -> Ata:
    """Build a widget from its command-line name, e.g. ``dfa:1``."""
    name, *args = widget.split(":")
    try:
        if name == "full" and not args:
            return build_full(config)
        if name == "childterm" and not args:
            return build_child_term(config)
        if name == "cycle" and not args:
            return build_cycle_check(config)
        if name == "spawnpair" and not args:
            return build_spawn_pair(config)
        if name == "dfa" and len(args) == 1:
            return build_dfa(int(args[0]), config)
        if name == "joinlock" and len(args) == 1:
            return build_join_lock(int(args[0]), config)
        if name == "finalacq" and len(args) == 1:
            return build_final_acq(int(args[0]), config)
        if name == "depends" and len(args) == 2:
            return build_depends_on(int(args[0]), int(args[1]), config)
        if name == "pairreach" and len(args) == 2:
            return build_pair_reach(args[0], args[1], config)
    except ValueError as exc:
        raise ValueError(f"widget {widget!r}: {exc}") from None
    raise ValueError(f"unknown widget {widget!r}; choose one of {', '.join(WIDGETS)}")
