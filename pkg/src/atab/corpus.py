"""Exhaustive and random generation of join-lock-well-formed trees.

Trees are built thread by thread while tracking the current thread's stack
of held locks, so every generated tree is join-lock-well-formed by
construction: a thread only releases its most recent lock, never
re-acquires a held lock, and only ends in ``$`` with no lock held.
"""

from __future__ import annotations

import random
from functools import lru_cache
from typing import Iterator

from .tree import ActionTree, CheckConfig, acq, bot, jo, lab, rel, sp, term


class Corpus:
    """All trees with a bounded node count for a lock/label configuration.

    ``label_children`` selects whether labels appear as leaves (0), as
    actions with a continuation (1), or both.
    """

    def __init__(self, lock_count: int, labels: tuple[str, ...] = (), label_children: tuple[int, ...] = (0,)):
        self.lock_count = lock_count
        self.labels = tuple(labels)
        self.label_children = tuple(label_children)
        self._trees = lru_cache(maxsize=None)(self._trees_uncached)
        self._count = lru_cache(maxsize=None)(self._count_uncached)

    @classmethod
    def for_config(cls, config: CheckConfig, label_children: tuple[int, ...] = (0,)) -> Corpus:
        return cls(config.lock_count, config.labels, label_children)

    def _leaves(self, held: tuple[int, ...]) -> list[ActionTree]:
        out = [] if held else [term()]
        out.append(bot())
        if 0 in self.label_children:
            out += [lab(label) for label in self.labels]
        return out

    def _trees_uncached(self, n: int, held: tuple[int, ...]) -> tuple[ActionTree, ...]:
        """Every tree of exactly ``n`` nodes for a thread holding ``held``."""
        if n < 1:
            return ()
        if n == 1:
            return tuple(self._leaves(held))
        out: list[ActionTree] = []
        rest = self._trees(n - 1, held)
        out += [jo(t) for t in rest]
        if 1 in self.label_children:
            for label in self.labels:
                out += [lab(label, t) for t in rest]
        for x in range(1, self.lock_count + 1):
            if x not in held:
                out += [acq(x, t) for t in self._trees(n - 1, held + (x,))]
        if held:
            out += [rel(held[-1], t) for t in self._trees(n - 1, held[:-1])]
        for left in range(1, n - 1):
            children = self._trees(n - 1 - left, ())
            for parent in self._trees(left, held):
                out += [sp(parent, c) for c in children]
        return tuple(out)

    def _count_uncached(self, n: int, held: tuple[int, ...]) -> int:
        if n < 1:
            return 0
        if n == 1:
            return len(self._leaves(held))
        total = self._count(n - 1, held) * (1 + (len(self.labels) if 1 in self.label_children else 0))
        for x in range(1, self.lock_count + 1):
            if x not in held:
                total += self._count(n - 1, held + (x,))
        if held:
            total += self._count(n - 1, held[:-1])
        for left in range(1, n - 1):
            total += self._count(left, held) * self._count(n - 1 - left, ())
        return total

    def trees(self, n: int) -> tuple[ActionTree, ...]:
        return self._trees(n, ())

    def up_to(self, max_nodes: int) -> Iterator[ActionTree]:
        for n in range(1, max_nodes + 1):
            yield from self._trees(n, ())

    def count(self, max_nodes: int) -> int:
        return sum(self._count(n, ()) for n in range(1, max_nodes + 1))

    def sample(self, rng: random.Random, n: int) -> ActionTree:
        """A uniformly random tree with exactly ``n`` nodes (``n`` must admit one)."""
        return self._sample(rng, n, ())

    def _sample(self, rng: random.Random, n: int, held: tuple[int, ...]) -> ActionTree:
        # iterative would be nicer, but depth is bounded by n which stays small
        total = self._count(n, held)
        if total == 0:
            raise ValueError(f"no tree with {n} nodes")
        pick = rng.randrange(total)
        if n == 1:
            return self._leaves(held)[pick]
        unary = [("jo", None, held)]
        if 1 in self.label_children:
            unary += [("lab", label, held) for label in self.labels]
        unary += [("acq", x, held + (x,)) for x in range(1, self.lock_count + 1) if x not in held]
        if held:
            unary.append(("rel", held[-1], held[:-1]))
        for kind, arg, after in unary:
            c = self._count(n - 1, after)
            if pick < c:
                child = self._sample(rng, n - 1, after)
                if kind == "jo":
                    return jo(child)
                if kind == "lab":
                    return lab(arg, child)
                return acq(arg, child) if kind == "acq" else rel(arg, child)
            pick -= c
        for left in range(1, n - 1):
            c = self._count(left, held) * self._count(n - 1 - left, ())
            if pick < c:
                return sp(self._sample(rng, left, held), self._sample(rng, n - 1 - left, ()))
            pick -= c
        raise AssertionError("sampling fell through")


def random_tree(rng: random.Random, config: CheckConfig, max_nodes: int,
                label_children: tuple[int, ...] = (0, 1)) -> ActionTree:
    """A random join-lock-well-formed tree with at most ``max_nodes`` nodes."""
    corpus = Corpus.for_config(config, label_children)
    return corpus.sample(rng, rng.randint(1, max_nodes))
