from __future__ import annotations

import pytest
from hypothesis import settings, strategies as st

from atab.corpus import random_tree
from atab.tree import ActionTree, CheckConfig, acq, bot, jo, lab, rel, sp, term

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

JOIN_LOCK_TREE = "(acq1 (sp (jo (rel1 ($))) (acq1 (rel1 ($)))))"
CROSSED_TREE = "(sp (acq1 (acq2 (rel2 (rel1 ($))))) (acq2 (acq1 (rel1 (rel2 ($))))))"
PRINTER = "(sp (jo (lab P ($))) (sp (acq1 (lab P (rel1 ($)))) (acq1 (lab P (rel1 ($))))))"

K2 = CheckConfig(2, ("A", "B"), (("A", "B"), ("A", "A")))


def well_formed_trees(config: CheckConfig = K2, max_nodes: int = 12, label_children=(0,)):
    """Join-lock-well-formed trees drawn through the corpus sampler."""
    return st.randoms(use_true_random=False).map(
        lambda rng: random_tree(rng, config, max_nodes, label_children))


def _any_tree(leaves):
    return st.recursive(
        leaves,
        lambda inner: st.one_of(
            st.builds(sp, inner, inner),
            st.builds(jo, inner),
            st.builds(acq, st.integers(1, 2), inner),
            st.builds(rel, st.integers(1, 2), inner),
        ),
        max_leaves=6,
    )


# arbitrary trees over two locks, well-formed or not
any_trees = _any_tree(st.sampled_from([term(), bot(), lab("A"), lab("B")]))


@pytest.fixture
def k2() -> CheckConfig:
    return K2
