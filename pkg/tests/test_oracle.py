from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boostexplain.generators import random_instance, random_model, random_subterm, running_example
from boostexplain.model import Attribute, AttributeSchema, AttrKind, BoostedTree, Condition, Forest, GreaterThan, Term, Tree
from boostexplain.oracle import (
    DISPROVED,
    PROVED,
    TIMEOUT,
    Budget,
    CapExceeded,
    CompiledEnsemble,
    build_universe,
    is_abductive,
    is_abductive_bruteforce,
)
from boostexplain.ts import ts_explain, ts_test
from helpers import X_RUN, corpus, extensions, grid_abductive, grid_margin_min, margin

F = Fraction
T_A1_A4 = Term(X_RUN, frozenset({0, 3}))
T_A2_A4 = Term(X_RUN, frozenset({1, 3}))


def test_universe_of_the_running_example():
    u = build_universe(running_example())
    assert u[0].thresholds == (2.0,) and u[1].thresholds == (1.0,)  # A2 > 1 appears twice
    assert u[2].tested == ("b",) and u[2].other == ("w", "r")
    assert u[3].tested_bool
    assert u.n_cells() == [2, 2, 2, 2]


def test_universe_of_a_single_leaf_model():
    schema = AttributeSchema((Attribute("A", AttrKind.NUMERICAL), Attribute("C", AttrKind.CATEGORICAL, ("p", "q")),
                              Attribute("B", AttrKind.BOOLEAN)))
    bt = BoostedTree(schema, (Forest((Tree.leaf(1.0),)),))
    assert build_universe(bt).n_cells() == [1, 1, 1]
    assert is_abductive(bt, (0.0, "p", 0), Term.empty((0.0, "p", 0))).abductive


def test_no_other_cell_when_every_label_is_tested():
    schema = AttributeSchema((Attribute("C", AttrKind.CATEGORICAL, ("p", "q")),))
    from boostexplain.model import EqualsCategory
    trees = tuple(Tree.from_nested((Condition(0, EqualsCategory(k)), 2.0, -1.0)) for k in "pq")
    u = build_universe(BoostedTree(schema, (Forest(trees),)))
    assert u[0].n_cells == 2 and u[0].other == ()


def test_bruteforce_on_the_a1_a4_term():
    bt = running_example(exact=True)
    v = is_abductive_bruteforce(bt, X_RUN, T_A1_A4)
    assert v.abductive and v.status == PROVED
    assert v.nodes_explored == 4  # the four weights 0.9, 0.3, 0.5, 0.9
    assert v.optimal_margin == F("0.3")


def test_bruteforce_on_the_full_and_empty_terms():
    bt = running_example()
    assert is_abductive_bruteforce(bt, X_RUN, Term.full(X_RUN)).abductive
    v = is_abductive_bruteforce(bt, X_RUN, Term.empty(X_RUN))
    assert v.abductive is False and v.status == DISPROVED
    assert bt.classify(v.counterexample) == 0


def test_bruteforce_cap():
    with pytest.raises(CapExceeded):
        is_abductive_bruteforce(running_example(), X_RUN, Term.empty(X_RUN), cap=3)


def test_branch_and_bound_on_the_running_example():
    bt = running_example(exact=True)
    v = is_abductive(bt, X_RUN, T_A2_A4)
    assert v.abductive and v.nodes_explored == 0  # settled by the root bound
    v = is_abductive(bt, X_RUN, T_A1_A4, exact_margin=True)
    assert v.abductive and v.optimal_margin == F("0.3")
    v = is_abductive(bt, X_RUN, Term.empty(X_RUN))
    assert v.abductive is False
    assert bt.classify(v.counterexample) == 0 and v.optimal_margin <= 0


def test_not_a_subterm():
    with pytest.raises(ValueError):
        is_abductive(running_example(), X_RUN, Term.full((1.0, 3.0, "b", 1)))


def test_node_budget_gives_timeout():
    rng = np.random.default_rng(3)
    from boostexplain.generators import random_large_instance, random_large_model

    bt = random_large_model(rng, n_attributes=30, n_trees=60, max_depth=4)
    x = random_large_instance(rng, bt)
    v = is_abductive(bt, x, Term(x, frozenset(range(5))), Budget(max_nodes=1))
    assert v.status in (TIMEOUT, DISPROVED)
    v = is_abductive(bt, x, Term(x, frozenset(range(5))), Budget(max_nodes=1), exact_margin=True)
    assert v.status == TIMEOUT and v.abductive is None


def test_wall_clock_budget_gives_timeout():
    import time
    rng = np.random.default_rng(4)
    from boostexplain.generators import random_large_instance, random_large_model

    bt = random_large_model(rng, n_attributes=30, n_trees=60, max_depth=4)
    x = random_large_instance(rng, bt)
    v = is_abductive(bt, x, Term(x, frozenset()), Budget(deadline=time.monotonic() - 1), exact_margin=True)
    assert v.status == TIMEOUT


def _tri(seed):
    rng = np.random.default_rng(seed)
    bt = random_model(rng, n_num=int(rng.integers(1, 3)), n_cat=int(rng.integers(0, 3)),
                      n_bool=int(rng.integers(0, 3)), n_classes=int(rng.choice([2, 3])))
    x = random_instance(rng, bt)
    return bt, x, random_subterm(rng, x)


@given(st.integers(0, 2**32 - 1))
def test_both_oracles_agree_with_grid_enumeration(seed):
    bt, x, t = _tri(seed)
    truth = grid_abductive(bt, x, t)
    assert is_abductive_bruteforce(bt, x, t).abductive == truth
    assert is_abductive(bt, x, t).abductive == truth


@given(st.integers(0, 2**32 - 1))
def test_exact_margin_matches_grid_minimum(seed):
    bt, x, t = _tri(seed)
    v = is_abductive(bt, x, t, exact_margin=True)
    truth = grid_margin_min(bt, x, t)
    if v.abductive:
        assert v.optimal_margin == truth
        assert is_abductive_bruteforce(bt, x, t).optimal_margin == truth
    else:
        assert truth <= v.optimal_margin


@given(st.integers(0, 2**32 - 1))
def test_counterexamples_are_valid(seed):
    bt, x, t = _tri(seed)
    for v in (is_abductive(bt, x, t), is_abductive_bruteforce(bt, x, t)):
        if v.abductive is False:
            bt.schema.check_instance(v.counterexample)
            assert t.extends(v.counterexample)
            assert bt.classify(v.counterexample) != bt.classify(x)
            assert v.optimal_margin == margin(bt, bt.classify(x), v.counterexample)


@given(st.integers(0, 2**32 - 1))
def test_root_bound_is_the_tree_specific_test(seed):
    bt, x, t = _tri(seed)
    v = is_abductive(bt, x, t)
    if ts_test(bt, t):
        assert v.abductive and v.nodes_explored == 0
    else:
        assert v.nodes_explored > 0


@given(st.integers(0, 2**32 - 1))
def test_splits_partition_the_allowed_cells(seed):
    bt, x, t = _tri(seed)
    ce = CompiledEnsemble(bt)
    r = ce.root(t)
    for i in ce.relevant:
        cells = set(ce.cells(r, i))
        for a, b in ce.splits(r, i):
            ca, cb = (set(ce.cells(r[:i] + [c] + r[i + 1:], i)) for c in (a, b))
            assert ca and cb and not ca & cb and ca | cb == cells


@given(st.integers(0, 2**32 - 1))
def test_leaf_bounds_are_admissible(seed):
    # every grid extension's per-tree weight lies within the compiled bounds of the root
    bt, x, t = _tri(seed)
    ce = CompiledEnsemble(bt)
    r = ce.root(t)
    lo, hi = ce.tree_bounds(ce.reach(r))
    trees = [tree for _, tree in bt.trees()]
    from boostexplain.model import eval_tree
    for y in extensions(bt, t, cap=5000):
        for k, tree in enumerate(trees):
            assert lo[k] <= eval_tree(tree, y) <= hi[k]


def test_ts_explanations_are_confirmed_by_the_oracle():
    for bt, x in corpus(21, 80):
        t = ts_explain(bt, x)
        assert is_abductive_bruteforce(bt, x, t).abductive


def test_fractional_model_uses_exact_path():
    bt = running_example(exact=True)
    assert not CompiledEnsemble(bt).vectorized
    assert CompiledEnsemble(running_example()).vectorized


def test_branch_and_bound_agrees_with_bruteforce_on_larger_models():
    rng = np.random.default_rng(99)
    for _ in range(150):
        bt = random_model(rng, n_num=3, n_cat=2, n_bool=3, n_trees=int(rng.integers(3, 7)),
                          n_classes=int(rng.choice([2, 3])))
        x = random_instance(rng, bt)
        t = random_subterm(rng, x)
        a, b = is_abductive(bt, x, t, exact_margin=True), is_abductive_bruteforce(bt, x, t)
        assert a.abductive == b.abductive
        if a.abductive:
            assert a.optimal_margin == b.optimal_margin


@given(st.integers(0, 2**32 - 1))
def test_batched_cut_scores_match_per_attribute_scores(seed):
    bt, x, t = _tri(seed)
    ce = CompiledEnsemble(bt)
    r = ce.root(t)
    reach = ce.reach(r)
    lo, hi = ce.tree_bounds(reach)
    lo_sums, hi_sums = ce.forest_sums(lo), ce.forest_sums(hi)
    cands = [i for i in ce.relevant if ce.universe[i].ranged and i not in t.kept]
    if not cands:
        return
    counts, sides = ce.cut_bounds(reach, r, cands, lo, hi, lo_sums, hi_sums)
    a = 0
    for i, k in zip(cands, counts):
        splits, ref = ce.split_bounds(reach, r, i, lo, hi, lo_sums, hi_sums)
        assert k == len(splits)
        for side, ref_side in zip(sides, ref):
            for got, want in zip(side, ref_side):
                np.testing.assert_allclose(got[a:a + k], want, atol=1e-9)
        # and against exact child bounds
        for h, halves in enumerate(splits):
            for s, c in enumerate(halves):
                cl, ch = ce.tree_bounds(ce.reach_update(reach, i, c))
                np.testing.assert_allclose(sides[s][0][a + h], ce.forest_sums(cl), atol=1e-9)
                np.testing.assert_allclose(sides[s][1][a + h], ce.forest_sums(ch), atol=1e-9)
        a += k
