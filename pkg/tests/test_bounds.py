import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boostexplain.bounds import (
    MAX,
    MIN,
    BoolState,
    CategoryState,
    Interval,
    forest_bound,
    materialize,
    path_restriction,
    refine,
    representative,
    restriction_of_term,
    tree_bound,
    unconstrained,
    unsatisfiable_paths,
    witness_instance,
)
from boostexplain.generators import random_model, random_subterm, random_instance, running_example
from boostexplain.model import EqualsCategory, GreaterThan, IsTrue, Term, eval_tree
from helpers import X_RUN, tree_range

F = Fraction


def per_tree(bt, kept, direction=MIN):
    r = restriction_of_term(Term(X_RUN, frozenset(kept)), bt.schema)
    return [tree_bound(t, r, direction).weight for t in bt.forests[0].trees]


def test_worst_weights_of_a1_a4_term():
    bt = running_example(exact=True)
    assert per_tree(bt, {0, 3}) == [F("-0.3"), F("0.3"), F("-0.4")]
    r = restriction_of_term(Term(X_RUN, frozenset({0, 3})), bt.schema)
    assert forest_bound(bt.forests[0], r, MIN) == F("-0.4")


def test_worst_weights_of_a2_a4_term():
    bt = running_example(exact=True)
    assert per_tree(bt, {1, 3}) == [F("-0.3"), F("0.5"), F("0.1")]
    r = restriction_of_term(Term(X_RUN, frozenset({1, 3})), bt.schema)
    assert forest_bound(bt.forests[0], r, MIN) == F("0.3")


def test_full_term_bounds_equal_the_instance_weights():
    bt = running_example(exact=True)
    assert per_tree(bt, {0, 1, 2, 3}, MIN) == per_tree(bt, {0, 1, 2, 3}, MAX) == [F("0.3"), F("0.5"), F("0.1")]


def test_empty_term_bounds_are_leaf_extremes():
    bt = running_example(exact=True)
    for t, lo, hi in zip(bt.forests[0].trees, per_tree(bt, set(), MIN), per_tree(bt, set(), MAX)):
        ws = [t.nodes[i].weight for i in t.leaves()]
        assert (lo, hi) == (min(ws), max(ws))


def test_bad_direction():
    bt = running_example()
    with pytest.raises(ValueError):
        tree_bound(bt.forests[0].trees[0], unconstrained(bt.schema), "median")


def test_refine_numerical():
    c = Interval()
    assert refine(c, GreaterThan(2.0), True) == Interval(2.0, math.inf)
    assert refine(c, GreaterThan(2.0), False) == Interval(-math.inf, 2.0)
    assert refine(Interval(2.0, 5.0), GreaterThan(5.0), True) is None
    assert refine(Interval(2.0, 5.0), GreaterThan(2.0), False) is None
    assert refine(Interval(pin=2.0), GreaterThan(2.0), False) == Interval(pin=2.0)
    assert refine(Interval(pin=2.0), GreaterThan(2.0), True) is None


def test_refine_categorical_and_boolean():
    c = CategoryState(frozenset("bwr"))
    assert refine(c, EqualsCategory("b"), True).fixed == "b"
    not_b = refine(c, EqualsCategory("b"), False)
    assert not_b.allowed() == frozenset("wr")
    assert refine(refine(not_b, EqualsCategory("w"), False), EqualsCategory("r"), False) is None
    assert refine(not_b, EqualsCategory("b"), True) is None
    assert refine(BoolState(), IsTrue(), True) == BoolState(1)
    assert refine(BoolState(0), IsTrue(), True) is None


def test_representative_satisfies_its_constraint():
    cases = [Interval(), Interval(-math.inf, 2.0), Interval(2.0, math.inf), Interval(1.0, 2.0),
             Interval(1.0, math.nextafter(1.0, 2.0)), Interval(pin=3.5), Interval(1e308, math.inf)]
    for c in cases:
        v = representative(c)
        assert (v == c.pin) if c.pin is not None else c.lo < v <= c.hi
    assert representative(CategoryState(frozenset("bwr"), excluded=frozenset("b")), ("b", "w", "r")) == "w"
    assert representative(BoolState(1)) == 1


def test_unsatisfiable_paths_found():
    from boostexplain.model import Condition, Tree

    c5, c3 = Condition(0, GreaterThan(5.0)), Condition(0, GreaterThan(3.0))
    bt = running_example()
    tree = Tree.from_nested((c5, 0.0, (c3, 1.0, 2.0)))
    bad = unsatisfiable_paths(tree, bt.schema)
    assert len(bad) == 1
    assert unsatisfiable_paths(bt.forests[0].trees[0], bt.schema) == []


def small_model(rng):
    return random_model(rng, n_num=int(rng.integers(0, 3)), n_cat=int(rng.integers(0, 3)),
                        n_bool=int(rng.integers(0, 3)), n_classes=int(rng.choice([2, 3])))


@given(st.integers(0, 2**32 - 1))
def test_bounds_are_sound_and_tight(seed):
    # the bound equals the true extreme of the tree over all extensions, found by enumeration
    rng = np.random.default_rng(seed)
    bt = small_model(rng)
    x = random_instance(rng, bt)
    t = random_subterm(rng, x)
    r = restriction_of_term(t, bt.schema)
    for _, tree in bt.trees():
        lo, hi = tree_range(bt, tree, t)
        assert tree_bound(tree, r, MIN).weight == lo
        assert tree_bound(tree, r, MAX).weight == hi


@given(st.integers(0, 2**32 - 1))
def test_witness_attains_the_bound(seed):
    rng = np.random.default_rng(seed)
    bt = random_model(rng, n_classes=int(rng.choice([2, 3])))
    x = random_instance(rng, bt)
    t = random_subterm(rng, x)
    r = restriction_of_term(t, bt.schema)
    for _, tree in bt.trees():
        for d in (MIN, MAX):
            res = tree_bound(tree, r, d)
            y = witness_instance(tree, r, res, bt.schema)
            bt.schema.check_instance(y)
            assert t.extends(y)
            assert eval_tree(tree, y) == res.weight


@given(st.integers(0, 2**32 - 1))
def test_bounds_monotone_in_the_term(seed):
    # keeping more characteristics can only raise the worst weight and lower the best one
    rng = np.random.default_rng(seed)
    bt = random_model(rng, n_classes=int(rng.choice([2, 3])))
    x = random_instance(rng, bt)
    small = random_subterm(rng, x)
    big = Term(x, small.kept | random_subterm(rng, x).kept)
    rs, rb = restriction_of_term(small, bt.schema), restriction_of_term(big, bt.schema)
    for _, tree in bt.trees():
        assert tree_bound(tree, rs, MIN).weight <= tree_bound(tree, rb, MIN).weight
        assert tree_bound(tree, rs, MAX).weight >= tree_bound(tree, rb, MAX).weight


def test_materialize_and_path_restriction():
    bt = running_example()
    r = restriction_of_term(Term(X_RUN, frozenset({0, 3})), bt.schema)
    y = materialize(r, bt.schema)
    assert y[0] == 4.0 and y[3] == 1
    tree = bt.forests[0].trees[2]
    res = tree_bound(tree, r, MIN)
    pr = path_restriction(tree, r, res.path)
    assert pr.admits(witness_instance(tree, r, res, bt.schema))
