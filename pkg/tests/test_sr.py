import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boostexplain.generators import gen_discrepancy_model, random_instance, random_model, running_example
from boostexplain.model import Term
from boostexplain.oracle import Budget, is_abductive_bruteforce
from boostexplain.sr import InputError, sr_explain, ts_sr_pipeline
from boostexplain.ts import TsConfig, ts_explain
from helpers import X_RUN, grid_abductive


def naive_sr(bt, x, seed, order):
    """Greedy deletion deciding each removal by brute-force enumeration."""
    t = seed
    for i in order:
        if is_abductive_bruteforce(bt, x, t.without(i)).abductive:
            t = t.without(i)
    return t


def test_ordering_a2_a3_a1_a4_gives_a1_a4():
    res = sr_explain(running_example(exact=True), X_RUN, ordering=[1, 2, 0, 3])
    assert res.term.sorted() == (0, 3)
    assert res.minimal_proved and res.oracle_calls == 5 and res.timeouts == 0


def test_smallest_sufficient_reasons_of_the_running_example_have_size_two():
    # every subset of the instance, decided by brute force
    bt = running_example()
    abductive = [set(s) for k in range(5) for s in itertools.combinations(range(4), k)
                 if is_abductive_bruteforce(bt, X_RUN, Term(X_RUN, frozenset(s))).abductive]
    minimal = [s for s in abductive if not any(o < s for o in abductive)]
    assert min(len(s) for s in minimal) == 2
    for order in itertools.permutations(range(4)):
        assert set(sr_explain(bt, X_RUN, ordering=order).term.kept) in minimal


@pytest.mark.parametrize("n", [1, 3, 6])
def test_discrepancy_model_reduces_to_nothing(n):
    bt = gen_discrepancy_model(n)
    x = (0,) * n
    res = sr_explain(bt, x)
    assert len(res.term) == 0 and res.minimal_proved
    p = ts_sr_pipeline(bt, x, TsConfig(runs=20, seed=0))
    assert p.ts.min_size == n and len(p.term) == 0


def test_pipeline_on_the_running_example():
    p = ts_sr_pipeline(running_example(), X_RUN, TsConfig(runs=100, seed=5))
    assert len(p.term) == 2 and p.term.kept <= p.ts.term.kept


def test_non_abductive_seed_rejected():
    bt = running_example()
    with pytest.raises(InputError):
        sr_explain(bt, X_RUN, Term(X_RUN, frozenset({0})))
    with pytest.raises(InputError):
        sr_explain(bt, X_RUN, Term((1.0, 3.0, "b", 1), frozenset({0})))


def test_bad_ordering_rejected():
    with pytest.raises(ValueError):
        sr_explain(running_example(), X_RUN, Term(X_RUN, frozenset({0, 3})), ordering=[0, 1])


def test_timeouts_keep_characteristics():
    bt = running_example()
    res = sr_explain(bt, X_RUN, budget=Budget(max_nodes=0))
    # only removals settled by the root bound go through
    assert not res.minimal_proved and res.timeouts > 0
    assert grid_abductive(bt, X_RUN, res.term)
    res = sr_explain(bt, X_RUN, time_limit=0.0)
    assert not res.minimal_proved and grid_abductive(bt, X_RUN, res.term)


def test_single_tree_sr_equals_ts():
    rng = np.random.default_rng(8)
    for _ in range(40):
        bt = random_model(rng, n_trees=1)
        x = random_instance(rng, bt)
        order = rng.permutation(len(x)).tolist()
        assert sr_explain(bt, x, ordering=order).term == ts_explain(bt, x, order)


def _case(seed):
    rng = np.random.default_rng(seed)
    bt = random_model(rng, n_num=int(rng.integers(1, 4)), n_cat=int(rng.integers(0, 3)),
                      n_bool=int(rng.integers(0, 3)), n_classes=int(rng.choice([2, 3])))
    x = random_instance(rng, bt)
    return bt, x, rng.permutation(len(x)).tolist()


@given(st.integers(0, 2**32 - 1))
def test_matches_bruteforce_greedy(seed):
    # equality with the brute-force greedy means every intermediate term was abductive
    bt, x, order = _case(seed)
    assert sr_explain(bt, x, ordering=order).term == naive_sr(bt, x, Term.full(x), order)


@given(st.integers(0, 2**32 - 1))
def test_minimality_certificate(seed):
    bt, x, order = _case(seed)
    res = sr_explain(bt, x, ordering=order)
    assert res.minimal_proved
    assert grid_abductive(bt, x, res.term)
    for i in res.term.kept:
        assert not is_abductive_bruteforce(bt, x, res.term.without(i)).abductive


@given(st.integers(0, 2**32 - 1))
def test_pipeline_dominates_on_calls_and_size(seed):
    bt, x, order = _case(seed)
    p = ts_sr_pipeline(bt, x, TsConfig(runs=10, seed=seed), ordering=order)
    plain = sr_explain(bt, x, ordering=order)
    assert p.term.kept <= p.ts.term.kept
    assert len(p.term) <= p.ts.min_size <= len(x)
    assert p.sr.oracle_calls <= plain.oracle_calls
    assert p.sr.minimal_proved
