"""Model constructors: the four-attribute running example, the discrepancy
family where tree-specific explanations keep every characteristic, and seeded
random models for property tests and benchmarks."""
from __future__ import annotations

from fractions import Fraction
from typing import Optional

import numpy as np

from .bounds import refine, unconstrained
from .model import (
    Attribute,
    AttributeSchema,
    AttrKind,
    BoostedTree,
    Condition,
    EqualsCategory,
    Forest,
    GreaterThan,
    IsTrue,
    Leaf,
    Node,
    Tree,
)

NUM, CAT, BOOL = AttrKind.NUMERICAL, AttrKind.CATEGORICAL, AttrKind.BOOLEAN


def running_example(exact: bool = False) -> BoostedTree:
    """Three regression trees over A1, A2 (numerical), A3 in {b, w, r} and A4 (Boolean).

    With ``exact`` the leaf weights are rationals, so forest weights are the
    exact decimal sums.
    """
    w = (lambda s: Fraction(s)) if exact else float
    schema = AttributeSchema((
        Attribute("A1", NUM),
        Attribute("A2", NUM),
        Attribute("A3", CAT, ("b", "w", "r")),
        Attribute("A4", BOOL),
    ))
    a1 = Condition(0, GreaterThan(2.0))
    a2 = Condition(1, GreaterThan(1.0))
    a3 = Condition(2, EqualsCategory("b"))
    a4 = Condition(3, IsTrue())
    t1 = Tree.from_nested((a4, w("-0.5"), (a2, w("0.4"), (a3, w("-0.3"), (a1, w("-0.2"), w("0.3"))))))
    t2 = Tree.from_nested((a2, (a1, w("-0.2"), (a4, w("-0.4"), w("0.3"))), w("0.5")))
    t3 = Tree.from_nested((
        a3,
        (a2, (a1, w("-0.2"), w("0.2")), (a4, w("-0.1"), (a1, w("0.2"), w("0.3")))),
        (a2, w("-0.4"), (a4, w("-0.5"), w("0.1"))),
    ))
    return BoostedTree(schema, (Forest((t1, t2, t3)),))


def gen_discrepancy_model(n: int) -> BoostedTree:
    """One forest of ``2n`` depth-1 trees over Boolean attributes: for every ``i`` a tree
    with leaves ``(-0.5, 0.5)`` and one with ``(0.5, -0.5)`` on ``A_i = 1``.

    Every instance has weight 0 and is classified 0; on ``x = (0, ..., 0)`` the
    unique tree-specific explanation keeps all ``n`` characteristics while the
    empty term is the unique sufficient reason.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    schema = AttributeSchema(tuple(Attribute(f"A{i + 1}", BOOL) for i in range(n)))
    trees = []
    for i in range(n):
        c = Condition(i, IsTrue())
        trees.append(Tree.from_nested((c, -0.5, 0.5)))
        trees.append(Tree.from_nested((c, 0.5, -0.5)))
    return BoostedTree(schema, (Forest(tuple(trees)),))


# --- random models ---------------------------------------------------------------

SMALL_GRID = (0.5, 1.5, 2.5, 3.5)


def random_schema(rng: np.random.Generator, n_num: int, n_cat: int, n_bool: int) -> AttributeSchema:
    attrs = [Attribute(f"x{i}", NUM) for i in range(n_num)]
    for i in range(n_cat):
        k = int(rng.integers(2, 5))
        attrs.append(Attribute(f"c{i}", CAT, tuple("abcd"[:k])))
    attrs += [Attribute(f"b{i}", BOOL) for i in range(n_bool)]
    return AttributeSchema(tuple(attrs))


def _random_condition(rng, schema, state, grids, weights_p):
    """A condition both of whose outcomes are satisfiable under ``state``, or None."""
    n = len(schema)
    for _ in range(8):
        i = int(rng.choice(n, p=weights_p)) if weights_p is not None else int(rng.integers(n))
        a = schema[i]
        c = state[i]
        if a.kind is NUM:
            inside = [th for th in grids[i] if c.lo < th < c.hi]
            if inside:
                return Condition(i, GreaterThan(float(inside[int(rng.integers(len(inside)))])))
        elif a.kind is CAT:
            allowed = sorted(c.allowed(), key=a.categories.index)
            if len(allowed) > 1:
                return Condition(i, EqualsCategory(allowed[int(rng.integers(len(allowed)))]))
        elif c.fixed is None:
            return Condition(i, IsTrue())
    return None


def random_tree(rng, schema, grids, max_depth, split_prob, leaf_weight, weights_p=None) -> Tree:
    nodes: list = []

    def grow(state, depth) -> int:
        i = len(nodes)
        nodes.append(None)
        cond = None
        if depth < max_depth and (depth == 0 or rng.random() < split_prob):
            cond = _random_condition(rng, schema, state, grids, weights_p)
        if cond is None:
            nodes[i] = Leaf(leaf_weight(state))
            return i
        a = cond.attribute
        kids = []
        for outcome in (False, True):
            s = list(state)
            s[a] = refine(state[a], cond.test, outcome)
            kids.append(grow(s, depth + 1))
        nodes[i] = Node(cond, kids[0], kids[1])
        return i

    grow(list(unconstrained(schema).constraints), 0)
    return Tree(nodes)


def random_model(rng: np.random.Generator, *, n_num: Optional[int] = None, n_cat: Optional[int] = None,
                 n_bool: Optional[int] = None, n_classes: int = 2, n_trees: Optional[int] = None,
                 max_depth: int = 4, split_prob: float = 0.6, coarse: Optional[bool] = None) -> BoostedTree:
    """A small random model: at most five attributes per kind, six trees, depth four.

    Thresholds come from a half-integer grid and instances from
    :func:`random_instance` take integer values (sometimes exactly a
    threshold). Coarse weights are multiples of 0.1, which makes exact ties
    and zero weights likely.
    """
    n_num = int(rng.integers(0, 6)) if n_num is None else n_num
    n_cat = int(rng.integers(0, 6)) if n_cat is None else n_cat
    n_bool = int(rng.integers(0, 6)) if n_bool is None else n_bool
    if n_num + n_cat + n_bool == 0:
        n_num = 1
    schema = random_schema(rng, n_num, n_cat, n_bool)
    coarse = bool(rng.random() < 0.5) if coarse is None else coarse
    grids = [SMALL_GRID] * len(schema)

    def leaf_weight(_state):
        if coarse:
            return int(rng.integers(-5, 6)) / 10
        return round(float(rng.normal()), 3)

    m = 1 if n_classes == 2 else n_classes
    forests = []
    for j in range(m):
        if m == 1:
            k = int(rng.integers(1, 7)) if n_trees is None else n_trees
        else:
            k = int(rng.integers(1, 3)) if n_trees is None else n_trees
        trees = tuple(random_tree(rng, schema, grids, max_depth, split_prob, leaf_weight) for _ in range(k))
        forests.append(Forest(trees, j))
    return BoostedTree(schema, tuple(forests), tie_class=int(rng.integers(0, max(2, m))) if m > 1 else 0)


def random_instance(rng: np.random.Generator, bt: BoostedTree) -> tuple:
    x = []
    for a in bt.schema.attributes:
        if a.kind is NUM:
            x.append(float(rng.choice(SMALL_GRID)) if rng.random() < 0.15 else float(rng.integers(0, 5)))
        elif a.kind is CAT:
            x.append(a.categories[int(rng.integers(len(a.categories)))])
        else:
            x.append(int(rng.integers(0, 2)))
    return tuple(x)


def random_subterm(rng: np.random.Generator, x, keep_prob: Optional[float] = None):
    from .model import Term

    p = float(rng.random()) if keep_prob is None else keep_prob
    return Term(x, frozenset(i for i in range(len(x)) if rng.random() < p))


def random_large_model(rng: np.random.Generator, n_attributes: int = 50, n_trees: int = 200,
                       max_depth: int = 4, n_classes: int = 2, n_thresholds: int = 8,
                       learning_rate: float = 0.1) -> BoostedTree:
    """A boosting-like model over mostly numerical attributes in ``[0, 4)``.

    A sparse hidden linear score drives both the split attributes and the
    leaf weights, so a handful of attributes dominates the decision, as in
    learned ensembles.
    """
    n_cat = n_bool = max(0, n_attributes // 10)
    n_num = n_attributes - n_cat - n_bool
    schema = random_schema(rng, n_num, n_cat, n_bool)
    n = len(schema)
    m = 1 if n_classes == 2 else n_classes
    grids = []
    for a in schema.attributes:
        if a.kind is NUM:
            grids.append(tuple(sorted(set(np.round(rng.uniform(0.1, 3.9, n_thresholds), 2).tolist()))))
        else:
            grids.append(())
    hidden = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.3)
    p = np.abs(hidden).sum(axis=0) + 0.05
    p = p / p.sum()

    def center(i, c):
        a = schema[i]
        if a.kind is NUM:
            lo = 0.0 if c.lo == -np.inf else max(0.0, c.lo)
            hi = 4.0 if c.hi == np.inf else min(4.0, c.hi)
            return (lo + hi) / 2 - 2.0
        if a.kind is CAT:
            allowed = c.allowed()
            return (sum(a.categories.index(k) for k in allowed) / len(allowed)) - (len(a.categories) - 1) / 2
        return 0.0 if c.fixed is None else (c.fixed - 0.5)

    forests = []
    for j in range(m):
        def leaf_weight(state, j=j):
            s = sum(hidden[j, i] * center(i, c) for i, c in enumerate(state) if hidden[j, i] != 0)
            return round(float(learning_rate * (s + 0.3 * float(rng.standard_normal()))), 6)

        trees = tuple(random_tree(rng, schema, grids, max_depth, 0.85, leaf_weight, p) for _ in range(n_trees))
        forests.append(Forest(trees, j))
    return BoostedTree(schema, tuple(forests))


def random_large_instance(rng: np.random.Generator, bt: BoostedTree) -> tuple:
    x = []
    for a in bt.schema.attributes:
        if a.kind is NUM:
            x.append(round(float(rng.uniform(0, 4)), 3))
        elif a.kind is CAT:
            x.append(a.categories[int(rng.integers(len(a.categories)))])
        else:
            x.append(int(rng.integers(0, 2)))
    return tuple(x)

