"""Tree-specific explanations.

``ts_test`` is the incomplete implicant test built from per-tree worst/best
weights. ``ts_explain`` is the greedy deletion loop over the characteristics
of an instance; ``ts_explain_multi`` repeats it over seeded random orderings
and keeps a shortest result.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import MAX, MIN, forest_bound, restriction_of_term
from .model import BoostedTree, Node, Term, classify, eval_condition


class ContractError(ValueError):
    """A caller-side precondition does not hold."""


INSTANCE_ORDER = "instance_order"
RANDOM = "random"


@dataclass(frozen=True)
class TsConfig:
    runs: int = 1000
    seed: int = 0
    ordering_policy: str = RANDOM

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.ordering_policy not in (INSTANCE_ORDER, RANDOM):
            raise ValueError(f"unknown ordering policy {self.ordering_policy!r}")


@dataclass
class TsMultiResult:
    term: Term
    sizes: list = field(repr=False)
    elapsed: float = 0.0

    @property
    def runs(self) -> int:
        return len(self.sizes)

    @property
    def min_size(self) -> int:
        return min(self.sizes)

    @property
    def mean_size(self) -> float:
        return sum(self.sizes) / len(self.sizes)

    @property
    def max_size(self) -> int:
        return max(self.sizes)


def ts_test(bt: BoostedTree, t: Term, j: Optional[int] = None) -> bool:
    """True if the per-tree bounds alone certify that every extension of ``t`` is classified ``j``."""
    x = t.instance
    pred = classify(bt, x)
    if j is None:
        j = pred
    elif j != pred:
        raise ContractError(f"class {j} given but the instance is classified {pred}")
    r = restriction_of_term(t, bt.schema)
    if bt.binary:
        if j == 1:
            return forest_bound(bt.forests[0], r, MIN) > 0
        return forest_bound(bt.forests[0], r, MAX) <= 0
    low = forest_bound(bt.forests[j], r, MIN)
    return all(low > forest_bound(f, r, MAX) for k, f in enumerate(bt.forests) if k != j)


def check_ordering(ordering: Sequence[int], universe: Sequence[int]) -> list:
    order = [int(i) for i in ordering]
    if sorted(order) != sorted(universe) or len(set(order)) != len(order):
        raise ValueError(f"ordering {order} is not a permutation of {sorted(universe)}")
    return order


class TermBounds:
    """Per-tree worst/best weights for terms ``t ⊆ t_x`` under characteristic removals.

    A leaf is reachable under ``t`` iff no kept attribute contradicts a
    condition on its path, so each leaf only needs the set of attributes on
    which ``x`` disagrees with its path. Removing a characteristic makes
    reachable exactly those leaves whose last disagreeing attribute it was.
    """

    def __init__(self, bt: BoostedTree, x: Sequence):
        self.bt = bt
        self.x = tuple(x)
        self.target = classify(bt, self.x)
        n = len(self.x)
        spans = []
        values: list = []
        leaf_tree: list = []
        blockers: list = []
        by_attr: list = [[] for _ in range(n)]
        g = 0
        for fi, f in enumerate(bt.forests):
            start = g
            for tree in f.trees:
                for w, wrong in _leaf_disagreements(tree, self.x):
                    lid = len(values)
                    values.append(w)
                    leaf_tree.append(g)
                    blockers.append(len(wrong))
                    for a in wrong:
                        by_attr[a].append(lid)
                g += 1
            spans.append((start, g))
        self.spans = spans
        self.values = values
        self.leaf_tree = leaf_tree
        self.by_attr = by_attr
        self._initial_blockers = blockers
        self._initial = [None] * g
        for lid, b in enumerate(blockers):
            if b == 0:
                self._initial[leaf_tree[lid]] = values[lid]
        self.reset()

    def reset(self) -> None:
        self.blockers = list(self._initial_blockers)
        self.lo = list(self._initial)
        self.hi = list(self._initial)
        self.kept = set(range(len(self.x)))
        self.tests = 0

    def _sum(self, vals, overrides, span):
        total = 0
        get = overrides.get
        for g in range(*span):
            total = total + get(g, vals[g])
        return total

    def _passes(self, lo_over: dict, hi_over: dict) -> bool:
        bt, j = self.bt, self.target
        if bt.binary:
            if j == 1:
                return self._sum(self.lo, lo_over, self.spans[0]) > 0
            return self._sum(self.hi, hi_over, self.spans[0]) <= 0
        low = self._sum(self.lo, lo_over, self.spans[j])
        return all(
            low > self._sum(self.hi, hi_over, span) for k, span in enumerate(self.spans) if k != j
        )

    def _changes(self, a: int):
        lo_over: dict = {}
        hi_over: dict = {}
        blockers, values, leaf_tree = self.blockers, self.values, self.leaf_tree
        for lid in self.by_attr[a]:
            if blockers[lid] == 1:
                g = leaf_tree[lid]
                w = values[lid]
                if w < lo_over.get(g, self.lo[g]):
                    lo_over[g] = w
                if w > hi_over.get(g, self.hi[g]):
                    hi_over[g] = w
        return lo_over, hi_over

    def test_without(self, a: int) -> bool:
        """The tree-specific test on the current term deprived of attribute ``a``."""
        self.tests += 1
        lo_over, hi_over = self._changes(a)
        if not lo_over and not hi_over:
            return self.passes()
        return self._passes(lo_over, hi_over)

    def passes(self) -> bool:
        return self._passes({}, {})

    def remove(self, a: int) -> None:
        lo_over, hi_over = self._changes(a)
        for g, w in lo_over.items():
            self.lo[g] = w
        for g, w in hi_over.items():
            self.hi[g] = w
        for lid in self.by_attr[a]:
            self.blockers[lid] -= 1
        self.kept.discard(a)

    def term(self) -> Term:
        return Term(self.x, frozenset(self.kept))


def _leaf_disagreements(tree, x):
    """Yield ``(weight, attributes)`` per leaf: the attributes whose path conditions ``x`` violates."""
    nodes = tree.nodes
    out = []
    stack = [(0, ())]
    while stack:
        i, wrong = stack.pop()
        nd = nodes[i]
        if type(nd) is not Node:
            out.append((nd.weight, frozenset(wrong)))
            continue
        c = nd.condition
        holds = eval_condition(c, x[c.attribute])
        stack.append((nd.left, wrong if not holds else wrong + (c.attribute,)))
        stack.append((nd.right, wrong if holds else wrong + (c.attribute,)))
    return out


def ts_explain(bt: BoostedTree, x: Sequence, ordering: Optional[Sequence[int]] = None,
               _bounds: Optional[TermBounds] = None) -> Term:
    """Greedy tree-specific explanation of ``x``: drop each characteristic, in ``ordering``,
    whenever the tree-specific test still holds without it."""
    x = bt.schema.check_instance(x)
    n = len(x)
    order = list(range(n)) if ordering is None else check_ordering(ordering, range(n))
    tb = _bounds if _bounds is not None else TermBounds(bt, x)
    tb.reset()
    for a in order:
        if tb.test_without(a):
            tb.remove(a)
    return tb.term()


def orderings(n: int, cfg: TsConfig):
    """The orderings used by ``ts_explain_multi``: one substream per run, derived from ``cfg.seed``."""
    if cfg.ordering_policy == INSTANCE_ORDER:
        yield list(range(n))
        return
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.runs):
        yield np.random.Generator(np.random.PCG64(child)).permutation(n).tolist()


def ts_explain_multi(bt: BoostedTree, x: Sequence, cfg: TsConfig = TsConfig()) -> TsMultiResult:
    """Run ``ts_explain`` over ``cfg.runs`` orderings and keep a shortest explanation.

    Ties between equally short explanations go to the lexicographically
    smallest sorted index tuple. With ``instance_order`` every run would be
    identical, so a single run is made.
    """
    start = time.perf_counter()
    x = bt.schema.check_instance(x)
    tb = TermBounds(bt, x)
    best = None
    sizes = []
    for order in orderings(len(x), cfg):
        t = ts_explain(bt, x, order, _bounds=tb)
        sizes.append(len(t))
        if best is None or (len(t), t.sorted()) < (len(best), best.sorted()):
            best = t
    return TsMultiResult(best, sizes, time.perf_counter() - start)
