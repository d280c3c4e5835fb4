"""Worst/best leaf weights of a tree under a restriction of the instance space.

A restriction constrains every attribute independently. One depth-first walk
of a tree carries the per-attribute state refined by the conditions on the
current path; an arc whose outcome is impossible under that state is frozen
and its subtree skipped. The minimal (maximal) leaf weight over the surviving
root-to-leaf paths is the weight of a worst (best) instance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .model import (
    AttrKind,
    AttributeSchema,
    EqualsCategory,
    Forest,
    GreaterThan,
    Node,
    Term,
    Test,
    Tree,
)

MIN, MAX = "min", "max"


@dataclass(frozen=True)
class Interval:
    """Numerical constraint: the half-open interval ``(lo, hi]``, or exactly ``pin`` when set."""

    lo: float = -math.inf
    hi: float = math.inf
    pin: Optional[float] = None

    def __post_init__(self):
        if self.pin is None and not self.lo < self.hi:
            raise ValueError(f"empty interval ({self.lo}, {self.hi}]")


@dataclass(frozen=True)
class CategoryState:
    domain: frozenset
    fixed: Optional[str] = None
    excluded: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "domain", frozenset(self.domain))
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        if self.fixed is not None:
            if self.fixed not in self.domain or self.fixed in self.excluded:
                raise ValueError(f"category {self.fixed!r} cannot be fixed")
        elif not self.domain - self.excluded:
            raise ValueError("every category is excluded")

    def allowed(self) -> frozenset:
        return frozenset({self.fixed}) if self.fixed is not None else self.domain - self.excluded


@dataclass(frozen=True)
class BoolState:
    fixed: Optional[int] = None


DomainConstraint = Union[Interval, CategoryState, BoolState]


@dataclass(frozen=True)
class Restriction:
    constraints: tuple

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def __len__(self):
        return len(self.constraints)

    def __getitem__(self, i) -> DomainConstraint:
        return self.constraints[i]

    def replace(self, i: int, c: DomainConstraint) -> "Restriction":
        cs = list(self.constraints)
        cs[i] = c
        return Restriction(cs)

    def admits(self, x: Sequence) -> bool:
        for c, v in zip(self.constraints, x):
            if isinstance(c, Interval):
                if c.pin is not None:
                    if v != c.pin:
                        return False
                elif not c.lo < v <= c.hi:
                    return False
            elif isinstance(c, CategoryState):
                if v not in c.allowed():
                    return False
            elif c.fixed is not None and v != c.fixed:
                return False
        return True


@dataclass(frozen=True)
class BoundResult:
    weight: object
    leaf: int
    path: tuple  # ((node, outcome), ...) from the root


def unconstrained(schema: AttributeSchema) -> Restriction:
    out = []
    for a in schema.attributes:
        if a.kind is AttrKind.NUMERICAL:
            out.append(Interval())
        elif a.kind is AttrKind.CATEGORICAL:
            out.append(CategoryState(frozenset(a.categories)))
        else:
            out.append(BoolState())
    return Restriction(out)


def pin(schema: AttributeSchema, i: int, v) -> DomainConstraint:
    a = schema[i]
    if a.kind is AttrKind.NUMERICAL:
        return Interval(pin=v)
    if a.kind is AttrKind.CATEGORICAL:
        return CategoryState(frozenset(a.categories), fixed=v)
    return BoolState(int(v))


def restriction_of_term(t: Term, schema: AttributeSchema) -> Restriction:
    """Pins every kept attribute to the instance's value; leaves the rest free."""
    base = unconstrained(schema)
    cs = list(base.constraints)
    for i in t.kept:
        cs[i] = pin(schema, i, t.instance[i])
    return Restriction(cs)


def refine(c: DomainConstraint, test: Test, outcome: bool) -> Optional[DomainConstraint]:
    """``c`` narrowed by requiring ``test`` to evaluate to ``outcome``; None if impossible."""
    if isinstance(test, GreaterThan):
        th = test.threshold
        if c.pin is not None:
            return c if (c.pin > th) == outcome else None
        if outcome:
            return Interval(max(c.lo, th), c.hi) if th < c.hi else None
        return Interval(c.lo, min(c.hi, th)) if c.lo < th else None
    if isinstance(test, EqualsCategory):
        k = test.category
        if c.fixed is not None:
            return c if (c.fixed == k) == outcome else None
        if outcome:
            return CategoryState(c.domain, fixed=k) if k in c.domain and k not in c.excluded else None
        excluded = c.excluded | {k}
        return CategoryState(c.domain, excluded=excluded) if c.domain - excluded else None
    if c.fixed is not None:
        return c if (c.fixed == 1) == outcome else None
    return BoolState(1 if outcome else 0)


def tree_bound(tree: Tree, r: Restriction, direction: str = MIN) -> BoundResult:
    """Minimal (``"min"``) or maximal (``"max"``) leaf weight over valid paths of ``tree`` under ``r``.

    Visits each node at most once. Ties keep the first leaf met in
    false-branch-first order.
    """
    if direction not in (MIN, MAX):
        raise ValueError(f"direction must be 'min' or 'max', got {direction!r}")
    want_min = direction == MIN
    nodes = tree.nodes
    state = list(r.constraints)
    path: list = []
    best: list = [None, -1, ()]

    def visit(i: int) -> None:
        nd = nodes[i]
        if type(nd) is not Node:
            w = nd.weight
            b = best[0]
            if b is None or (w < b if want_min else w > b):
                best[0], best[1], best[2] = w, i, tuple(path)
            return
        c = nd.condition
        a = c.attribute
        old = state[a]
        for outcome, child in ((False, nd.left), (True, nd.right)):
            new = refine(old, c.test, outcome)
            if new is None:
                continue  # frozen arc
            state[a] = new
            path.append((i, outcome))
            visit(child)
            path.pop()
        state[a] = old

    visit(0)
    if best[0] is None:
        raise RuntimeError("no valid root-to-leaf path under the restriction")
    return BoundResult(best[0], best[1], best[2])


def forest_bound(forest: Forest, r: Restriction, direction: str = MIN):
    """Sum of the per-tree bounds, added in tree order."""
    total = 0
    for t in forest.trees:
        total = total + tree_bound(t, r, direction).weight
    return total


def path_restriction(tree: Tree, r: Restriction, path: Sequence) -> Restriction:
    """``r`` refined by every condition outcome along ``path``."""
    cs = list(r.constraints)
    for i, outcome in path:
        c = tree.nodes[i].condition
        new = refine(cs[c.attribute], c.test, outcome)
        if new is None:
            raise ValueError(f"path is not valid under the restriction (node {i})")
        cs[c.attribute] = new
    return Restriction(cs)


def representative(c: DomainConstraint, categories: Sequence[str] = ()):
    """A deterministic value satisfying ``c``."""
    if isinstance(c, Interval):
        if c.pin is not None:
            return c.pin
        lo, hi = c.lo, c.hi
        if math.isinf(lo) and math.isinf(hi):
            return 0.0
        if math.isinf(lo):
            return hi - 1
        if math.isinf(hi):
            v = lo + 1
            return v if v > lo else math.nextafter(lo, math.inf)
        mid = (lo + hi) / 2
        return mid if lo < mid <= hi else hi
    if isinstance(c, CategoryState):
        if c.fixed is not None:
            return c.fixed
        order = categories or sorted(c.domain)
        return next(k for k in order if k in c.domain and k not in c.excluded)
    return 0 if c.fixed is None else c.fixed


def materialize(r: Restriction, schema: AttributeSchema) -> tuple:
    return tuple(representative(c, schema[i].categories) for i, c in enumerate(r.constraints))


def witness_instance(tree: Tree, r: Restriction, result: BoundResult, schema: AttributeSchema) -> tuple:
    """An instance satisfying ``r`` whose path in ``tree`` is the witness path of ``result``."""
    return materialize(path_restriction(tree, r, result.path), schema)


def unsatisfiable_paths(tree: Tree, schema: AttributeSchema) -> list:
    """Nodes (with their paths) whose incoming path is contradictory over the unconstrained space."""
    nodes = tree.nodes
    bad = []
    state = list(unconstrained(schema).constraints)
    path: list = []

    def visit(i: int) -> None:
        nd = nodes[i]
        if type(nd) is not Node:
            return
        c = nd.condition
        a = c.attribute
        old = state[a]
        for outcome, child in ((False, nd.left), (True, nd.right)):
            new = refine(old, c.test, outcome)
            path.append((i, outcome))
            if new is None:
                bad.append((child, tuple(path)))
            else:
                state[a] = new
                visit(child)
            path.pop()
        state[a] = old

    visit(0)
    return bad
