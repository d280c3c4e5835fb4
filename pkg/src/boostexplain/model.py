"""Boosted-tree classifiers: schema, conditions, trees, forests and evaluation.

Leaf weights are summed left to right in tree order, so every code path that
adds the same weights in the same order produces bit-identical results.
Weights may be ``float`` or exact rationals (``fractions.Fraction``); the
scalar functions here are arithmetic-generic.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from numbers import Real
from typing import Iterable, Sequence, Union

import numpy as np


class SchemaError(ValueError):
    """A value, condition or instance does not conform to the attribute schema."""


class ModelError(ValueError):
    """A tree, forest or boosted tree is malformed."""


class AttrKind(str, enum.Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"
    BOOLEAN = "boolean"


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: AttrKind
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", AttrKind(self.kind))
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind is AttrKind.CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"categorical attribute {self.name!r} declares no category")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"duplicate category in attribute {self.name!r}")
        elif self.categories:
            raise SchemaError(f"{self.kind.value} attribute {self.name!r} cannot declare categories")


@dataclass(frozen=True)
class AttributeSchema:
    attributes: tuple[Attribute, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        index = {}
        for i, a in enumerate(self.attributes):
            if a.name in index:
                raise SchemaError(f"duplicate attribute name {a.name!r}")
            index[a.name] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.attributes)

    def __getitem__(self, i: int) -> Attribute:
        return self.attributes[i]

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown attribute {name!r}") from None

    def check_value(self, i: int, v) -> None:
        a = self.attributes[i]
        if a.kind is AttrKind.NUMERICAL:
            if isinstance(v, bool) or not isinstance(v, Real):
                raise SchemaError(f"attribute {a.name!r} expects a number, got {v!r}")
        elif a.kind is AttrKind.CATEGORICAL:
            if v not in a.categories:
                raise SchemaError(f"attribute {a.name!r}: {v!r} is not a declared category")
        elif v not in (0, 1) or isinstance(v, float):
            raise SchemaError(f"boolean attribute {a.name!r} expects 0 or 1, got {v!r}")

    def check_instance(self, x: Sequence) -> tuple:
        if len(x) != len(self.attributes):
            raise SchemaError(f"instance has {len(x)} values, schema has {len(self.attributes)} attributes")
        for i, v in enumerate(x):
            self.check_value(i, v)
        return tuple(x)

    def encode(self, instances: Iterable[Sequence]) -> np.ndarray:
        """Encode instances as a float matrix: categories by declared position, Booleans as 0/1."""
        rows = []
        cat_pos = [
            {c: float(k) for k, c in enumerate(a.categories)} if a.kind is AttrKind.CATEGORICAL else None
            for a in self.attributes
        ]
        for x in instances:
            rows.append([float(v) if cp is None else cp[v] for v, cp in zip(x, cat_pos)])
        return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(self.attributes))


# --- conditions -------------------------------------------------------------

@dataclass(frozen=True)
class GreaterThan:
    threshold: float


@dataclass(frozen=True)
class EqualsCategory:
    category: str


@dataclass(frozen=True)
class IsTrue:
    pass


Test = Union[GreaterThan, EqualsCategory, IsTrue]

_TEST_KIND = {GreaterThan: AttrKind.NUMERICAL, EqualsCategory: AttrKind.CATEGORICAL, IsTrue: AttrKind.BOOLEAN}


@dataclass(frozen=True)
class Condition:
    attribute: int
    test: Test

    def describe(self, schema: AttributeSchema | None = None) -> str:
        name = schema[self.attribute].name if schema is not None else f"A{self.attribute + 1}"
        if isinstance(self.test, GreaterThan):
            return f"{name} > {self.test.threshold}"
        if isinstance(self.test, EqualsCategory):
            return f"{name} = {self.test.category}"
        return f"{name} = 1"


def eval_condition(c: Condition, v) -> bool:
    """Truth value of ``c`` for attribute value ``v`` (strict ``>``, no epsilon)."""
    t = c.test
    if isinstance(t, GreaterThan):
        if isinstance(v, (bool, str)) or not isinstance(v, Real):
            raise SchemaError(f"numerical condition on non-numerical value {v!r}")
        return v > t.threshold
    if isinstance(t, EqualsCategory):
        if not isinstance(v, str):
            raise SchemaError(f"categorical condition on non-categorical value {v!r}")
        return v == t.category
    if isinstance(v, str) or v not in (0, 1):
        raise SchemaError(f"boolean condition on non-boolean value {v!r}")
    return v == 1


# --- trees ------------------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    weight: Real

    def __post_init__(self):
        if isinstance(self.weight, np.generic):
            object.__setattr__(self, "weight", self.weight.item())


@dataclass(frozen=True)
class Node:
    condition: Condition
    left: int   # condition false
    right: int  # condition true


class Tree:
    """A regression tree stored as a node list; ``nodes[0]`` is the root."""

    __slots__ = ("nodes", "_depth")

    def __init__(self, nodes: Sequence[Union[Node, Leaf]]):
        nodes = tuple(nodes)
        if not nodes:
            raise ModelError("empty tree")
        seen = set()
        stack = [(0, 0)]
        depth = 0
        while stack:
            i, d = stack.pop()
            if not 0 <= i < len(nodes):
                raise ModelError(f"child index {i} out of range")
            if i in seen:
                raise ModelError(f"node {i} is reachable twice (not a tree)")
            seen.add(i)
            depth = max(depth, d)
            nd = nodes[i]
            if isinstance(nd, Node):
                stack.append((nd.left, d + 1))
                stack.append((nd.right, d + 1))
            elif isinstance(nd, Leaf):
                w = nd.weight
                if isinstance(w, bool) or not isinstance(w, Real) or w != w or w in (float("inf"), float("-inf")):
                    raise ModelError(f"leaf {i} carries a non-finite weight {w!r}")
            else:
                raise ModelError(f"node {i} is neither a Node nor a Leaf")
        if len(seen) != len(nodes):
            raise ModelError(f"{len(nodes) - len(seen)} node(s) unreachable from the root")
        self.nodes = nodes
        self._depth = depth

    @classmethod
    def leaf(cls, weight) -> "Tree":
        return cls([Leaf(weight)])

    @classmethod
    def from_nested(cls, nested) -> "Tree":
        """Build from nested tuples: a number is a leaf, ``(condition, false_branch, true_branch)`` a node."""
        nodes: list = []

        def add(s) -> int:
            i = len(nodes)
            if isinstance(s, tuple):
                cond, f, t = s
                nodes.append(None)
                left = add(f)
                right = add(t)
                nodes[i] = Node(cond, left, right)
            else:
                nodes.append(Leaf(s))
            return i

        add(nested)
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def depth(self) -> int:
        return self._depth

    def conditions(self) -> Iterable[Condition]:
        for nd in self.nodes:
            if isinstance(nd, Node):
                yield nd.condition

    def leaves(self) -> list[int]:
        return [i for i, nd in enumerate(self.nodes) if isinstance(nd, Leaf)]

    def __eq__(self, other):
        return isinstance(other, Tree) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self):
        return f"Tree({len(self.nodes)} nodes, depth {self._depth})"


def eval_tree(tree: Tree, x: Sequence) -> Real:
    """Weight of the leaf reached by ``x``."""
    nodes = tree.nodes
    nd = nodes[0]
    while type(nd) is Node:
        c = nd.condition
        nd = nodes[nd.right if eval_condition(c, x[c.attribute]) else nd.left]
    return nd.weight


def leaf_of(tree: Tree, x: Sequence) -> int:
    nodes = tree.nodes
    i = 0
    while type(nodes[i]) is Node:
        nd = nodes[i]
        i = nd.right if eval_condition(nd.condition, x[nd.condition.attribute]) else nd.left
    return i


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    class_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ModelError("a forest needs at least one tree")

    @property
    def size(self) -> int:
        return sum(t.size for t in self.trees)

    def __len__(self) -> int:
        return len(self.trees)


def eval_forest(forest: Forest, x: Sequence) -> Real:
    total = 0
    for t in forest.trees:
        total = total + eval_tree(t, x)
    return total


@dataclass(frozen=True)
class BoostedTree:
    """A binary classifier (one forest) or an ``m``-class classifier (``m`` forests).

    Class ids are 0-based: ``{0, 1}`` in binary mode, ``0..m-1`` otherwise.
    """

    schema: AttributeSchema
    forests: tuple[Forest, ...]
    tie_class: int = 0

    def __post_init__(self):
        object.__setattr__(self, "forests", tuple(self.forests))
        m = len(self.forests)
        if m == 0:
            raise ModelError("a boosted tree needs at least one forest")
        if m > 1:
            ids = [f.class_id for f in self.forests]
            if ids != list(range(m)):
                raise ModelError(f"forest class ids must be 0..{m - 1} in order, got {ids}")
        if not 0 <= self.tie_class < self.n_classes:
            raise ModelError(f"tie_class {self.tie_class} outside [0, {self.n_classes})")
        for fi, f in enumerate(self.forests):
            for ti, t in enumerate(f.trees):
                self._check_tree(t, f"forest {fi}, tree {ti}")

    def _check_tree(self, tree: Tree, where: str) -> None:
        from .bounds import unsatisfiable_paths

        n = len(self.schema)
        for i, nd in enumerate(tree.nodes):
            if isinstance(nd, Node):
                c = nd.condition
                if not 0 <= c.attribute < n:
                    raise ModelError(f"{where}, node {i}: attribute index {c.attribute} out of range")
                a = self.schema[c.attribute]
                if _TEST_KIND[type(c.test)] is not a.kind:
                    raise ModelError(
                        f"{where}, node {i}: {type(c.test).__name__} test on {a.kind.value} attribute {a.name!r}"
                    )
                if isinstance(c.test, EqualsCategory) and c.test.category not in a.categories:
                    raise ModelError(f"{where}, node {i}: undeclared category {c.test.category!r} of {a.name!r}")
                if isinstance(c.test, GreaterThan):
                    th = c.test.threshold
                    if isinstance(th, bool) or not isinstance(th, Real) or th != th or abs(th) == float("inf"):
                        raise ModelError(f"{where}, node {i}: bad threshold {th!r}")
        bad = unsatisfiable_paths(tree, self.schema)
        if bad:
            node, path = bad[0]
            desc = " and ".join(
                ("" if out else "not ") + tree.nodes[k].condition.describe(self.schema) for k, out in path
            )
            raise ModelError(f"{where}: unsatisfiable path to node {node}: {desc}")

    @property
    def binary(self) -> bool:
        return len(self.forests) == 1

    @property
    def n_classes(self) -> int:
        return 2 if len(self.forests) == 1 else len(self.forests)

    @property
    def n_attributes(self) -> int:
        return len(self.schema)

    @property
    def size(self) -> int:
        return sum(f.size for f in self.forests)

    def trees(self) -> Iterable[tuple[int, Tree]]:
        for j, f in enumerate(self.forests):
            for t in f.trees:
                yield j, t

    def weights(self, x: Sequence) -> list:
        return [eval_forest(f, x) for f in self.forests]

    def classify(self, x: Sequence) -> int:
        return classify(self, x)

    # vectorized evaluation -------------------------------------------------

    def forest_weights_batch(self, X: np.ndarray) -> np.ndarray:
        """Forest weights for each row of an encoded matrix, shape ``(m, N)``.

        Tree weights are accumulated in tree order, matching :func:`eval_forest`.
        """
        compiled = self.__dict__.get("_compiled")
        if compiled is None:
            compiled = [[_CompiledTree(t, self.schema) for t in f.trees] for f in self.forests]
            object.__setattr__(self, "_compiled", compiled)
        out = []
        for trees in compiled:
            total = trees[0].evaluate(X)
            for ct in trees[1:]:
                total = total + ct.evaluate(X)
            out.append(total)
        return np.stack(out)

    def classify_batch(self, X: np.ndarray) -> np.ndarray:
        return decide_batch(self.forest_weights_batch(X), self.binary, self.tie_class)


def classify(bt: BoostedTree, x: Sequence) -> int:
    """Binary: 1 iff the forest weight is > 0. Multi-class: the unique arg-max forest;
    ``tie_class`` if all weights are equal; the smallest maximizing index otherwise."""
    if bt.binary:
        return 1 if eval_forest(bt.forests[0], x) > 0 else 0
    return decide(bt.weights(x), bt.tie_class)


def decide(weights: Sequence, tie_class: int) -> int:
    best = max(weights)
    winners = [j for j, w in enumerate(weights) if w == best]
    if len(winners) == len(weights):
        return tie_class
    return winners[0]


def decide_batch(W: np.ndarray, binary: bool, tie_class: int) -> np.ndarray:
    if binary:
        return (W[0] > 0).astype(np.int64)
    best = W.max(axis=0)
    is_max = W == best
    count = is_max.sum(axis=0)
    first = np.argmax(is_max, axis=0)
    return np.where(count == W.shape[0], tie_class, first).astype(np.int64)


# --- terms ------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """The characteristics ``{(A_i = x_i) : i in kept}`` of an instance ``x``."""

    instance: tuple
    kept: frozenset

    def __post_init__(self):
        object.__setattr__(self, "instance", tuple(self.instance))
        object.__setattr__(self, "kept", frozenset(self.kept))
        n = len(self.instance)
        if any(not 0 <= i < n for i in self.kept):
            raise ValueError(f"kept indices {sorted(self.kept)} not within [0, {n})")

    @classmethod
    def full(cls, x: Sequence) -> "Term":
        return cls(tuple(x), frozenset(range(len(x))))

    @classmethod
    def empty(cls, x: Sequence) -> "Term":
        return cls(tuple(x), frozenset())

    def without(self, i: int) -> "Term":
        return Term(self.instance, self.kept - {i})

    def __len__(self) -> int:
        return len(self.kept)

    def __contains__(self, i) -> bool:
        return i in self.kept

    def sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.kept))

    def extends(self, y: Sequence) -> bool:
        """True iff ``y`` agrees with this term on every kept attribute."""
        return all(y[i] == self.instance[i] for i in self.kept)

    def describe(self, schema: AttributeSchema) -> dict:
        return {schema[i].name: self.instance[i] for i in self.sorted()}


# --- compiled trees for batch evaluation ------------------------------------

_GT, _EQ = 0, 1


class _CompiledTree:
    __slots__ = ("attr", "kind", "param", "left", "right", "value", "depth")

    def __init__(self, tree: Tree, schema: AttributeSchema):
        k = len(tree.nodes)
        self.attr = np.full(k, -1, dtype=np.int64)
        self.kind = np.zeros(k, dtype=np.int8)
        self.param = np.zeros(k, dtype=np.float64)
        self.left = np.arange(k, dtype=np.int64)
        self.right = np.arange(k, dtype=np.int64)
        weights = [nd.weight if isinstance(nd, Leaf) else 0.0 for nd in tree.nodes]
        dtype = np.float64 if all(type(w) in (float, int) for w in weights) else object
        self.value = np.array(weights, dtype=dtype)
        for i, nd in enumerate(tree.nodes):
            if isinstance(nd, Node):
                c = nd.condition
                self.attr[i] = c.attribute
                self.left[i], self.right[i] = nd.left, nd.right
                if isinstance(c.test, GreaterThan):
                    self.kind[i], self.param[i] = _GT, c.test.threshold
                elif isinstance(c.test, EqualsCategory):
                    self.kind[i] = _EQ
                    self.param[i] = schema[c.attribute].categories.index(c.test.category)
                else:
                    self.kind[i], self.param[i] = _EQ, 1.0
        self.depth = tree.depth

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        idx = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        for _ in range(self.depth):
            a = self.attr[idx]
            internal = a >= 0
            col = X[rows, np.where(internal, a, 0)]
            p = self.param[idx]
            go = np.where(self.kind[idx] == _GT, col > p, col == p)
            idx = np.where(internal, np.where(go, self.right[idx], self.left[idx]), idx)
        return self.value[idx]

