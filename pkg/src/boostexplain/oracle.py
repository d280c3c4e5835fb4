"""Exact implicant test: is a term an abductive explanation of an instance?

The conditions of a boosted tree cut every attribute domain into finitely many
cells (threshold intervals, tested categories plus the untested rest, Boolean
values); the classifier is constant on each product of cells. Deciding the
test is coNP-complete, so both procedures here are exponential in the worst
case:

* ``is_abductive_bruteforce`` enumerates every cell compatible with the term.
* ``is_abductive`` runs a depth-first branch-and-bound that minimizes the
  classification margin over restrictions extending the term, bounding it with
  per-tree worst/best weights.
"""
from __future__ import annotations

import bisect
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import Interval, representative
from .model import (
    AttrKind,
    BoostedTree,
    EqualsCategory,
    GreaterThan,
    Node,
    Term,
    decide,
    decide_batch,
)

LOOKAHEAD = 16  # branching candidates scored per node
MIX = 0.2       # weight of the better child's bound gain in a split's score
PROVED, DISPROVED, TIMEOUT = "proved", "disproved", "timeout"
BRUTEFORCE_CAP = 1 << 24
CUT_TABLE_CAP = 1 << 24  # entries of the precomputed split table


class CapExceeded(RuntimeError):
    """The brute-force enumeration would exceed its cell cap."""


@dataclass(frozen=True)
class AttributeCells:
    kind: AttrKind
    thresholds: tuple = ()   # numerical: sorted distinct thresholds
    tested: tuple = ()       # categorical: tested labels, declared order
    other: tuple = ()        # categorical: untested declared labels (one cell if any)
    tested_bool: bool = False

    @property
    def n_cells(self) -> int:
        if self.kind is AttrKind.NUMERICAL:
            return len(self.thresholds) + 1
        if self.kind is AttrKind.CATEGORICAL:
            return len(self.tested) + (1 if self.other else 0)
        return 2 if self.tested_bool else 1

    @property
    def ranged(self) -> bool:
        return self.kind is not AttrKind.CATEGORICAL

    def cell_of(self, v) -> int:
        if self.kind is AttrKind.NUMERICAL:
            return bisect.bisect_left(self.thresholds, v)
        if self.kind is AttrKind.CATEGORICAL:
            return self.tested.index(v) if v in self.tested else len(self.tested)
        return int(v) if self.tested_bool else 0

    def interval(self, cell: int) -> Interval:
        th = self.thresholds
        lo = th[cell - 1] if cell > 0 else -math.inf
        hi = th[cell] if cell < len(th) else math.inf
        return Interval(lo, hi)

    def representative(self, cell: int):
        if self.kind is AttrKind.NUMERICAL:
            return representative(self.interval(cell))
        if self.kind is AttrKind.CATEGORICAL:
            return self.tested[cell] if cell < len(self.tested) else self.other[0]
        return cell


@dataclass(frozen=True)
class ConditionUniverse:
    cells: tuple

    def __len__(self):
        return len(self.cells)

    def __getitem__(self, i) -> AttributeCells:
        return self.cells[i]

    def n_cells(self) -> list:
        return [c.n_cells for c in self.cells]


def build_universe(bt: BoostedTree) -> ConditionUniverse:
    n = len(bt.schema)
    thresholds = [set() for _ in range(n)]
    tested = [set() for _ in range(n)]
    for _, tree in bt.trees():
        for c in tree.conditions():
            if isinstance(c.test, GreaterThan):
                thresholds[c.attribute].add(c.test.threshold)
            elif isinstance(c.test, EqualsCategory):
                tested[c.attribute].add(c.test.category)
            else:
                tested[c.attribute].add(1)
    cells = []
    for i, a in enumerate(bt.schema.attributes):
        if a.kind is AttrKind.NUMERICAL:
            cells.append(AttributeCells(a.kind, thresholds=tuple(sorted(thresholds[i]))))
        elif a.kind is AttrKind.CATEGORICAL:
            cells.append(AttributeCells(
                a.kind,
                tested=tuple(k for k in a.categories if k in tested[i]),
                other=tuple(k for k in a.categories if k not in tested[i]),
            ))
        else:
            cells.append(AttributeCells(a.kind, tested_bool=bool(tested[i])))
    return ConditionUniverse(tuple(cells))


@dataclass
class OracleVerdict:
    """Outcome of an implicant test.

    ``optimal_margin`` is the minimum over extensions of the term of the
    margin ``w(F^i) - max_{j != i} w(F^j)`` (binary: ``w(F)`` for a positive
    instance, ``-w(F)`` for a negative one). It is exact when the verdict is
    ``proved`` and the search ran in exact-margin mode; for ``disproved`` it
    is the margin of the returned counterexample; otherwise None.
    """

    abductive: Optional[bool]
    status: str
    counterexample: Optional[tuple] = None
    optimal_margin: object = None
    nodes_explored: int = 0
    elapsed: float = 0.0

    def __post_init__(self):
        if isinstance(self.optimal_margin, np.generic):
            self.optimal_margin = self.optimal_margin.item()


@dataclass(frozen=True)
class Budget:
    max_nodes: int = 10_000_000
    max_seconds: float = 100.0
    deadline: Optional[float] = None  # absolute time.monotonic() value

    def stop_time(self, start: float) -> float:
        end = start + self.max_seconds
        return end if self.deadline is None else min(end, self.deadline)


class _Goal:
    """Which margin to minimize and when a cell is a counterexample."""

    def __init__(self, bt: BoostedTree, x):
        self.bt = bt
        self.binary = bt.binary
        self.target = bt.classify(x)
        # a restriction whose margin lower bound is above `safe`
        # (or equal to it, when `safe_inclusive`) holds no counterexample
        self.safe_inclusive = self.binary and self.target == 0

    def score(self, weights):
        if self.binary:
            return weights[0] if self.target == 1 else -weights[0]
        i = self.target
        return weights[i] - max(w for k, w in enumerate(weights) if k != i)

    def lower_bound(self, low_sums, high_sums):
        if self.binary:
            return low_sums[0] if self.target == 1 else -high_sums[0]
        i = self.target
        return low_sums[i] - max(w for k, w in enumerate(high_sums) if k != i)

    def lower_bound_rows(self, low: np.ndarray, high: np.ndarray) -> np.ndarray:
        """``lower_bound`` over the rows of ``(k, m)`` float arrays."""
        if self.binary:
            return low[:, 0] if self.target == 1 else -high[:, 0]
        i = self.target
        return low[:, i] - np.delete(high, i, axis=1).max(axis=1)

    def safe(self, lb) -> bool:
        return lb >= 0 if self.safe_inclusive else lb > 0

    def is_counterexample(self, weights) -> bool:
        if self.binary:
            return (1 if weights[0] > 0 else 0) != self.target
        return decide(weights, self.bt.tie_class) != self.target


# --- brute force --------------------------------------------------------------

def _free_relevant(universe: ConditionUniverse, t: Term) -> list:
    return [i for i in range(len(universe)) if i not in t.kept and universe[i].n_cells > 1]


def is_abductive_bruteforce(bt: BoostedTree, x: Sequence, t: Term, cap: int = BRUTEFORCE_CAP,
                            chunk: int = 1 << 15) -> OracleVerdict:
    """Decide the implicant test by evaluating one representative instance per cell."""
    start = time.perf_counter()
    x = bt.schema.check_instance(x)
    _check_subterm(t, x)
    universe = build_universe(bt)
    goal = _Goal(bt, x)
    free = _free_relevant(universe, t)
    radix = [universe[i].n_cells for i in free]
    total = math.prod(radix)
    if total > cap:
        raise CapExceeded(f"{total} cells exceed the brute-force cap {cap}")
    base = bt.schema.encode([x])[0]
    reps = []
    for i in free:
        vals = [universe[i].representative(c) for c in range(universe[i].n_cells)]
        reps.append(vals)
    enc = [bt.schema.encode([_with(x, i, v) for v in vals])[:, i] for i, vals in zip(free, reps)]
    strides = []
    s = 1
    for r in reversed(radix):
        strides.append(s)
        s *= r
    strides.reverse()
    best = None
    for lo in range(0, total, chunk):
        k = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        digits = [(k // st) % r for st, r in zip(strides, radix)]
        X = np.repeat(base[None, :], len(k), axis=0)
        for col, (i, e) in enumerate(zip(free, enc)):
            X[:, i] = e[digits[col]]
        W = bt.forest_weights_batch(X)
        cls = decide_batch(W, bt.binary, bt.tie_class)
        bad = np.flatnonzero(cls != goal.target)
        if bad.size:
            row = int(bad[0])
            cex = list(x)
            for col, i in enumerate(free):
                cex[i] = reps[col][int(digits[col][row])]
            cex = tuple(cex)
            return OracleVerdict(False, DISPROVED, cex, goal.score(bt.weights(cex)),
                                 int(lo + row + 1), time.perf_counter() - start)
        scores = _batch_scores(W, goal)
        m = scores.min()
        best = m if best is None or m < best else best
    return OracleVerdict(True, PROVED, None, best, total, time.perf_counter() - start)


def _batch_scores(W: np.ndarray, goal: _Goal) -> np.ndarray:
    if goal.binary:
        return W[0] if goal.target == 1 else -W[0]
    others = np.delete(W, goal.target, axis=0)
    return W[goal.target] - others.max(axis=0)


def _with(x, i, v):
    y = list(x)
    y[i] = v
    return y


def _check_subterm(t: Term, x) -> None:
    if tuple(t.instance) != tuple(x):
        raise ValueError("term is not a subset of the instance's characteristics")


# --- branch and bound -----------------------------------------------------------

class CompiledEnsemble:
    """Leaves of every tree with their paths expressed as per-attribute cell boxes.

    A leaf is reachable under a restriction iff, for every attribute, its box
    intersects the restriction's allowed cells. Numerical and Boolean boxes
    are cell ranges ``[lo, hi]``; categorical boxes are cell bitmasks.
    """

    def __init__(self, bt: BoostedTree, universe: Optional[ConditionUniverse] = None):
        self.bt = bt
        self.universe = universe or build_universe(bt)
        uni = self.universe
        n = len(uni)
        self.n_cells = uni.n_cells()
        self.full = [(0, c - 1) if uni[i].ranged else (1 << c) - 1 for i, c in enumerate(self.n_cells)]
        values: list = []
        starts: list = []
        self.forest_spans = []
        boxes: list = [dict() for _ in range(n)]
        g = 0
        for f in bt.forests:
            span_start = g
            for tree in f.trees:
                starts.append(len(values))
                self._collect(tree, uni, values, boxes)
                g += 1
            self.forest_spans.append((span_start, g))
        dtype = np.float64 if all(type(w) in (float, int) for w in values) else object
        self.values = np.array(values, dtype=dtype)
        self.starts = np.array(starts, dtype=np.int64)
        self.n_leaves = len(values)
        self.idx = []
        self.box_lo = []
        self.box_hi = []
        self.box_mask = []
        for i in range(n):
            lids = sorted(boxes[i])
            self.idx.append(np.array(lids, dtype=np.int64))
            if uni[i].ranged:
                self.box_lo.append(np.array([boxes[i][l][0] for l in lids], dtype=np.int64))
                self.box_hi.append(np.array([boxes[i][l][1] for l in lids], dtype=np.int64))
                self.box_mask.append(None)
            else:
                mdt = np.int64 if self.n_cells[i] < 63 else object
                self.box_mask.append(np.array([boxes[i][l] for l in lids], dtype=mdt))
                self.box_lo.append(None)
                self.box_hi.append(None)
        self.relevant = [i for i in range(n) if len(self.idx[i]) and self.n_cells[i] > 1]
        ends = np.append(self.starts[1:], self.n_leaves)
        tree_of = np.repeat(np.arange(len(starts)), ends - self.starts)
        forest_of = np.concatenate([np.full(b - a, k) for k, (a, b) in enumerate(self.forest_spans)])
        self.trees_of = [np.unique(tree_of[ix]) for ix in self.idx]
        self.incidence = np.zeros((n, len(starts)))  # attribute x tree: 1 if the tree tests it
        for i, trees in enumerate(self.trees_of):
            self.incidence[i, trees] = 1.0
        # leaves of the trees testing each attribute, for incremental bounds
        m = len(self.forest_spans)
        self.aff_leaves, self.aff_starts, self.aff_onehot, self.aff_box = [], [], [], []
        for i, trees in enumerate(self.trees_of):
            sizes = ends[trees] - self.starts[trees]
            leaves = (np.concatenate([np.arange(self.starts[g], ends[g]) for g in trees])
                      if len(trees) else np.zeros(0, dtype=np.int64))
            self.aff_leaves.append(leaves)
            self.aff_starts.append(np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64))
            onehot = np.zeros((len(trees), m))
            onehot[np.arange(len(trees)), forest_of[trees]] = 1.0
            self.aff_onehot.append(onehot)
            pos = np.searchsorted(self.idx[i], leaves)
            mine = np.isin(leaves, self.idx[i])
            if uni[i].ranged:
                blo = np.zeros(len(leaves), dtype=np.int64)
                bhi = np.full(len(leaves), self.n_cells[i] - 1, dtype=np.int64)
                blo[mine] = self.box_lo[i][pos[mine]]
                bhi[mine] = self.box_hi[i][pos[mine]]
                self.aff_box.append((blo, bhi))
            elif self.box_mask[i].dtype != object:
                mask = np.full(len(leaves), self.full[i], dtype=np.int64)
                mask[mine] = self.box_mask[i][pos[mine]]
                self.aff_box.append(mask)
            else:
                self.aff_box.append(None)
        self.vectorized = self.values.dtype != object
        self.pos_inf = math.inf
        self.neg_inf = -math.inf
        self.tree_of_leaf = tree_of
        self.forest_of_tree = forest_of
        self.cut_table = self._cut_table() if self.vectorized else None

    def _cut_table(self):
        """Every cut of every ranged attribute, laid out over the leaves of the trees testing it.

        The block of attribute ``i`` holds one row of ``len(aff_leaves[i])``
        entries per cut ``c`` (left side: cells ``<= c``), so the cuts allowed
        at a node form one contiguous slice. None when the table would be too big.
        """
        blocks = [(i, self.n_cells[i] - 1, len(self.aff_leaves[i])) for i in self.relevant
                  if self.universe[i].ranged]
        if sum(k * width for _, k, width in blocks) > CUT_TABLE_CAP:
            return None
        offset = {}
        leaf, okl, okr, group, row = [], [], [], [], []
        pos = 0
        for i, k, width in blocks:
            offset[i] = (pos, width)
            blo, bhi = self.aff_box[i]
            first = np.zeros(width, dtype=bool)
            first[self.aff_starts[i]] = True
            head = np.zeros(width, dtype=bool)
            head[0] = True
            for c in range(k):
                leaf.append(self.aff_leaves[i])
                okl.append(blo <= c)
                okr.append(bhi > c)
                group.append(first)
                row.append(head)
            pos += k * width
        cat = (lambda parts, dt: np.concatenate(parts) if parts else np.zeros(0, dtype=dt))
        return {"offset": offset, "leaf": cat(leaf, np.int64), "ok": (cat(okl, bool), cat(okr, bool)),
                "group": cat(group, bool), "row": cat(row, bool)}

    def _collect(self, tree, uni, values, boxes) -> None:
        nodes = tree.nodes
        stack = [(0, {})]
        while stack:
            i, box = stack.pop()
            nd = nodes[i]
            if type(nd) is not Node:
                lid = len(values)
                values.append(nd.weight)
                for a, b in box.items():
                    boxes[a][lid] = b
                continue
            c = nd.condition
            a = c.attribute
            cells = uni[a]
            cur = box.get(a, self.full[a])
            if isinstance(c.test, GreaterThan):
                k = cells.thresholds.index(c.test.threshold)
                f_box, t_box = (cur[0], min(cur[1], k)), (max(cur[0], k + 1), cur[1])
            elif isinstance(c.test, EqualsCategory):
                bit = 1 << cells.tested.index(c.test.category)
                f_box, t_box = cur & ~bit, cur & bit
            else:
                f_box, t_box = (cur[0], min(cur[1], 0)), (max(cur[0], 1), cur[1])
            for child, b in ((nd.left, f_box), (nd.right, t_box)):
                nb = dict(box)
                nb[a] = b
                stack.append((child, nb))

    # restriction helpers --------------------------------------------------

    def root(self, t: Term) -> list:
        r = list(self.full)
        for i in t.kept:
            c = self.universe[i].cell_of(t.instance[i])
            r[i] = (c, c) if self.universe[i].ranged else 1 << c
        return r

    def cells(self, r, i) -> list:
        v = r[i]
        if self.universe[i].ranged:
            return list(range(v[0], v[1] + 1))
        return [b for b in range(self.n_cells[i]) if v >> b & 1]

    def constraint(self, i, cells: list):
        if self.universe[i].ranged:
            return (cells[0], cells[-1])
        m = 0
        for b in cells:
            m |= 1 << b
        return m

    def splits(self, r, i) -> list:
        """Every pair of restrictions splitting the allowed cells of attribute ``i`` in two."""
        cells = self.cells(r, i)
        return [(self.constraint(i, cells[:h]), self.constraint(i, cells[h:])) for h in range(1, len(cells))]

    def reach_update(self, reach: np.ndarray, i: int, c) -> np.ndarray:
        idx = self.idx[i]
        out = reach.copy()
        if len(idx):
            if self.universe[i].ranged:
                ok = (self.box_lo[i] <= c[1]) & (self.box_hi[i] >= c[0])
            else:
                ok = (self.box_mask[i] & c) != 0
            out[idx] &= ok.astype(bool)
        return out

    def reach(self, r) -> np.ndarray:
        reach = np.ones(self.n_leaves, dtype=bool)
        for i in range(len(r)):
            if r[i] != self.full[i]:
                reach = self.reach_update(reach, i, r[i])
        return reach

    def tree_bounds(self, reach: np.ndarray):
        lo = np.minimum.reduceat(np.where(reach, self.values, self.pos_inf), self.starts)
        hi = np.maximum.reduceat(np.where(reach, self.values, self.neg_inf), self.starts)
        return lo, hi

    def split_bounds(self, reach: np.ndarray, r, i: int, lo, hi, lo_sums, hi_sums):
        """Approximate forest sums of both children of every binary split of attribute ``i``.

        A split keeps the first ``h`` allowed cells on one side, ``h = 1..k``.
        Only the trees testing ``i`` are recomputed, all split points at once;
        float summation order differs from ``forest_sums``, so the result is
        for ranking splits only. Returns ``(splits, sides)`` where ``sides``
        holds ``(low_sums, high_sums)`` arrays of shape ``(k, m)`` per side.
        """
        cells = self.cells(r, i)
        splits = [(self.constraint(i, cells[:h]), self.constraint(i, cells[h:])) for h in range(1, len(cells))]
        leaves = self.aff_leaves[i]
        vals = self.values[leaves]
        rch = reach[leaves]
        box = self.aff_box[i]
        if self.universe[i].ranged:
            cut = np.arange(cells[0], cells[-1])[:, None]  # left side ends at cut
            ok = (box[0][None, :] <= cut, box[1][None, :] > cut)
        else:
            left = np.array([c[0] for c in splits], dtype=np.int64)[:, None]
            right = np.array([c[1] for c in splits], dtype=np.int64)[:, None]
            ok = ((box[None, :] & left) != 0, (box[None, :] & right) != 0)
        trees = self.trees_of[i]
        st = self.aff_starts[i]
        sides = []
        for side_ok in ok:
            mask = rch[None, :] & side_ok
            new_lo = np.minimum.reduceat(np.where(mask, vals, self.pos_inf), st, axis=1)
            new_hi = np.maximum.reduceat(np.where(mask, vals, self.neg_inf), st, axis=1)
            onehot = self.aff_onehot[i]
            sides.append((np.asarray(lo_sums, dtype=float) + (new_lo - lo[trees]) @ onehot,
                          np.asarray(hi_sums, dtype=float) + (new_hi - hi[trees]) @ onehot))
        return splits, sides

    def cut_bounds(self, reach: np.ndarray, r, cands: list, lo, hi, lo_sums, hi_sums,
                   want_low: bool = True, want_high: bool = True):
        """``split_bounds`` for several ranged attributes at once, from the cut table.

        Rows are ordered by attribute, then cut. Returns the row count of each
        attribute and, per side, ``(low_sums, high_sums)`` arrays of shape
        ``(rows, m)``; a side not wanted is None.
        """
        tab = self.cut_table
        first = []
        counts = []
        for i in cands:
            pos, width = tab["offset"][i]
            c0, c1 = r[i]
            first.append(pos + c0 * width)
            counts.append((c1 - c0, width))
        lengths = np.array([k * w for k, w in counts], dtype=np.int64)
        total = int(lengths.sum())
        shift = np.repeat(np.array(first, dtype=np.int64) - (np.cumsum(lengths) - lengths), lengths)
        idx = shift + np.arange(total)
        leaves = tab["leaf"][idx]
        vals = self.values[leaves]
        rch = reach[leaves]
        gs = np.flatnonzero(tab["group"][idx])
        gtree = self.tree_of_leaf[leaves[gs]]
        rows = np.cumsum(tab["row"][idx[gs]]) - 1
        n_rows = int(sum(k for k, _ in counts))
        m = len(self.forest_spans)
        key = rows * m + self.forest_of_tree[gtree]
        sides = []
        for ok in tab["ok"]:
            mask = rch & ok[idx]
            low = high = None
            if want_low:
                new = np.minimum.reduceat(np.where(mask, vals, self.pos_inf), gs)
                low = np.asarray(lo_sums, dtype=float) + np.bincount(
                    key, weights=new - lo[gtree], minlength=n_rows * m).reshape(n_rows, m)
            if want_high:
                new = np.maximum.reduceat(np.where(mask, vals, self.neg_inf), gs)
                high = np.asarray(hi_sums, dtype=float) + np.bincount(
                    key, weights=new - hi[gtree], minlength=n_rows * m).reshape(n_rows, m)
            sides.append((low, high))
        return [k for k, _ in counts], sides

    def forest_sums(self, per_tree: np.ndarray) -> list:
        # sequential accumulation, same order as eval_forest
        return [np.cumsum(per_tree[a:b])[-1] for a, b in self.forest_spans]

    def instance(self, r, t: Term) -> tuple:
        y = list(t.instance)
        for i in self.relevant:
            if i not in t.kept:
                y[i] = self.universe[i].representative(self.cells(r, i)[0])
        return tuple(y)


@dataclass
class _Node:
    r: list
    reach: np.ndarray
    lb: object
    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)
    lo_sums: list = field(repr=False)
    hi_sums: list = field(repr=False)


def is_abductive(bt: BoostedTree, x: Sequence, t: Term, budget: Budget = Budget(),
                 exact_margin: bool = False, compiled: Optional[CompiledEnsemble] = None) -> OracleVerdict:
    """Branch-and-bound implicant test.

    The root bound is the tree-specific test, so terms passing it are
    proved without branching. With ``exact_margin`` the search also proves the
    optimal margin (it then prunes only what cannot beat the incumbent);
    otherwise it stops as soon as every open branch is safe.
    """
    start = time.perf_counter()
    x = bt.schema.check_instance(x)
    _check_subterm(t, x)
    goal = _Goal(bt, x)
    ce = compiled if compiled is not None and compiled.bt is bt else CompiledEnsemble(bt)
    stop_at = budget.stop_time(time.monotonic())
    free = [i for i in ce.relevant if i not in t.kept]
    x_cell = {i: ce.universe[i].cell_of(x[i]) for i in free}
    incumbent = goal.score(bt.weights(x)) if exact_margin else None

    def make(r, reach):
        lo, hi = ce.tree_bounds(reach)
        lo_sums, hi_sums = ce.forest_sums(lo), ce.forest_sums(hi)
        return _Node(r, reach, goal.lower_bound(lo_sums, hi_sums), lo, hi, lo_sums, hi_sums)

    fast = ce.vectorized
    want_low = not goal.binary or goal.target == 1
    want_high = not goal.binary or goal.target == 0

    def prunable(node) -> bool:
        if not goal.safe(node.lb):
            return False
        return incumbent is None or node.lb >= incumbent

    r0 = ce.root(t)
    root = make(r0, ce.reach(r0))
    if incumbent is None and goal.safe(root.lb):
        # the root bound is the tree-specific test
        return OracleVerdict(True, PROVED, None, None, 0, time.perf_counter() - start)
    stack = [root]
    explored = 0
    while stack:
        if explored >= budget.max_nodes or (explored & 63 == 0 and time.monotonic() > stop_at):
            return OracleVerdict(None, TIMEOUT, None, None, explored, time.perf_counter() - start)
        node = stack.pop()
        explored += 1
        if prunable(node):
            continue
        branchable = [i for i in free if _multi(node.r[i], ce, i)]
        if not branchable or bool(np.all(node.lo == node.hi)):
            # every tree has a single reachable leaf: the margin is constant here
            weights = ce.forest_sums(node.lo)
            if goal.is_counterexample(weights):
                cex = ce.instance(node.r, t)
                if bt.classify(cex) == goal.target:
                    raise RuntimeError("internal error: counterexample does not flip the class")
                return OracleVerdict(False, DISPROVED, cex, goal.score(weights), explored,
                                     time.perf_counter() - start)
            if incumbent is not None:
                s = goal.score(weights)
                if s < incumbent:
                    incumbent = s
            continue
        if len(branchable) > LOOKAHEAD:
            spread = ce.incidence[branchable] @ (node.hi - node.lo).astype(float)
            top = np.argsort(-spread, kind="stable")[:LOOKAHEAD]
            branchable = [branchable[k] for k in top]
        # score every binary split of the candidates by a one-step lookahead
        branchable.sort()
        batched = {}
        if fast and ce.cut_table is not None:
            ranged = [i for i in branchable if ce.universe[i].ranged]
            if ranged:
                counts, sides = ce.cut_bounds(node.reach, node.r, ranged, node.lo, node.hi,
                                              node.lo_sums, node.hi_sums, want_low, want_high)
                d_left = goal.lower_bound_rows(*sides[0]) - node.lb
                d_right = goal.lower_bound_rows(*sides[1]) - node.lb
                gains = np.minimum(d_left, d_right) + MIX * np.maximum(d_left, d_right)
                a = 0
                for i, k in zip(ranged, counts):
                    h = int(np.argmax(gains[a:a + k]))
                    c0 = node.r[i][0]
                    batched[i] = (gains[a + h], ((c0, c0 + h), (c0 + h + 1, node.r[i][1])))
                    a += k
        best = None
        for i in branchable:
            if i in batched:
                gain, split = batched[i]
            elif fast and ce.aff_box[i] is not None:
                splits, sides = ce.split_bounds(node.reach, node.r, i, node.lo, node.hi,
                                                node.lo_sums, node.hi_sums)
                d_left = goal.lower_bound_rows(*sides[0]) - node.lb
                d_right = goal.lower_bound_rows(*sides[1]) - node.lb
                gains = np.minimum(d_left, d_right) + MIX * np.maximum(d_left, d_right)
                h = int(np.argmax(gains))
                gain, split = gains[h], splits[h]
            else:
                gain = split = None
                for halves in ce.splits(node.r, i):
                    d = []
                    for c in halves:
                        r = list(node.r)
                        r[i] = c
                        d.append(make(r, ce.reach_update(node.reach, i, c)).lb - node.lb)
                    g = min(d) + MIX * max(d)
                    if gain is None or g > gain:
                        gain, split = g, halves
            if best is None or gain > best[0]:
                best = (gain, i, split)
        _, i, split = best
        kids = []
        for c in split:
            r = list(node.r)
            r[i] = c
            kids.append(make(r, ce.reach_update(node.reach, i, c)))
        first, second = kids
        # most promising child first; on ties, x's own cell last
        key = [(k.lb, _holds_cell(k.r[i], ce, i, x_cell[i])) for k in kids]
        order = [first, second] if key[0] <= key[1] else [second, first]
        for k in reversed(order):
            if not prunable(k):
                stack.append(k)
    margin = incumbent if exact_margin else None
    return OracleVerdict(True, PROVED, None, margin, explored, time.perf_counter() - start)


def _multi(c, ce: CompiledEnsemble, i) -> bool:
    if ce.universe[i].ranged:
        return c[1] > c[0]
    return c & (c - 1) != 0


def _holds_cell(c, ce: CompiledEnsemble, i, cell) -> bool:
    if ce.universe[i].ranged:
        return c[0] <= cell <= c[1]
    return bool(c >> cell & 1)
