"""Independent reference routines for the tests: plain enumeration of instances
and direct evaluation, sharing no code with the bounds or oracle modules."""
import itertools
import math
from pathlib import Path

import numpy as np
import pytest

from boostexplain.model import AttrKind, GreaterThan, Term, eval_tree

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
X_RUN = (4.0, 3.0, "b", 1)  # the running example's instance


def value_grid(bt, i):
    """Every value of attribute ``i`` worth trying: each threshold, points between and beyond
    them, every declared category, both Booleans."""
    a = bt.schema[i]
    if a.kind is AttrKind.CATEGORICAL:
        return list(a.categories)
    if a.kind is AttrKind.BOOLEAN:
        return [0, 1]
    ths = sorted({c.test.threshold for _, tree in bt.trees() for c in tree.conditions()
                  if c.attribute == i and isinstance(c.test, GreaterThan)})
    if not ths:
        return [0.0]
    vals = set(ths)
    vals.add(ths[0] - 1.0)
    vals.add(ths[-1] + 1.0)
    vals.update((a + b) / 2 for a, b in zip(ths, ths[1:]))
    vals.update(math.nextafter(t, math.inf) for t in ths)
    return sorted(vals)


def grid_size(bt, t: Term) -> int:
    return math.prod(1 if i in t.kept else len(value_grid(bt, i)) for i in range(len(t.instance)))


def extensions(bt, t: Term, cap=100_000):
    """All grid instances agreeing with ``t`` on its kept attributes."""
    x = t.instance
    axes = [[x[i]] if i in t.kept else value_grid(bt, i) for i in range(len(x))]
    if math.prod(len(a) for a in axes) > cap:
        pytest.skip("extension grid too large")
    return itertools.product(*axes)


def margin(bt, target, y):
    w = bt.weights(y)
    if bt.binary:
        return w[0] if target == 1 else -w[0]
    return w[target] - max(v for k, v in enumerate(w) if k != target)


def grid_margin_min(bt, x, t):
    target = bt.classify(x)
    return min(margin(bt, target, y) for y in extensions(bt, t))


def grid_abductive(bt, x, t) -> bool:
    target = bt.classify(x)
    return all(bt.classify(y) == target for y in extensions(bt, t))


def tree_range(bt, tree, t):
    ws = [eval_tree(tree, y) for y in extensions(bt, t)]
    return min(ws), max(ws)


def corpus(seed, count, **kw):
    """``count`` (model, instance) pairs from the small random generator."""
    from boostexplain.generators import random_instance, random_model

    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        bt = random_model(rng, n_classes=int(rng.choice([2, 2, 3])), **kw)
        out.append((bt, random_instance(rng, bt)))
    return out
