"""Reading and writing models and instances.

Native JSON model::

    {"format": "boostexplain", "version": 1, "tie_class": 0,
     "attributes": [{"name": "A1", "kind": "numerical"},
                    {"name": "A3", "kind": "categorical", "categories": ["b", "w"]},
                    {"name": "A4", "kind": "boolean"}],
     "forests": [{"class": 0, "trees": [{"nodes": [
         {"attribute": "A4", "test": "is_true", "false": 1, "true": 2},
         {"leaf": -0.5},
         {"leaf": "3/10"}]}]}]}

Node tests are ``{"test": "gt", "threshold": t}``, ``{"test": "eq", "category": c}``
or ``{"test": "is_true"}``; ``false``/``true`` index the children in ``nodes``.
A leaf weight written as a string is read as an exact rational.

XGBoost models are read from the JSON trees dump (``Booster.get_dump(dump_format="json")``),
either as the bare array of trees or wrapped as
``{"trees": [...], "num_class": m, "base_score": b, "feature_names": [...]}``
with ``base_score`` in margin space, a number or one number per class.
"""
from __future__ import annotations

import csv
import json
import math
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

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
    ModelError,
    Node,
    SchemaError,
    Tree,
    Term,
)

NATIVE, XGB = "native", "xgb"


class ModelFormatError(ValueError):
    """A model or instance file cannot be parsed; the message names the offending location."""


# --- native JSON ------------------------------------------------------------------

def _weight_in(v, where):
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError):
            raise ModelFormatError(f"{where}: bad rational weight {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelFormatError(f"{where}: leaf weight must be a number, got {v!r}")
    return v


def _weight_out(w):
    if isinstance(w, Fraction):
        text = str(Decimal(w.numerator) / Decimal(w.denominator))
        return text if Fraction(text) == w else str(w)  # decimal only when exact
    return w


def _tree_in(obj, schema: AttributeSchema, where: str) -> Tree:
    if not isinstance(obj, dict) or not isinstance(obj.get("nodes"), list):
        raise ModelFormatError(f"{where}: expected an object with a 'nodes' list")
    nodes = []
    for k, nd in enumerate(obj["nodes"]):
        loc = f"{where}.nodes[{k}]"
        if not isinstance(nd, dict):
            raise ModelFormatError(f"{loc}: expected an object")
        if "leaf" in nd:
            nodes.append(Leaf(_weight_in(nd["leaf"], loc)))
            continue
        try:
            a = schema.index(nd["attribute"])
            kind = nd["test"]
            if kind == "gt":
                th = nd["threshold"]
                if isinstance(th, bool) or not isinstance(th, (int, float)):
                    raise ModelFormatError(f"{loc}: threshold must be a number")
                test = GreaterThan(float(th))
            elif kind == "eq":
                test = EqualsCategory(nd["category"])
            elif kind == "is_true":
                test = IsTrue()
            else:
                raise ModelFormatError(f"{loc}: unknown test {kind!r}")
            left, right = nd["false"], nd["true"]
        except KeyError as e:
            raise ModelFormatError(f"{loc}: missing field {e.args[0]!r}") from None
        except SchemaError as e:
            raise ModelFormatError(f"{loc}: {e}") from None
        if not (isinstance(left, int) and isinstance(right, int)):
            raise ModelFormatError(f"{loc}: children must be node indices")
        nodes.append(Node(Condition(a, test), left, right))
    try:
        return Tree(nodes)
    except ModelError as e:
        raise ModelFormatError(f"{where}: {e}") from None


def model_from_dict(doc: dict) -> BoostedTree:
    if not isinstance(doc, dict):
        raise ModelFormatError("model: expected a JSON object")
    try:
        attrs = []
        for k, a in enumerate(doc["attributes"]):
            try:
                attrs.append(Attribute(a["name"], AttrKind(a["kind"]), tuple(a.get("categories", ()))))
            except (KeyError, ValueError) as e:
                raise ModelFormatError(f"attributes[{k}]: {e}") from None
        schema = AttributeSchema(tuple(attrs))
        forests = []
        for fi, f in enumerate(doc["forests"]):
            trees = tuple(_tree_in(t, schema, f"forests[{fi}].trees[{ti}]") for ti, t in enumerate(f["trees"]))
            forests.append(Forest(trees, int(f.get("class", fi))))
        tie = int(doc.get("tie_class", 0))
    except KeyError as e:
        raise ModelFormatError(f"model: missing field {e.args[0]!r}") from None
    except SchemaError as e:
        raise ModelFormatError(f"model: {e}") from None
    try:
        return BoostedTree(schema, tuple(forests), tie_class=tie)
    except (ModelError, SchemaError) as e:
        raise ModelFormatError(f"model: {e}") from None


def model_to_dict(bt: BoostedTree) -> dict:
    schema = bt.schema
    attrs = []
    for a in schema.attributes:
        d = {"name": a.name, "kind": a.kind.value}
        if a.kind is AttrKind.CATEGORICAL:
            d["categories"] = list(a.categories)
        attrs.append(d)
    forests = []
    for f in bt.forests:
        trees = []
        for tree in f.trees:
            nodes = []
            for nd in tree.nodes:
                if isinstance(nd, Leaf):
                    nodes.append({"leaf": _weight_out(nd.weight)})
                    continue
                c = nd.condition
                d = {"attribute": schema[c.attribute].name}
                if isinstance(c.test, GreaterThan):
                    d.update(test="gt", threshold=c.test.threshold)
                elif isinstance(c.test, EqualsCategory):
                    d.update(test="eq", category=c.test.category)
                else:
                    d["test"] = "is_true"
                d.update({"false": nd.left, "true": nd.right})
                nodes.append(d)
            trees.append({"nodes": nodes})
        forests.append({"class": f.class_id, "trees": trees})
    return {"format": "boostexplain", "version": 1, "tie_class": bt.tie_class,
            "attributes": attrs, "forests": forests}


def save_model(bt: BoostedTree, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(bt), indent=1) + "\n", encoding="utf-8")


# --- XGBoost trees dump -----------------------------------------------------------

def _xgb_tree(obj, names: list, index: dict, where: str) -> Tree:
    nodes: list = []

    def add(nd, loc) -> int:
        i = len(nodes)
        nodes.append(None)
        if "leaf" in nd:
            nodes[i] = Leaf(float(nd["leaf"]))
            return i
        try:
            feat = nd["split"]
            th = nd["split_condition"]
            yes, no = nd["yes"], nd["no"]
            kids = {c["nodeid"]: c for c in nd["children"]}
        except (KeyError, TypeError) as e:
            raise ModelFormatError(f"{loc}: malformed split node ({e})") from None
        if feat not in index:
            if isinstance(feat, str) and feat.startswith("f") and feat[1:].isdigit() and int(feat[1:]) < len(names):
                a = int(feat[1:])
            else:
                raise ModelFormatError(f"{loc}: unknown feature {feat!r}")
        else:
            a = index[feat]
        if yes not in kids or no not in kids:
            raise ModelFormatError(f"{loc}: children do not match yes/no ids")
        # the dump prints float32 thresholds in decimal; recover the float32 value.
        # XGBoost sends x < th to "yes", and x < th <=> not (x > prev(th)) on floats
        th = float(np.float32(th))
        cond = Condition(a, GreaterThan(math.nextafter(th, -math.inf)))
        left = add(kids[yes], f"{loc}/{yes}")
        right = add(kids[no], f"{loc}/{no}")
        nodes[i] = Node(cond, left, right)
        return i

    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: expected a tree object")
    add(obj, where)
    try:
        return Tree(nodes)
    except ModelError as e:
        raise ModelFormatError(f"{where}: {e}") from None


def model_from_xgb_dump(doc, feature_names: Optional[Sequence[str]] = None, num_class: Optional[int] = None,
                        base_score: float = 0.0) -> BoostedTree:
    """Numerical features only. Trees are assigned to classes round-robin; the
    margin-space ``base_score`` (one value, or one per class) becomes a
    single-leaf tree heading each forest."""
    if isinstance(doc, dict):
        trees = doc.get("trees")
        feature_names = feature_names or doc.get("feature_names")
        num_class = num_class or doc.get("num_class")
        base_score = doc.get("base_score", base_score)
    else:
        trees = doc
    if not isinstance(trees, list):
        raise ModelFormatError("xgboost dump: expected a list of trees")
    m = int(num_class or 1)
    if m == 2:
        m = 1
    if trees and len(trees) % m:
        raise ModelFormatError(f"xgboost dump: {len(trees)} trees cannot be split over {m} classes")
    if not feature_names:
        seen = set()
        stack = list(trees)
        while stack:
            nd = stack.pop()
            if isinstance(nd, dict):
                if "split" in nd:
                    seen.add(nd["split"])
                stack.extend(nd.get("children", ()))
        k = 1 + max((int(s[1:]) for s in seen if s[1:].isdigit()), default=-1)
        feature_names = [f"f{i}" for i in range(k)]
    names = list(feature_names)
    try:
        schema = AttributeSchema(tuple(Attribute(nm, AttrKind.NUMERICAL) for nm in names))
    except SchemaError as e:
        raise ModelFormatError(f"xgboost dump: {e}") from None
    index = {nm: i for i, nm in enumerate(names)}
    parsed = [_xgb_tree(t, names, index, f"trees[{k}]") for k, t in enumerate(trees)]
    base = list(base_score) if isinstance(base_score, (list, tuple)) else [base_score] * m
    if len(base) != m:
        raise ModelFormatError(f"xgboost dump: {len(base)} base scores for {m} forests")
    forests = []
    for j in range(m):
        head = (Tree.leaf(float(base[j])),) if base[j] else ()
        forests.append(Forest(head + tuple(parsed[j::m]), j))
    try:
        return BoostedTree(schema, tuple(forests))
    except (ModelError, SchemaError) as e:
        raise ModelFormatError(f"xgboost dump: {e}") from None


# --- entry points -----------------------------------------------------------------

def load_model(path, fmt: str = NATIVE) -> BoostedTree:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    if fmt == NATIVE:
        return model_from_dict(doc)
    if fmt == XGB:
        return model_from_xgb_dump(doc)
    raise ValueError(f"unknown model format {fmt!r}")


def parse_value(a: Attribute, s: str, where: str):
    s = s.strip()
    if a.kind is AttrKind.NUMERICAL:
        try:
            return float(s)
        except ValueError:
            raise ModelFormatError(f"{where}: {a.name} expects a number, got {s!r}") from None
    if a.kind is AttrKind.BOOLEAN:
        if s not in ("0", "1"):
            raise ModelFormatError(f"{where}: {a.name} expects 0 or 1, got {s!r}")
        return int(s)
    if s not in a.categories:
        raise ModelFormatError(f"{where}: {a.name} has no category {s!r}")
    return s


def load_instances(path, schema: AttributeSchema) -> list:
    """CSV with a header naming the attributes in schema order."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return []
    header = [h.strip() for h in rows[0]]
    if header != schema.names:
        raise ModelFormatError(f"{path}: header {header} does not match attributes {schema.names}")
    out = []
    for k, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(schema):
            raise ModelFormatError(f"{path}: line {k}: {len(row)} values, expected {len(schema)}")
        out.append(tuple(parse_value(a, v, f"{path}: line {k}") for a, v in zip(schema.attributes, row)))
    return out


def save_instances(instances: Sequence[Sequence], schema: AttributeSchema, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(schema.names)
        for x in instances:
            w.writerow([repr(v) if isinstance(v, float) else v for v in x])


def load_terms(path, schema: AttributeSchema, instances: Sequence[Sequence]) -> list:
    """A JSON list holding, per instance, the names of the attributes its term keeps."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list) or len(doc) != len(instances):
        raise ModelFormatError(f"{path}: expected a list of {len(instances)} attribute-name lists")
    terms = []
    for k, (names, x) in enumerate(zip(doc, instances)):
        try:
            terms.append(Term(tuple(x), frozenset(schema.index(nm) for nm in names)))
        except (SchemaError, TypeError) as e:
            raise ModelFormatError(f"{path}: entry {k}: {e}") from None
    return terms
