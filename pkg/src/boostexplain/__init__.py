"""Formal abductive explanations for boosted-tree classifiers."""
from .batch import BatchConfig, Report, run_batch
from .bounds import forest_bound, restriction_of_term, tree_bound
from .generators import gen_discrepancy_model, running_example
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
    Term,
    Tree,
    classify,
    eval_condition,
    eval_forest,
    eval_tree,
)
from .oracle import Budget, build_universe, is_abductive, is_abductive_bruteforce
from .serialize import load_instances, load_model, save_model
from .sr import sr_explain, ts_sr_pipeline
from .ts import TsConfig, ts_explain, ts_explain_multi, ts_test

__version__ = "0.1.0"
