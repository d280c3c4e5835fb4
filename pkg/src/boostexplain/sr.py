"""Sufficient reasons by greedy deletion over the exact implicant test, and the
pipeline that first shrinks the instance with tree-specific explanations."""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .model import BoostedTree, Term
from .oracle import DISPROVED, PROVED, TIMEOUT, Budget, CompiledEnsemble, is_abductive
from .ts import TsConfig, TsMultiResult, check_ordering, ts_explain_multi


class InputError(ValueError):
    """The seed term handed to ``sr_explain`` is not an abductive explanation."""


@dataclass
class SrResult:
    term: Term
    minimal_proved: bool
    oracle_calls: int = 0
    timeouts: int = 0
    nodes: int = 0
    elapsed: float = 0.0
    seed_verified: bool = True


def sr_explain(bt: BoostedTree, x: Sequence, seed_term: Optional[Term] = None,
               ordering: Optional[Sequence[int]] = None, budget: Budget = Budget(),
               time_limit: Optional[float] = None) -> SrResult:
    """Remove the characteristics of ``seed_term`` one at a time, in ``ordering``,
    whenever the oracle proves the smaller term still abductive.

    ``budget`` applies to each oracle call; ``time_limit`` (seconds) caps the
    whole run, after which the remaining removal tests time out. A timed-out
    test keeps its characteristic and clears ``minimal_proved``.
    """
    start = time.perf_counter()
    x = bt.schema.check_instance(x)
    t = seed_term if seed_term is not None else Term.full(x)
    if tuple(t.instance) != x:
        raise InputError("seed term does not belong to the instance")
    order = sorted(t.kept) if ordering is None else check_ordering(ordering, t.kept)
    if time_limit is not None:
        deadline = time.monotonic() + time_limit
        if budget.deadline is not None:
            deadline = min(deadline, budget.deadline)
        budget = replace(budget, deadline=deadline)
    compiled = CompiledEnsemble(bt)
    calls = timeouts = nodes = 0

    def oracle(term):
        nonlocal calls, timeouts, nodes
        v = is_abductive(bt, x, term, budget, compiled=compiled)
        calls += 1
        nodes += v.nodes_explored
        if v.status == TIMEOUT:
            timeouts += 1
        return v

    first = oracle(t)
    if first.status == DISPROVED:
        raise InputError(f"seed term is not abductive (counterexample {first.counterexample})")
    seed_verified = first.status == PROVED
    minimal = True
    for i in order:
        v = oracle(t.without(i))
        if v.status == PROVED:
            t = t.without(i)
        elif v.status == TIMEOUT:
            minimal = False
    return SrResult(t, minimal, calls, timeouts, nodes, time.perf_counter() - start, seed_verified)


@dataclass
class PipelineResult:
    sr: SrResult
    ts: TsMultiResult

    @property
    def term(self) -> Term:
        return self.sr.term


def ts_sr_pipeline(bt: BoostedTree, x: Sequence, cfg: TsConfig = TsConfig(),
                   ordering: Optional[Sequence[int]] = None, budget: Budget = Budget(),
                   time_limit: Optional[float] = None) -> PipelineResult:
    """Shortest tree-specific explanation over ``cfg.runs`` orderings, then ``sr_explain`` seeded with it.

    ``ordering`` is an ordering of all attributes; the SR stage uses its
    restriction to the characteristics the first stage kept.
    """
    x = bt.schema.check_instance(x)
    full = check_ordering(ordering, range(len(x))) if ordering is not None else list(range(len(x)))
    start = time.monotonic()
    ts = ts_explain_multi(bt, x, cfg)
    if time_limit is not None:
        time_limit = max(0.0, time_limit - (time.monotonic() - start))
    sub = [i for i in full if i in ts.term.kept]
    sr = sr_explain(bt, x, ts.term, sub, budget, time_limit)
    return PipelineResult(sr, ts)
