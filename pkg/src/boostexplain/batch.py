"""Batch explanation of many instances and the JSON report."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .model import BoostedTree, Term, classify
from .oracle import TIMEOUT, Budget, is_abductive
from .sr import sr_explain, ts_sr_pipeline
from .ts import INSTANCE_ORDER, RANDOM, TsConfig, ts_explain_multi

MODES = ("ts", "sr", "ts-sr", "check")


@dataclass(frozen=True)
class BatchConfig:
    runs: int = 1000
    seed: int = 0
    timeout: Optional[float] = None   # seconds per instance
    node_budget: int = 10_000_000
    call_seconds: float = 100.0       # per oracle call
    sr_ordering: str = INSTANCE_ORDER
    workers: int = 1

    def __post_init__(self):
        if self.sr_ordering not in (INSTANCE_ORDER, RANDOM):
            raise ValueError(f"unknown ordering policy {self.sr_ordering!r}")

    def sr_order(self, n: int, index: int) -> list:
        """Removal order for the SR stage; sr and ts-sr runs of one instance share it."""
        if self.sr_ordering == INSTANCE_ORDER:
            return list(range(n))
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, index])))
        return rng.permutation(n).tolist()

    def budget(self) -> Budget:
        return Budget(max_nodes=self.node_budget, max_seconds=self.call_seconds)


@dataclass
class Record:
    index: int
    mode: str
    predicted_class: Optional[int] = None
    explanation: dict = field(default_factory=dict)
    size: Optional[int] = None
    n: int = 0
    reduction_rate: Optional[float] = None
    ts_min_size: Optional[int] = None
    ts_mean_size: Optional[float] = None
    oracle_calls: int = 0
    oracle_nodes: int = 0
    timeouts: int = 0
    minimal_proved: Optional[bool] = None
    abductive: Optional[bool] = None
    elapsed: float = 0.0
    error: Optional[str] = None


def aggregate(records: Sequence[Record]) -> dict:
    """Means over the records without an error; sums of timeouts and errors over all."""
    ok = [r for r in records if r.error is None]

    def mean(key):
        vals = [getattr(r, key) for r in ok if getattr(r, key) is not None]
        return math.fsum(vals) / len(vals) if vals else None

    return {
        "instances": len(records),
        "errors": len(records) - len(ok),
        "timeouts": sum(r.timeouts for r in records),
        "mean_size": mean("size"),
        "mean_reduction_rate": mean("reduction_rate"),
        "mean_oracle_calls": mean("oracle_calls"),
        "mean_oracle_nodes": mean("oracle_nodes"),
        "mean_elapsed": mean("elapsed"),
        "mean_ts_min_size": mean("ts_min_size"),
    }


@dataclass
class Report:
    mode: str
    config: dict
    records: list

    @property
    def aggregates(self) -> dict:
        return aggregate(self.records)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "config": self.config,
                "records": [asdict(r) for r in self.records], "aggregates": self.aggregates}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=_jsonable)

    @property
    def any_timeout(self) -> bool:
        return any(r.timeouts for r in self.records)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def explain_one(bt: BoostedTree, x, mode: str, cfg: BatchConfig, index: int = 0,
                term: Optional[Term] = None) -> Record:
    """One report record; failures are captured in ``error`` instead of raised."""
    rec = Record(index, mode, n=len(x))
    start = time.perf_counter()
    try:
        x = bt.schema.check_instance(x)
        rec.predicted_class = classify(bt, x)
        budget = cfg.budget()
        if mode == "ts":
            res = ts_explain_multi(bt, x, TsConfig(cfg.runs, cfg.seed))
            t = res.term
            rec.ts_min_size, rec.ts_mean_size = res.min_size, res.mean_size
        elif mode == "sr":
            res = sr_explain(bt, x, None, cfg.sr_order(len(x), index), budget, cfg.timeout)
            t = res.term
            _sr_stats(rec, res)
        elif mode == "ts-sr":
            res = ts_sr_pipeline(bt, x, TsConfig(cfg.runs, cfg.seed), cfg.sr_order(len(x), index),
                                 budget, cfg.timeout)
            t = res.term
            rec.ts_min_size, rec.ts_mean_size = res.ts.min_size, res.ts.mean_size
            _sr_stats(rec, res.sr)
        elif mode == "check":
            if term is None:
                raise ValueError("check mode needs a term for every instance")
            if cfg.timeout is not None:
                budget = Budget(budget.max_nodes, min(budget.max_seconds, cfg.timeout))
            v = is_abductive(bt, x, term, budget)
            t = term
            rec.oracle_calls, rec.oracle_nodes = 1, v.nodes_explored
            rec.timeouts = int(v.status == TIMEOUT)
            rec.abductive = v.abductive
        else:
            raise ValueError(f"unknown mode {mode!r}")
        rec.explanation = t.describe(bt.schema)
        rec.size = len(t)
        rec.reduction_rate = 1 - len(t) / len(x) if len(x) else 0.0
    except Exception as e:  # recorded, the batch goes on
        rec.error = f"{type(e).__name__}: {e}"
    rec.elapsed = time.perf_counter() - start
    return rec


def _sr_stats(rec: Record, res) -> None:
    rec.oracle_calls, rec.oracle_nodes, rec.timeouts = res.oracle_calls, res.nodes, res.timeouts
    rec.minimal_proved = res.minimal_proved


def _job(args):
    return explain_one(*args)


def run_batch(bt: BoostedTree, instances: Sequence[Sequence], mode: str, cfg: BatchConfig = BatchConfig(),
              terms: Optional[Sequence[Term]] = None) -> Report:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if terms is not None and len(terms) != len(instances):
        raise ValueError("one term per instance is required")
    jobs = [(bt, x, mode, cfg, k, terms[k] if terms is not None else None) for k, x in enumerate(instances)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_job, jobs))  # map keeps instance order
    else:
        records = [_job(j) for j in jobs]
    return Report(mode, asdict(cfg), records)
