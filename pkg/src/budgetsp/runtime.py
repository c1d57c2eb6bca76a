"""Test-time execution with explicit cost accounting.

Runs start from the zero state and only ever add acquirable (tier >= 1)
bits, so the ledger's ``feature_cost`` is ``state_cost`` of the final state.
The cheap tier is computed for every part regardless of the policy; its
constant cost ``delta_0 * |C|`` is reported separately as ``base_cost`` and
is not part of ``feature_cost`` or ``total``.
"""
from __future__ import annotations

import enum
import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    AcquisitionState,
    CostSchedule,
    Label,
    acquirable_actions,
    full_acquisition,
    indicator_loss,
    state_cost,
)
from .policy import AnytimePolicy, OneShotPolicy, myopic_policy, uniform_fraction


@dataclass
class CostLedger:
    feature_cost: float = 0.0
    inference_calls: int = 0
    policy_calls: int = 0
    base_cost: float = 0.0

    def total(self, sched: CostSchedule) -> float:
        return (self.feature_cost + self.inference_calls * sched.inference_cost
                + self.policy_calls * sched.policy_cost)

    def snapshot(self) -> "CostLedger":
        return CostLedger(self.feature_cost, self.inference_calls, self.policy_calls, self.base_cost)

    def __add__(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(self.feature_cost + other.feature_cost,
                          self.inference_calls + other.inference_calls,
                          self.policy_calls + other.policy_calls,
                          self.base_cost + other.base_cost)

    def to_dict(self) -> dict:
        return {"feature_cost": self.feature_cost, "inference_calls": self.inference_calls,
                "policy_calls": self.policy_calls, "base_cost": self.base_cost}


def base_cost(num_parts: int, sched: CostSchedule) -> float:
    return sched.tier_costs[0] * num_parts


def _ledger(state: AcquisitionState, sched: CostSchedule, inference: int = 0,
            policy: int = 0) -> CostLedger:
    return CostLedger(state_cost(state, sched), inference, policy, base_cost(state.num_parts, sched))


@dataclass
class ExecutionTrace:
    """States visited, the prediction decoded at each (``None`` if not decoded),
    ledger snapshots and the number of policy invocations."""

    states: list[AcquisitionState] = field(default_factory=list)
    predictions: list[Label | None] = field(default_factory=list)
    ledgers: list[CostLedger] = field(default_factory=list)
    policy_steps: int = 0
    seconds: float = 0.0

    @property
    def final_state(self) -> AcquisitionState:
        return self.states[-1]

    @property
    def ledger(self) -> CostLedger:
        return self.ledgers[-1]

    def to_record(self, uid: str = "", sched: CostSchedule | None = None,
                  timing: bool = False) -> dict:
        """JSON-ready dict; wall time is left out unless ``timing`` so dumps stay reproducible."""
        rec = {
            "id": uid,
            "states": [s.to_bitmap() for s in self.states],
            "predictions": [list(p) if p is not None else None for p in self.predictions],
            "ledgers": [lg.to_dict() for lg in self.ledgers],
            "policy_steps": self.policy_steps,
        }
        if timing:
            rec["seconds"] = self.seconds
        if sched is not None:
            rec["total_cost"] = self.ledger.total(sched)
        return rec


def run_oneshot(x, policy: Callable[[object], AcquisitionState], predictor,
                sched: CostSchedule, policy_calls: int = 1
                ) -> tuple[Label, CostLedger, ExecutionTrace]:
    """One policy call, then one inference under the chosen state."""
    t0 = time.perf_counter()
    start = AcquisitionState.zeros(predictor.num_tiers, predictor.num_parts(x))
    state = policy(x)
    pred = predictor.predict(x, state)
    ledger = _ledger(state, sched, inference=1, policy=policy_calls)
    trace = ExecutionTrace([start, state], [None, pred], [_ledger(start, sched), ledger.snapshot()],
                           policy_calls, time.perf_counter() - t0)
    return pred, ledger, trace


def run_anytime(x, policy: AnytimePolicy, predictor, sched: CostSchedule,
                budget: float) -> tuple[Label, ExecutionTrace]:
    """Apply policy steps while features remain and the feature cost is below ``budget``.

    The guard compares ``state_cost`` of the acquired bits (cheap tier
    excluded) against the budget before each step, so the final state may
    overshoot by at most one tier cost.  Prediction happens once at the end.
    """
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    t0 = time.perf_counter()
    state = AcquisitionState.zeros(predictor.num_tiers, predictor.num_parts(x))
    ledger = _ledger(state, sched)
    trace = ExecutionTrace([state], [None], [ledger.snapshot()])
    part_feats = policy.featurizer.part_features(x)
    t = 0
    while acquirable_actions(state) and state_cost(state, sched) < budget:
        t += 1
        state = policy.choose(x, state, t, part_feats)
        ledger.policy_calls += 1
        ledger.feature_cost = state_cost(state, sched)
        trace.states.append(state)
        trace.predictions.append(None)
        trace.ledgers.append(ledger.snapshot())
    pred = predictor.predict(x, state)
    ledger.inference_calls += 1
    trace.predictions[-1] = pred
    trace.ledgers[-1] = ledger.snapshot()
    trace.policy_steps = t
    trace.seconds = time.perf_counter() - t0
    return pred, trace


def run_myopic(x, predictor, sched: CostSchedule, threshold: float
               ) -> tuple[Label, CostLedger, ExecutionTrace]:
    """Cheap inference for confidence; a second inference only when features were acquired."""
    t0 = time.perf_counter()
    start = AcquisitionState.zeros(predictor.num_tiers, predictor.num_parts(x))
    decision = myopic_policy(x, predictor, sched, threshold)
    first = _ledger(start, sched, inference=1)
    ledger = _ledger(decision.state, sched, inference=1, policy=1)
    pred, second = decision.cheap_prediction, None
    if decision.acquired:
        pred = second = predictor.predict(x, decision.state)
        ledger.inference_calls += 1
    trace = ExecutionTrace([start, decision.state], [decision.cheap_prediction, second],
                           [first, ledger.snapshot()], 1, time.perf_counter() - t0)
    return pred, ledger, trace


def recompute_ledger(trace: ExecutionTrace, sched: CostSchedule) -> CostLedger:
    """Rebuild a run's ledger from its trace alone: bit-by-bit feature cost of
    the final state, one inference per decoded state, the recorded policy steps."""
    bits = trace.final_state.bits
    feature = 0.0
    for k in range(bits.shape[0]):
        for c in range(bits.shape[1]):
            if bits[k, c]:
                feature += sched.tier_costs[k]
    decoded = sum(1 for p in trace.predictions if p is not None)
    return CostLedger(feature, decoded, trace.policy_steps, sched.tier_costs[0] * bits.shape[1])


class Metric(str, enum.Enum):
    LETTER_ACCURACY = "letter_accuracy"
    UAS = "uas"
    INDICATOR = "indicator"


@dataclass
class ExampleRecord:
    uid: str
    correct: int
    parts: int
    ledger: CostLedger
    total_cost: float
    trace: ExecutionTrace | None = None


@dataclass
class EvalSummary:
    metric: Metric
    accuracy: float
    feature_cost: float
    inference_calls: float
    policy_calls: float
    total_cost: float
    ledger: CostLedger
    records: list[ExampleRecord]

    def row(self) -> dict:
        return {"accuracy": self.accuracy, "feature_cost": self.feature_cost,
                "inference_calls": self.inference_calls, "policy_calls": self.policy_calls,
                "total_cost": self.total_cost}


Runner = Callable[[object], tuple[Label, CostLedger, ExecutionTrace]]


def evaluate(dataset: Sequence, runner: Runner, metric: Metric | str, sched: CostSchedule,
             golds: Sequence | None = None) -> EvalSummary:
    """Run ``runner`` on every example and aggregate accuracy and cost.

    Part-level metrics pool correct parts over all examples; ``indicator``
    is the fraction of exactly-correct structures.  Costs are per-example
    means.
    """
    if not dataset:
        raise ValueError("evaluate needs a non-empty dataset")
    metric = Metric(metric)
    golds = golds if golds is not None else [x.gold for x in dataset]
    records = []
    total = CostLedger()
    for x, gold in zip(dataset, golds):
        pred, ledger, trace = runner(x)
        if metric is Metric.INDICATOR:
            correct, parts = int(indicator_loss(pred, gold) == 0), 1
        else:
            correct, parts = sum(1 for a, b in zip(pred, gold) if a == b), len(gold)
        records.append(ExampleRecord(getattr(x, "uid", ""), correct, parts, ledger,
                                     ledger.total(sched), trace))
        total = total + ledger
    n = len(records)
    acc = sum(r.correct for r in records) / sum(r.parts for r in records)
    return EvalSummary(metric, acc, total.feature_cost / n, total.inference_calls / n,
                       total.policy_calls / n, total.total(sched) / n, total, records)


# Runner factories -----------------------------------------------------------


def oneshot_runner(policy: OneShotPolicy | Callable, predictor, sched: CostSchedule) -> Runner:
    return lambda x: run_oneshot(x, policy, predictor, sched)


def fixed_state_runner(make_state: Callable[[object], AcquisitionState], predictor,
                       sched: CostSchedule) -> Runner:
    """Anchor runs: a constant rule (zero / all-one) applied without a learned policy."""
    return lambda x: run_oneshot(x, make_state, predictor, sched, policy_calls=0)


def zero_state_rule(predictor):
    return lambda x: AcquisitionState.zeros(predictor.num_tiers, predictor.num_parts(x))


def all_one_rule(predictor):
    """Every acquirable bit set: the full-feature operating point."""
    return lambda x: full_acquisition(predictor.num_tiers, predictor.num_parts(x))


def anytime_runner(policy: AnytimePolicy, predictor, sched: CostSchedule, budget: float) -> Runner:
    def run(x):
        pred, trace = run_anytime(x, policy, predictor, sched, budget)
        return pred, trace.ledger, trace
    return run


def myopic_runner(predictor, sched: CostSchedule, threshold: float) -> Runner:
    return lambda x: run_myopic(x, predictor, sched, threshold)


def uniform_runner(predictor, sched: CostSchedule, fraction: float, seed: int = 0) -> Runner:
    """Random part-level acquisition of ``fraction`` of the acquirable bits; one RNG per example."""
    def run(x):
        rng = np.random.default_rng([seed, zlib.crc32(getattr(x, "uid", "").encode())])
        rule = lambda ex: uniform_fraction(
            AcquisitionState.zeros(predictor.num_tiers, predictor.num_parts(ex)), fraction, rng)
        return run_oneshot(x, rule, predictor, sched)
    return run


def ledger_matches(summary: EvalSummary, sched: CostSchedule, tol: float = 1e-12) -> bool:
    """Every per-example ledger and total agrees with :func:`recompute_ledger` on its trace."""
    for r in summary.records:
        if r.trace is None:
            return False
        ref = recompute_ledger(r.trace, sched)
        lg = r.ledger
        if (lg.inference_calls, lg.policy_calls) != (ref.inference_calls, ref.policy_calls):
            return False
        for a, b in ((lg.feature_cost, ref.feature_cost), (lg.base_cost, ref.base_cost),
                     (r.total_cost, ref.total(sched))):
            if not math.isclose(a, b, rel_tol=0, abs_tol=tol):
                return False
    return True
