"""Pseudo-labels for policy training: exhaustive, trajectory and parsimonious search."""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    AcquisitionState,
    CostSchedule,
    ModifiedLossParams,
    Predictor,
    feasible_successors,
    state_cost,
    structured_loss,
)

MAX_EXHAUSTIVE_BITS = 20


class SearchKind(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    TRAJECTORY = "trajectory"
    PARSIMONIOUS = "parsimonious"


class StateSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PseudoLabel:
    target: AcquisitionState
    weight: float
    achieved_loss: float
    search_kind: SearchKind

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"importance weight must be nonnegative, got {self.weight}")

    def to_record(self, uid: str = "", sched: CostSchedule | None = None) -> dict:
        rec = {
            "id": uid,
            "state": self.target.to_bitmap(),
            "weight": self.weight,
            "achieved_loss": self.achieved_loss,
            "search": self.search_kind.value,
        }
        if sched is not None:
            rec["feature_cost"] = state_cost(self.target, sched)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "PseudoLabel":
        return cls(AcquisitionState.from_bitmap(rec["state"]), rec["weight"],
                   rec["achieved_loss"], SearchKind(rec["search"]))


@dataclass(frozen=True)
class Trajectory:
    states: tuple[AcquisitionState, ...]
    losses: tuple[float, ...]

    def validate(self) -> None:
        s = self.states
        if not s[0].count() == 0 or not s[-1].is_full():
            raise AssertionError("trajectory must run from the zero state to the all-one state")
        for a, b in zip(s, s[1:]):
            if not (b.covers(a) and b.count() == a.count() + 1):
                raise AssertionError("consecutive trajectory states must add exactly one bit")


class ModifiedLoss:
    """Memoized ``state -> C(X, Y, S)`` for one example under a fixed predictor."""

    def __init__(self, x, gold, predictor: Predictor, params: ModifiedLossParams,
                 sched: CostSchedule):
        self.x = x
        self.gold = gold
        self.params = params
        self.sched = sched
        self.num_tiers = predictor.num_tiers
        self.num_parts = predictor.num_parts(x)
        decoder = getattr(predictor, "decoder", None)
        self._decode = decoder(x) if decoder else (lambda s: predictor.predict(x, s))
        self.calls = 0

    def loss(self, state: AcquisitionState) -> float:
        self.calls += 1
        return structured_loss(self._decode(state), self.gold, self.params.loss_kind)

    def __call__(self, state: AcquisitionState) -> float:
        return self.loss(state) + self.params.lam * state_cost(state, self.sched)

    def zero(self) -> AcquisitionState:
        return AcquisitionState.zeros(self.num_tiers, self.num_parts)


def importance_weight(losses: Sequence[float]) -> float:
    """Spread between the worst and best candidate loss."""
    if len(losses) == 0:
        raise ValueError("importance_weight needs at least one candidate")
    return float(max(losses) - min(losses))


def _best(cands: Iterable[tuple[AcquisitionState, float]]) -> tuple[AcquisitionState, float]:
    # lowest loss, then fewest bits, then lexicographic (k, c)
    return min(cands, key=lambda sv: (sv[1], sv[0].sort_key()))


def all_states(num_tiers: int, num_parts: int) -> Iterable[AcquisitionState]:
    for bits in itertools.product((False, True), repeat=num_tiers * num_parts):
        yield AcquisitionState(np.array(bits, dtype=bool).reshape(num_tiers, num_parts))


def exhaustive_pseudo_label(x, gold, predictor: Predictor, params: ModifiedLossParams,
                            sched: CostSchedule, evaluator: ModifiedLoss | None = None) -> PseudoLabel:
    f = evaluator or ModifiedLoss(x, gold, predictor, params, sched)
    nbits = f.num_tiers * f.num_parts
    if nbits > MAX_EXHAUSTIVE_BITS:
        raise StateSpaceTooLarge(
            f"exhaustive search over 2^{nbits} states exceeds the guard "
            f"MAX_EXHAUSTIVE_BITS={MAX_EXHAUSTIVE_BITS}; use trajectory or parsimonious search"
        )
    if getattr(predictor, "cumulative_tiers", False):
        return _exhaustive_by_tiers(f)
    scored = [(s, f(s)) for s in all_states(f.num_tiers, f.num_parts)]
    target, best = _best(scored)
    return PseudoLabel(target, importance_weight([v for _, v in scored]), best, SearchKind.EXHAUSTIVE)


def _exhaustive_by_tiers(f: ModifiedLoss) -> PseudoLabel:
    """Exact search for predictors that only see each part's highest acquired tier.

    States sharing an effective-tier vector ``e`` share the loss, so the
    cheapest of them (only bit ``e_c`` per part) is the only candidate for
    the minimum and tier-breaking, and the dearest (every bit ``k <= e_c``)
    bounds the maximum.  This visits ``K^|C|`` vectors instead of
    ``2^(K|C|)`` states and returns the same pseudo-label.
    """
    K, n = f.num_tiers, f.num_parts
    lows, highs = [], []
    for e in itertools.product(range(K), repeat=n):
        lo = np.zeros((K, n), dtype=bool)
        hi = np.zeros((K, n), dtype=bool)
        for c, k in enumerate(e):
            if k:
                lo[k, c] = True
                hi[1:k + 1, c] = True
        lo_state = AcquisitionState(lo)
        lows.append((lo_state, f(lo_state)))
        # tier-0 bits never change the prediction, so the dearest state sets them all
        hi[0] = True
        highs.append(f(AcquisitionState(hi)))
    target, best = _best(lows)
    return PseudoLabel(target, float(max(highs) - best), best, SearchKind.EXHAUSTIVE)


def trajectory_search(x, gold, predictor: Predictor, params: ModifiedLossParams,
                      sched: CostSchedule, evaluator: ModifiedLoss | None = None
                      ) -> tuple[Trajectory, PseudoLabel]:
    """Greedy one-bit-at-a-time walk from the zero state to the all-one state."""
    f = evaluator or ModifiedLoss(x, gold, predictor, params, sched)
    state = f.zero()
    states, losses = [state], [f(state)]
    while not state.is_full():
        # successors come in (k, c) order; min keeps the first on ties
        scored = [(s, f(s)) for s in feasible_successors(state)]
        state, value = min(scored, key=lambda sv: sv[1])
        states.append(state)
        losses.append(value)
    traj = Trajectory(tuple(states), tuple(losses))
    target, best = _best(zip(states, losses))
    return traj, PseudoLabel(target, importance_weight(losses), best, SearchKind.TRAJECTORY)


def parsimonious_search(x, gold, predictor: Predictor, params: ModifiedLossParams,
                        sched: CostSchedule, tau: float = 0.0,
                        evaluator: ModifiedLoss | None = None) -> PseudoLabel:
    """OR together every single-bit addition that improves the modified loss by ``tau``.

    A candidate must also be a strict improvement, so with ``tau = 0`` bits
    that leave the modified loss unchanged are not collected.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    f = evaluator or ModifiedLoss(x, gold, predictor, params, sched)
    start = f.zero()
    base = f(start)
    cands = [(s, f(s)) for s in feasible_successors(start)]
    target = start
    for s, v in cands:
        if base >= v + tau and v < base:
            target = target | s
    achieved = f(target)
    weight = importance_weight([base, achieved] + [v for _, v in cands])
    return PseudoLabel(target, weight, achieved, SearchKind.PARSIMONIOUS)


def pseudo_label(kind: SearchKind | str, x, gold, predictor: Predictor,
                 params: ModifiedLossParams, sched: CostSchedule, tau: float = 0.0) -> PseudoLabel:
    kind = SearchKind(kind)
    if kind is SearchKind.EXHAUSTIVE:
        return exhaustive_pseudo_label(x, gold, predictor, params, sched)
    if kind is SearchKind.TRAJECTORY:
        return trajectory_search(x, gold, predictor, params, sched)[1]
    return parsimonious_search(x, gold, predictor, params, sched, tau)


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
