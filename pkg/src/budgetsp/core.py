"""Acquisition states, cost schedules and the losses built on top of them.

A state is a binary ``K x |C|`` matrix: ``bits[k, c] == 1`` means feature
tier ``k`` is used for part ``c``.  Tier 0 is the cheap tier.  It is always
available to the predictor, so the all-zero state still predicts from tier-0
features; a part whose highest set bit is ``k`` is scored with the union of
tiers ``0..k``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

Label = tuple[int, ...]


class DimensionError(ValueError):
    """Raised when states, schedules or labels have incompatible shapes."""


class AcquisitionState:
    """Immutable binary matrix of acquired (tier, part) pairs."""

    __slots__ = ("_bits", "_key")

    def __init__(self, bits):
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise DimensionError(f"state must be 2-d (tiers x parts), got shape {arr.shape}")
        arr.setflags(write=False)
        self._bits = arr
        self._key = (arr.shape, arr.tobytes())

    @classmethod
    def zeros(cls, num_tiers: int, num_parts: int) -> "AcquisitionState":
        return cls(np.zeros((num_tiers, num_parts), dtype=bool))

    @classmethod
    def ones(cls, num_tiers: int, num_parts: int) -> "AcquisitionState":
        return cls(np.ones((num_tiers, num_parts), dtype=bool))

    @classmethod
    def from_bitmap(cls, rows: Sequence[str]) -> "AcquisitionState":
        """Inverse of :meth:`to_bitmap`."""
        return cls([[ch == "1" for ch in row] for row in rows])

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def num_tiers(self) -> int:
        return self._bits.shape[0]

    @property
    def num_parts(self) -> int:
        return self._bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._bits.shape

    def count(self) -> int:
        return int(self._bits.sum())

    def is_full(self) -> bool:
        return bool(self._bits.all())

    def effective_tiers(self) -> np.ndarray:
        """Highest acquired tier per part (0 when nothing is set)."""
        k = np.arange(self.num_tiers)[:, None]
        return np.where(self._bits, k, 0).max(axis=0) if self.num_parts else np.zeros(0, int)

    def with_bit(self, tier: int, part: int) -> "AcquisitionState":
        arr = self._bits.copy()
        arr[tier, part] = True
        return AcquisitionState(arr)

    def covers(self, other: "AcquisitionState") -> bool:
        """True when every bit of ``other`` is also set here (``self & other == other``)."""
        _check_same_shape(self, other)
        return bool(np.all(self._bits | ~other._bits))

    def __or__(self, other: "AcquisitionState") -> "AcquisitionState":
        _check_same_shape(self, other)
        return AcquisitionState(self._bits | other._bits)

    def sort_key(self) -> tuple:
        """Fewest bits first, then lexicographic over flattened (k, c) positions."""
        flat = self._bits.ravel()
        return (int(flat.sum()), tuple(-int(b) for b in flat))

    def to_bitmap(self) -> list[str]:
        return ["".join("1" if b else "0" for b in row) for row in self._bits]

    def __eq__(self, other) -> bool:
        return isinstance(other, AcquisitionState) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"AcquisitionState({'/'.join(self.to_bitmap())})"


def _check_same_shape(a: AcquisitionState, b: AcquisitionState) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"state shapes differ: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class CostSchedule:
    """Per-tier per-part acquisition costs plus per-call overheads."""

    tier_costs: tuple[float, ...]
    inference_cost: float = 0.0
    policy_cost: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tier_costs", tuple(float(d) for d in self.tier_costs))
        if not self.tier_costs:
            raise ValueError("at least one tier cost is required")
        if any(d < 0 for d in self.tier_costs):
            raise ValueError(f"tier costs must be nonnegative: {self.tier_costs}")
        if self.inference_cost < 0 or self.policy_cost < 0:
            raise ValueError("overhead costs must be nonnegative")

    @property
    def num_tiers(self) -> int:
        return len(self.tier_costs)

    def to_dict(self) -> dict:
        return {
            "tier_costs": list(self.tier_costs),
            "inference_cost": self.inference_cost,
            "policy_cost": self.policy_cost,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostSchedule":
        return cls(tuple(d["tier_costs"]), d.get("inference_cost", 0.0), d.get("policy_cost", 0.0))


# Abstract units.  "paper-parse" mirrors per-word microsecond timings of the
# POS template (165), the full template (275 total) and MST decoding (75).
PRESETS: dict[str, CostSchedule] = {
    "paper-parse": CostSchedule((165.0, 110.0), inference_cost=75.0, policy_cost=0.0),
    "ocr": CostSchedule((0.0, 1.0), inference_cost=0.0, policy_cost=0.0),
    "unit": CostSchedule((0.0, 1.0)),
}


def preset(name: str, **overrides) -> CostSchedule:
    try:
        base = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown cost preset {name!r}; choose from {sorted(PRESETS)}") from None
    d = base.to_dict()
    d.update({k: v for k, v in overrides.items() if v is not None})
    return CostSchedule.from_dict(d)


class LossKind(str, enum.Enum):
    HAMMING = "hamming"
    INDICATOR = "indicator"


@dataclass(frozen=True)
class ModifiedLossParams:
    lam: float = 0.0
    loss_kind: LossKind = LossKind.HAMMING

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))


class Predictor(Protocol):
    """Anything that maps an example and an acquisition state to a label."""

    num_tiers: int

    def num_parts(self, x) -> int: ...

    def predict(self, x, state: AcquisitionState) -> Label: ...


def state_cost(state: AcquisitionState, sched: CostSchedule) -> float:
    """Sum of ``delta_k`` over all set bits; overheads are not included."""
    if state.num_tiers != sched.num_tiers:
        raise DimensionError(
            f"state has {state.num_tiers} tiers but schedule has {sched.num_tiers}"
        )
    per_tier = state.bits.sum(axis=1)
    return float(sum(float(n) * d for n, d in zip(per_tier, sched.tier_costs)))


def _check_lengths(pred: Sequence[int], gold: Sequence[int]) -> None:
    if len(pred) != len(gold):
        raise DimensionError(f"label lengths differ: {len(pred)} vs {len(gold)}")


def hamming_loss(pred: Sequence[int], gold: Sequence[int]) -> float:
    _check_lengths(pred, gold)
    return float(sum(1 for a, b in zip(pred, gold) if a != b))


def indicator_loss(pred: Sequence[int], gold: Sequence[int]) -> float:
    _check_lengths(pred, gold)
    return 0.0 if all(a == b for a, b in zip(pred, gold)) else 1.0


LOSSES = {LossKind.HAMMING: hamming_loss, LossKind.INDICATOR: indicator_loss}


def structured_loss(pred, gold, kind: LossKind | str) -> float:
    return LOSSES[LossKind(kind)](pred, gold)


def modified_loss(x, gold, state: AcquisitionState, predictor: Predictor,
                  params: ModifiedLossParams, sched: CostSchedule) -> float:
    """Prediction loss under ``state`` plus ``lambda`` times its feature cost."""
    pred = predictor.predict(x, state)
    return structured_loss(pred, gold, params.loss_kind) + params.lam * state_cost(state, sched)


def state_hamming_distance(a: AcquisitionState, b: AcquisitionState) -> int:
    _check_same_shape(a, b)
    return int(np.count_nonzero(a.bits != b.bits))


def feasible_successors(state: AcquisitionState, min_tier: int = 0) -> list[AcquisitionState]:
    """States with exactly one more bit set, ordered by (tier, part).

    ``min_tier=1`` restricts to acquirable bits when tier 0 is treated as
    always available (the policy and runtime action space).
    """
    out = []
    for k in range(min_tier, state.num_tiers):
        for c in range(state.num_parts):
            if not state.bits[k, c]:
                out.append(state.with_bit(k, c))
    return out


def acquirable_actions(state: AcquisitionState) -> list[tuple[int, int]]:
    """Unset (tier, part) pairs with tier >= 1, in (tier, part) order."""
    ks, cs = np.nonzero(~state.bits[1:])
    return [(int(k) + 1, int(c)) for k, c in zip(ks, cs)]


def base_state(num_tiers: int, num_parts: int) -> AcquisitionState:
    """Tier 0 set for every part: what is actually computed at the start state."""
    arr = np.zeros((num_tiers, num_parts), dtype=bool)
    arr[0] = True
    return AcquisitionState(arr)


def full_acquisition(num_tiers: int, num_parts: int) -> AcquisitionState:
    """All acquirable bits (tiers >= 1) set; tier-0 bits left clear."""
    arr = np.zeros((num_tiers, num_parts), dtype=bool)
    arr[1:] = True
    return AcquisitionState(arr)


def is_tree(heads: Sequence[int]) -> bool:
    """True when ``heads`` (1-based tokens, 0 = root) form an arborescence rooted at 0."""
    n = len(heads)
    if n == 0:
        return False
    for h in heads:
        if not 0 <= h <= n:
            return False
    for j in range(1, n + 1):
        if heads[j - 1] == j:
            return False
        seen = set()
        node = j
        while node != 0:
            if node in seen:
                return False
            seen.add(node)
            node = heads[node - 1]
    return True
