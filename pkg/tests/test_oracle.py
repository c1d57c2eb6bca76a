import itertools

import numpy as np
import pytest

from budgetsp.core import (
    AcquisitionState,
    CostSchedule,
    ModifiedLossParams,
    hamming_loss,
    state_cost,
)
from budgetsp.oracle import (
    MAX_EXHAUSTIVE_BITS,
    PseudoLabel,
    SearchKind,
    StateSpaceTooLarge,
    exhaustive_pseudo_label,
    importance_weight,
    parsimonious_search,
    pseudo_label,
    read_jsonl,
    trajectory_search,
    write_jsonl,
)

from conftest import FixOnAcquirePredictor, TablePredictor


def enumerate_optimum(x, gold, predictor, lam, sched):
    """Independent brute force: loop over integers as bit masks."""
    k, n = predictor.num_tiers, predictor.num_parts(x)
    rows = []
    for mask in range(2 ** (k * n)):
        bits = np.array([(mask >> i) & 1 for i in range(k * n)], dtype=bool).reshape(k, n)
        s = AcquisitionState(bits)
        loss = hamming_loss(predictor.predict(x, s), gold)
        cost = sum(sched.tier_costs[t] * bits[t].sum() for t in range(k))
        rows.append((loss + lam * cost, int(bits.sum()), bits.ravel().tolist(), s))
    values = [r[0] for r in rows]
    # fewest bits, then lexicographic over (k, c) with set bits sorting first
    best = min(rows, key=lambda r: (r[0], r[1], [not b for b in r[2]]))
    return best[3], best[0], max(values) - min(values)


class Opaque:
    """Hides ``cumulative_tiers`` so the oracle takes the brute-force path."""

    def __init__(self, inner):
        self.inner = inner
        self.num_tiers = inner.num_tiers

    def num_parts(self, x):
        return self.inner.num_parts(x)

    def predict(self, x, s):
        return self.inner.predict(x, s)


class TestImportanceWeight:
    @pytest.mark.parametrize("vals,want", [([3.0], 0.0), ([1.0, 4.0, 2.5], 3.0), ([2, 2], 0.0)])
    def test_examples(self, vals, want):
        assert importance_weight(vals) == want

    def test_empty(self):
        with pytest.raises(ValueError):
            importance_weight([])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            PseudoLabel(AcquisitionState.zeros(1, 1), -1.0, 0.0, SearchKind.EXHAUSTIVE)


class TestExhaustive:
    @pytest.mark.parametrize("seed", range(12))
    def test_matches_independent_enumerator(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        p = TablePredictor(2, n, seed=seed)
        gold = tuple(int(v) for v in rng.integers(3, size=n))
        sched = CostSchedule((0.2, 0.7))
        lam = float(rng.uniform(0, 1))
        pl = exhaustive_pseudo_label("x", gold, p, ModifiedLossParams(lam), sched)
        target, best, spread = enumerate_optimum("x", gold, p, lam, sched)
        assert pl.target == target
        assert pl.achieved_loss == pytest.approx(best, abs=1e-12)
        assert pl.weight == pytest.approx(spread, abs=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 0.01, 0.2, 1.5])
    def test_tier_fast_path_equals_brute_force(self, chain_data, chain_model, lam):
        sched = CostSchedule((0.3, 1.0))
        for x in [w for w in chain_data if len(w) <= 5][:6]:
            params = ModifiedLossParams(lam)
            fast = exhaustive_pseudo_label(x, x.gold, chain_model, params, sched)
            slow = exhaustive_pseudo_label(x, x.gold, Opaque(chain_model), params, sched)
            assert fast.target == slow.target
            assert fast.achieved_loss == pytest.approx(slow.achieved_loss, abs=1e-12)
            assert fast.weight == pytest.approx(slow.weight, abs=1e-12)

    def test_guard(self):
        n = MAX_EXHAUSTIVE_BITS // 2 + 1
        with pytest.raises(StateSpaceTooLarge, match="trajectory or parsimonious"):
            exhaustive_pseudo_label("x", (0,) * n, TablePredictor(2, n), ModifiedLossParams(0.0),
                                    CostSchedule((1, 1)))

    def test_huge_lambda_gives_zero_state(self):
        p = TablePredictor(2, 3, seed=2)
        pl = exhaustive_pseudo_label("x", (0, 1, 2), p, ModifiedLossParams(100.0), CostSchedule((1, 1)))
        assert pl.target.count() == 0

    def test_lambda_zero_min_bits_among_zero_loss(self):
        gold = (1, 2, 3)
        p = FixOnAcquirePredictor(gold, cheap_wrong={1})
        pl = exhaustive_pseudo_label("x", gold, p, ModifiedLossParams(0.0), CostSchedule((1, 1)))
        assert pl.achieved_loss == 0
        assert pl.target.to_bitmap() == ["000", "010"]


class TestTrajectory:
    def test_length_and_validity(self):
        p = TablePredictor(2, 3, seed=1)
        traj, pl = trajectory_search("x", (0, 1, 2), p, ModifiedLossParams(0.1), CostSchedule((1, 2)))
        assert len(traj.states) == 2 * 3 + 1
        traj.validate()
        assert pl.target in traj.states
        assert pl.weight == pytest.approx(max(traj.losses) - min(traj.losses))

    def test_greedy_step_choice(self):
        p = TablePredictor(2, 2, seed=9)
        params, sched = ModifiedLossParams(0.3), CostSchedule((0.5, 1.0))
        traj, _ = trajectory_search("x", (0, 1), p, params, sched)
        f = lambda s: hamming_loss(p.predict("x", s), (0, 1)) + 0.3 * state_cost(s, sched)
        for a, b in zip(traj.states, traj.states[1:]):
            options = [a.with_bit(k, c) for k in range(2) for c in range(2) if not a.bits[k, c]]
            assert f(b) == min(f(o) for o in options)
            # lowest (k, c) on ties
            assert b == next(o for o in options if f(o) == f(b))

    @pytest.mark.parametrize("seed", range(10))
    def test_dominated_by_exhaustive(self, seed):
        rng = np.random.default_rng(seed)
        p = TablePredictor(2, 3, seed=seed)
        gold = tuple(int(v) for v in rng.integers(3, size=3))
        params, sched = ModifiedLossParams(0.0), CostSchedule((1, 1))
        ex = exhaustive_pseudo_label("x", gold, p, params, sched)
        traj, tr = trajectory_search("x", gold, p, params, sched)
        assert ex.achieved_loss <= tr.achieved_loss <= traj.losses[0]
        assert tr.achieved_loss <= traj.losses[-1]


def one_pass_rule(x, gold, predictor, lam, sched, tau):
    k, n = predictor.num_tiers, predictor.num_parts(x)
    zero = np.zeros((k, n), bool)

    def c(bits):
        s = AcquisitionState(bits)
        return hamming_loss(predictor.predict(x, s), gold) + lam * state_cost(s, sched)
    base = c(zero)
    out = zero.copy()
    for t, p in itertools.product(range(k), range(n)):
        b = zero.copy()
        b[t, p] = True
        v = c(b)
        if base - v >= tau and v < base:
            out |= b
    return AcquisitionState(out)


class TestParsimonious:
    def test_flags_exactly_wrong_parts(self):
        gold = (1, 2, 3, 4, 0)
        wrong = {0, 3}
        p = FixOnAcquirePredictor(gold, wrong)
        pl = parsimonious_search("x", gold, p, ModifiedLossParams(0.0), CostSchedule((0, 1)), tau=0.0)
        assert set(np.flatnonzero(pl.target.bits[1])) == wrong
        assert not pl.target.bits[0].any()
        assert pl.achieved_loss == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_recomputation(self, seed):
        p = TablePredictor(2, 3, seed=seed)
        gold = (0, 1, 2)
        sched = CostSchedule((0.1, 0.4))
        for tau in (0.0, 0.5):
            pl = parsimonious_search("x", gold, p, ModifiedLossParams(0.2), sched, tau=tau)
            assert pl.target == one_pass_rule("x", gold, p, 0.2, sched, tau)

    def test_large_tau_gives_zero(self):
        p = TablePredictor(2, 3, seed=3)
        pl = parsimonious_search("x", (0, 1, 2), p, ModifiedLossParams(0.0), CostSchedule((1, 1)), tau=10)
        assert pl.target.count() == 0

    def test_negative_tau(self):
        with pytest.raises(ValueError):
            parsimonious_search("x", (0,), TablePredictor(2, 1), ModifiedLossParams(0.0),
                                CostSchedule((1, 1)), tau=-1)


class TestDispatchAndIO:
    def test_dispatch(self):
        p = TablePredictor(2, 2, seed=5)
        params, sched = ModifiedLossParams(0.1), CostSchedule((1, 1))
        for kind in SearchKind:
            assert pseudo_label(kind.value, "x", (0, 1), p, params, sched).search_kind is kind

    def test_jsonl_round_trip(self, tmp_path):
        pl = PseudoLabel(AcquisitionState([[0, 1], [1, 0]]), 2.5, 0.75, SearchKind.TRAJECTORY)
        sched = CostSchedule((1, 2))
        path = tmp_path / "pl.jsonl"
        write_jsonl(path, [pl.to_record("a", sched)])
        (rec,) = read_jsonl(path)
        assert rec["id"] == "a" and rec["feature_cost"] == 3.0
        assert PseudoLabel.from_record(rec) == pl
