import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from budgetsp.core import (
    PRESETS,
    AcquisitionState,
    CostSchedule,
    DimensionError,
    LossKind,
    ModifiedLossParams,
    acquirable_actions,
    base_state,
    feasible_successors,
    full_acquisition,
    hamming_loss,
    indicator_loss,
    is_tree,
    modified_loss,
    preset,
    state_cost,
    state_hamming_distance,
)

from conftest import TablePredictor


def states(k=st.integers(1, 3), n=st.integers(1, 5)):
    return st.tuples(k, n).flatmap(
        lambda kn: st.lists(st.booleans(), min_size=kn[0] * kn[1], max_size=kn[0] * kn[1]).map(
            lambda bits: AcquisitionState(np.array(bits).reshape(kn))))


class TestAcquisitionState:
    def test_bitmap_round_trip(self):
        s = AcquisitionState([[1, 0, 1], [0, 1, 1]])
        assert s.to_bitmap() == ["101", "011"]
        assert AcquisitionState.from_bitmap(s.to_bitmap()) == s

    def test_immutable(self):
        s = AcquisitionState.zeros(2, 3)
        with pytest.raises(ValueError):
            s.bits[0, 0] = True

    def test_rejects_non_matrix(self):
        with pytest.raises(DimensionError):
            AcquisitionState([1, 0, 1])

    def test_effective_tiers(self):
        s = AcquisitionState([[1, 0, 0, 1], [0, 0, 1, 0], [0, 1, 1, 0]])
        assert s.effective_tiers().tolist() == [0, 2, 2, 0]

    def test_sort_key_fewest_bits_then_lexicographic(self):
        a = AcquisitionState([[1, 0], [0, 0]])
        b = AcquisitionState([[0, 1], [0, 0]])
        c = AcquisitionState([[0, 0], [1, 1]])
        assert sorted([c, b, a], key=AcquisitionState.sort_key) == [a, b, c]

    def test_or_and_covers(self):
        a = AcquisitionState([[1, 0], [0, 0]])
        b = AcquisitionState([[0, 0], [0, 1]])
        u = a | b
        assert u.covers(a) and u.covers(b) and not a.covers(u)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            AcquisitionState.zeros(2, 2) | AcquisitionState.zeros(2, 3)

    def test_full_acquisition_and_base(self):
        assert full_acquisition(2, 3).to_bitmap() == ["000", "111"]
        assert base_state(2, 3).to_bitmap() == ["111", "000"]


class TestStateCost:
    def test_zero_state(self):
        assert state_cost(AcquisitionState.zeros(2, 4), CostSchedule((3.0, 5.0))) == 0

    def test_all_one(self):
        assert state_cost(AcquisitionState.ones(2, 3), CostSchedule((1, 2))) == 9

    def test_tier1_on_two_parts(self):
        s = AcquisitionState([[0, 0, 0], [1, 0, 1]])
        assert state_cost(s, CostSchedule((1, 2))) == 4

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            state_cost(AcquisitionState.zeros(3, 2), CostSchedule((1, 2)))

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            CostSchedule((-1.0, 1.0))
        with pytest.raises(ValueError):
            CostSchedule((0.0, 1.0), inference_cost=-1)

    @given(states(), st.data())
    @settings(max_examples=80, deadline=None)
    def test_monotone_cost(self, s, data):
        k = s.num_tiers
        costs = data.draw(st.lists(st.floats(0.01, 10), min_size=k, max_size=k))
        sched = CostSchedule(tuple(costs))
        for nxt in feasible_successors(s):
            assert state_cost(nxt, sched) > state_cost(s, sched)
        zero_sched = CostSchedule(tuple(0.0 for _ in range(k)))
        for nxt in feasible_successors(s):
            assert state_cost(nxt, zero_sched) >= state_cost(s, zero_sched)


class TestPresets:
    def test_paper_parse(self):
        s = PRESETS["paper-parse"]
        assert s.tier_costs == (165.0, 110.0)
        assert s.tier_costs[0] + s.tier_costs[1] == 275.0
        assert s.inference_cost == 75.0

    def test_override(self):
        s = preset("ocr", tier_costs=[0.0, 3.0])
        assert s.tier_costs == (0.0, 3.0)

    def test_unknown(self):
        with pytest.raises(KeyError):
            preset("nope")

    def test_dict_round_trip(self):
        s = CostSchedule((1.0, 2.5), 3.0, 0.5)
        assert CostSchedule.from_dict(s.to_dict()) == s


class TestLosses:
    @pytest.mark.parametrize("pred,gold,want", [([1, 2], [1, 2], 0), ([1, 2], [1, 3], 1),
                                                ([1, 2, 3], [4, 5, 6], 3)])
    def test_hamming(self, pred, gold, want):
        assert hamming_loss(pred, gold) == want

    @pytest.mark.parametrize("pred,gold,want", [([1, 2], [1, 2], 0), ([1, 2], [1, 3], 1), ([9], [9], 0)])
    def test_indicator(self, pred, gold, want):
        assert indicator_loss(pred, gold) == want

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            hamming_loss([1], [1, 2])
        with pytest.raises(DimensionError):
            indicator_loss([1], [1, 2])

    @given(st.integers(1, 6).flatmap(lambda n: st.tuples(
        *[st.lists(st.integers(0, 3), min_size=n, max_size=n) for _ in range(3)])))
    def test_hamming_is_metric(self, abc):
        a, b, c = abc
        assert hamming_loss(a, a) == 0
        assert hamming_loss(a, b) == hamming_loss(b, a)
        assert hamming_loss(a, c) <= hamming_loss(a, b) + hamming_loss(b, c)
        assert (hamming_loss(a, b) == 0) == (a == b)


class TestModifiedLoss:
    def test_lambda_zero_is_raw_loss(self):
        p = TablePredictor(2, 3)
        s = AcquisitionState([[1, 0, 0], [0, 1, 0]])
        gold = (0, 1, 2)
        v = modified_loss("x", gold, s, p, ModifiedLossParams(0.0), CostSchedule((1, 2)))
        assert v == hamming_loss(p.predict("x", s), gold)

    def test_independent_recomputation(self, chain_data, chain_model):
        x = chain_data[0]
        sched = CostSchedule((0.5, 2.0))
        s = AcquisitionState([[1] + [0] * (len(x) - 1), [0, 1] + [0] * (len(x) - 2)])
        pred = chain_model.predict(x, s)
        loss = sum(a != b for a, b in zip(pred, x.gold))
        cost = 0.5 * 1 + 2.0 * 1
        v = modified_loss(x, x.gold, s, chain_model, ModifiedLossParams(0.3), sched)
        assert v == pytest.approx(loss + 0.3 * cost, abs=1e-12)

    def test_full_state_zero_loss(self):
        class Perfect:
            num_tiers = 2

            def num_parts(self, x):
                return 2

            def predict(self, x, s):
                return (4, 5)
        full = AcquisitionState.ones(2, 2)
        sched = CostSchedule((1, 2))
        v = modified_loss("x", (4, 5), full, Perfect(), ModifiedLossParams(0.7), sched)
        assert v == pytest.approx(0.7 * 6)

    @given(st.floats(0, 5), st.floats(0, 5), st.integers(0, 2**6 - 1))
    @settings(max_examples=50, deadline=None)
    def test_affine_in_lambda(self, l1, l2, mask):
        p = TablePredictor(2, 3, seed=4)
        s = AcquisitionState(np.array([(mask >> i) & 1 for i in range(6)], bool).reshape(2, 3))
        sched = CostSchedule((0.5, 1.5))
        gold = (0, 1, 2)
        f = lambda lam: modified_loss("x", gold, s, p, ModifiedLossParams(lam), sched)
        assert f(l1) - f(0) == pytest.approx(l1 * state_cost(s, sched), abs=1e-9)
        mid = 0.5 * (l1 + l2)
        assert f(mid) == pytest.approx(0.5 * (f(l1) + f(l2)), abs=1e-9)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            ModifiedLossParams(-0.1)

    def test_loss_kind_coerced(self):
        assert ModifiedLossParams(0.1, "indicator").loss_kind is LossKind.INDICATOR


class TestSuccessors:
    def test_distance_examples(self):
        z = AcquisitionState.zeros(2, 2)
        assert state_hamming_distance(z, z) == 0
        assert state_hamming_distance(z, AcquisitionState.ones(2, 2)) == 4
        assert state_hamming_distance(z, z.with_bit(1, 0)) == 1

    def test_distance_mismatch(self):
        with pytest.raises(DimensionError):
            state_hamming_distance(AcquisitionState.zeros(2, 2), AcquisitionState.zeros(2, 3))

    def test_counts(self):
        assert feasible_successors(AcquisitionState.ones(2, 2)) == []
        assert len(feasible_successors(AcquisitionState.zeros(2, 2))) == 4
        assert len(feasible_successors(AcquisitionState.zeros(2, 2).with_bit(0, 1))) == 3

    def test_order(self):
        succ = feasible_successors(AcquisitionState.zeros(2, 2))
        assert [s.to_bitmap() for s in succ] == [["10", "00"], ["01", "00"], ["00", "10"], ["00", "01"]]

    def test_acquirable_actions_skip_tier0(self):
        s = AcquisitionState([[0, 0], [1, 0]])
        assert acquirable_actions(s) == [(1, 1)]
        assert len(feasible_successors(s, min_tier=1)) == 1

    @given(states())
    @settings(max_examples=80, deadline=None)
    def test_successor_invariants(self, s):
        succ = feasible_successors(s)
        assert len(succ) == s.bits.size - s.count()
        assert (len(succ) == 0) == s.is_full()
        for nxt in succ:
            assert state_hamming_distance(s, nxt) == 1
            assert nxt.covers(s)


class TestIsTree:
    @pytest.mark.parametrize("heads,ok", [((0,), True), ((2, 0), True), ((1,), False),
                                          ((2, 1), False), ((0, 0), True), ((3, 0), False), ((), False)])
    def test_cases(self, heads, ok):
        assert is_tree(heads) is ok
