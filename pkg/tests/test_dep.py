
import numpy as np
import pytest

from budgetsp.core import AcquisitionState, DimensionError, is_tree
from budgetsp.dep import (
    DepModel,
    Sentence,
    cle_mst,
    edge_features,
    enumerate_arborescences,
    train_dep,
    tree_score,
    uas,
)


def sent3():
    return Sentence(("The", "dog", "barks"), ("DT", "NN", "VB"), (2, 3, 0))


def brute_force_mst(m):
    n = m.shape[0] - 1
    best, arg = -np.inf, None
    for heads in enumerate_arborescences(n):
        s = tree_score(m, heads)
        if s > best + 1e-12:
            best, arg = s, heads
    return arg, best


class TestSentence:
    def test_rejects_non_tree(self):
        with pytest.raises(ValueError):
            Sentence(("a", "b"), ("X", "Y"), (2, 1))

    def test_rejects_ragged(self):
        with pytest.raises(DimensionError):
            Sentence(("a",), ("X", "Y"), (0, 1))


class TestEdgeFeatures:
    def test_pos_templates_only_at_tier0(self):
        f = edge_features(sent3(), 2, 1, 0)
        assert (0, "hp,dp=NN,DT") in f
        assert (0, "hp,dp=NN,DT|L,1") in f
        assert all(k == 0 for k, _ in f)
        assert not any("w" in t.split("=")[0] for _, t in f)

    def test_tier1_adds_forms(self):
        f = edge_features(sent3(), 2, 1, 1)
        assert (1, "hw,dw=dog,the") in f
        assert (1, "hw=dog|L,1") in f

    def test_between_pos(self):
        f = edge_features(sent3(), 3, 1, 1)
        assert (1, "hp,bp,dp=VB,NN,DT") in f
        assert (1, "hp,dp=VB,DT|L,2") not in f
        assert (0, "hp,dp=VB,DT|L,2") in f

    def test_root_edge(self):
        f = edge_features(sent3(), 0, 3, 0)
        assert (0, "hp,dp=<root>,VB") in f

    @pytest.mark.parametrize("h,d", [(0, 1), (1, 2), (3, 1), (2, 3)])
    def test_tier_superset(self, h, d):
        assert edge_features(sent3(), h, d, 0) < edge_features(sent3(), h, d, 1)

    @pytest.mark.parametrize("h,d,k", [(1, 1, 0), (0, 0, 0), (4, 1, 0), (1, 2, 2)])
    def test_invalid(self, h, d, k):
        with pytest.raises(IndexError):
            edge_features(sent3(), h, d, k)


class TestCLE:
    @pytest.mark.parametrize("seed", range(30))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        m = rng.normal(size=(n + 1, n + 1))
        heads = cle_mst(m)
        assert is_tree(heads)
        want, best = brute_force_mst(m)
        assert tree_score(m, heads) == pytest.approx(best)
        assert heads == want

    def test_two_cycle_contracted(self):
        # greedy choice makes 1 <-> 2 a cycle; the root must break it
        m = np.full((3, 3), -np.inf)
        m[1, 2], m[2, 1] = 10, 10
        m[0, 1], m[0, 2] = 1, 3
        heads = cle_mst(m)
        assert heads == (2, 0)
        assert tree_score(m, heads) == 13

    def test_single_word(self):
        assert cle_mst(np.array([[0.0, 5.0], [0.0, 0.0]])) == (0,)

    def test_needs_a_word(self):
        with pytest.raises(ValueError):
            cle_mst(np.zeros((1, 1)))

    def test_uas(self):
        assert uas((2, 0, 2), (2, 3, 0)) == pytest.approx(1 / 3)


class TestDepModel:
    def test_zero_weights_give_some_tree(self):
        m = DepModel.zeros(hash_bits=10)
        s = sent3()
        heads = m.predict(s, AcquisitionState.zeros(2, 3))
        assert is_tree(heads)
        np.testing.assert_array_equal(m.score_matrix(s, AcquisitionState.zeros(2, 3))[0, 1:], 0)

    def test_invalid_gate(self):
        with pytest.raises(ValueError):
            DepModel.zeros(10, gate_on="both")

    @pytest.mark.parametrize("gate_on", ["head", "dependent"])
    def test_bit_changes_only_its_row_or_column(self, treebank, gate_on):
        rng = np.random.default_rng(0)
        m = DepModel([rng.normal(size=1 << 10) for _ in range(2)], 10, gate_on)
        s = next(t for t in treebank if len(t) >= 4)
        n = len(s)
        base = m.score_matrix(s, AcquisitionState.zeros(2, n))
        word = 2
        flipped = m.score_matrix(s, AcquisitionState.zeros(2, n).with_bit(1, word - 1))
        diff = ~np.isclose(base, flipped) & np.isfinite(base)
        idx = np.argwhere(diff)
        assert len(idx)
        axis = 0 if gate_on == "head" else 1
        assert set(idx[:, axis]) == {word}

    def test_root_row_never_gated(self, dep_model, treebank):
        s = treebank[0]
        n = len(s)
        a = dep_model.score_matrix(s, AcquisitionState.zeros(2, n))
        b = dep_model.score_matrix(s, AcquisitionState([[1] * n, [0] * n]))
        np.testing.assert_array_equal(a, b)

    def test_decoder_matches_predict(self, dep_model, treebank):
        rng = np.random.default_rng(1)
        for s in treebank[:8]:
            dec = dep_model.decoder(s)
            for _ in range(4):
                st = AcquisitionState(rng.random((2, len(s))) < 0.5)
                assert dec(st) == dep_model.predict(s, st)

    def test_confidence(self, dep_model, treebank):
        s = treebank[0]
        st = AcquisitionState.ones(2, len(s))
        heads, margin = dep_model.confidence(s, st)
        assert heads == dep_model.predict(s, st)
        assert margin >= 0

    def test_shape_checked(self, dep_model):
        with pytest.raises(DimensionError):
            dep_model.predict(sent3(), AcquisitionState.zeros(2, 4))

    def test_save_load(self, tmp_path, dep_model):
        p = tmp_path / "d.bspk"
        dep_model.save(p)
        back = DepModel.load(p)
        assert back.hash_bits == dep_model.hash_bits and back.gate_on == dep_model.gate_on
        for a, b in zip(back.weights, dep_model.weights):
            assert a.tobytes() == b.tobytes()


class TestTraining:
    def test_toy_full_accuracy(self):
        data = [Sentence(("the", "dog", "barks"), ("DT", "NN", "VB"), (2, 3, 0)),
                Sentence(("a", "cat", "sleeps"), ("DT", "NN", "VB"), (2, 3, 0)),
                Sentence(("dogs", "bark"), ("NN", "VB"), (2, 0))]
        m = train_dep(data, epochs=10, hash_bits=12)
        for s in data:
            for st in (AcquisitionState.zeros(2, len(s)), AcquisitionState.ones(2, len(s))):
                assert uas(m.predict(s, st), s.gold) == 1.0

    def test_zero_learning_rate(self, treebank):
        m = train_dep(treebank[:5], epochs=1, learning_rate=0.0, hash_bits=10)
        assert not any(w.any() for w in m.weights)

    def test_bad_epochs(self, treebank):
        with pytest.raises(ValueError):
            train_dep(treebank, epochs=0)

    def test_deterministic(self, treebank):
        a = train_dep(treebank[:10], epochs=2, hash_bits=10, seed=3)
        b = train_dep(treebank[:10], epochs=2, hash_bits=10, seed=3)
        assert all(np.array_equal(u, v) for u, v in zip(a.weights, b.weights))

    def test_dependent_gating_trains(self, treebank):
        m = train_dep(treebank[:10], epochs=2, hash_bits=10, gate_on="dependent")
        assert m.gate_on == "dependent"
        s = treebank[0]
        assert is_tree(m.predict(s, AcquisitionState.ones(2, len(s))))
