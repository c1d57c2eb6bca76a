"""Feature-acquisition policies.

Policies only ever look at tier-0 information and the current state.  The
policy graph has no edges, so the one-shot policy is a set of independent
per-(part, tier) linear classifiers trained with an importance-weighted
hinge loss, and each anytime step is a linear ranker over the available
single-bit additions trained with a cost-sensitive (margin-rescaled) hinge.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import serialize
from .chain import GlyphSequence
from .core import (
    AcquisitionState,
    CostSchedule,
    ModifiedLossParams,
    Predictor,
    acquirable_actions,
    full_acquisition,
)
from .dep import Sentence
from .oracle import ModifiedLoss, PseudoLabel

log = logging.getLogger(__name__)

LENGTH_BUCKETS = (3, 6, 9, 14, 20, 30)


def _length_onehot(n: int) -> np.ndarray:
    v = np.zeros(len(LENGTH_BUCKETS) + 1)
    v[int(np.searchsorted(LENGTH_BUCKETS, n))] = 1.0
    return v


def _position_block(n: int) -> np.ndarray:
    """Relative position, first/last flags and a length bucket for every part."""
    rel = np.arange(n) / max(n - 1, 1)
    first = (np.arange(n) == 0).astype(float)
    last = (np.arange(n) == n - 1).astype(float)
    return np.column_stack([rel, first, last, np.tile(_length_onehot(n), (n, 1))])


class ChainPolicyFeatures:
    """Per-glyph policy features from the pixel view only.

    Raw pixels, ink density, a pixel-transition roughness score, the same two
    summaries for both neighbours, position encodings and a bias.
    """

    name = "chain"

    def fit(self, data) -> "ChainPolicyFeatures":
        return self

    def to_meta(self) -> dict:
        return {"name": self.name}

    @staticmethod
    def _summaries(glyphs: np.ndarray) -> np.ndarray:
        g = glyphs.astype(float)
        density = g.mean(axis=(1, 2))
        flips = np.abs(np.diff(g, axis=1)).mean(axis=(1, 2)) + np.abs(np.diff(g, axis=2)).mean(axis=(1, 2))
        return np.column_stack([density, flips])

    def part_features(self, x: GlyphSequence) -> np.ndarray:
        n = len(x)
        pixels = x.glyphs.reshape(n, -1).astype(float)
        summ = self._summaries(x.glyphs)
        pad = np.zeros((1, summ.shape[1]))
        left = np.vstack([pad, summ[:-1]])
        right = np.vstack([summ[1:], pad])
        return np.hstack([pixels, summ, left, right, _position_block(n), np.ones((n, 1))])


class DepPolicyFeatures:
    """Per-word policy features from POS tags only: own and neighbour tags, position, bias."""

    name = "dep"

    def __init__(self, vocab: Sequence[str] = ()):
        self.vocab = list(vocab)
        self._index = {t: i for i, t in enumerate(self.vocab)}

    def fit(self, data: Sequence[Sentence]) -> "DepPolicyFeatures":
        tags = sorted({t for s in data for t in s.tags})
        self.__init__(tags)
        return self

    def to_meta(self) -> dict:
        return {"name": self.name, "vocab": self.vocab}

    def _onehot(self, tags: Sequence[str]) -> np.ndarray:
        # columns: vocab..., <unk>, <pad>
        v = len(self.vocab)
        m = np.zeros((len(tags), v + 2))
        for i, t in enumerate(tags):
            m[i, self._index.get(t, v) if t is not None else v + 1] = 1.0
        return m

    def part_features(self, x: Sentence) -> np.ndarray:
        tags = list(x.tags)
        n = len(tags)
        return np.hstack([
            self._onehot(tags),
            self._onehot([None] + tags[:-1]),
            self._onehot(tags[1:] + [None]),
            _position_block(n),
            np.ones((n, 1)),
        ])


def featurizer_from_meta(meta: dict):
    if meta["name"] == "chain":
        return ChainPolicyFeatures()
    if meta["name"] == "dep":
        return DepPolicyFeatures(meta["vocab"])
    raise ValueError(f"unknown featurizer {meta['name']!r}")


def default_featurizer(data):
    if isinstance(data[0], Sentence):
        return DepPolicyFeatures().fit(data)
    return ChainPolicyFeatures()


# ---------------------------------------------------------------------------
# Standardization and the weighted hinge solver


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, w: np.ndarray | None = None) -> "Standardizer":
        w = np.ones(len(X)) if w is None else np.asarray(w, dtype=float)
        tot = w.sum()
        if tot <= 0:
            return cls(np.zeros(X.shape[1]), np.ones(X.shape[1]))
        mean = w @ X / tot
        var = w @ (X - mean) ** 2 / tot
        scale = np.sqrt(var)
        const = scale < 1e-12
        mean[const] = 0.0
        scale[const] = 1.0
        return cls(mean, scale)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


def weighted_hinge_svm(X: np.ndarray, y: np.ndarray, weights: np.ndarray, reg: float,
                       epochs: int = 400, step: float = 1.0) -> np.ndarray:
    """Minimize ``reg/2 ||w||^2 + sum_r weights_r * max(0, 1 - y_r <w, x_r>)``.

    Full-batch subgradient descent on the objective divided by the total
    weight, step ``step / sqrt(t)``, returning the average of the iterates
    from the second half of the run.  Scaling ``weights`` and ``reg`` by the
    same factor leaves every iterate unchanged.
    """
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    w = np.zeros(X.shape[1])
    if total <= 0:
        return w
    omega = weights / total
    lam = reg / total
    avg = np.zeros_like(w)
    n_avg = 0
    for t in range(1, epochs + 1):
        margin = y * (X @ w)
        active = margin < 1.0
        grad = lam * w - (omega[active] * y[active]) @ X[active]
        w = w - (step / np.sqrt(t)) * grad
        if t > epochs // 2:
            avg += w
            n_avg += 1
    return avg / n_avg


# ---------------------------------------------------------------------------
# One-shot policy


@dataclass
class PolicyTrainingSet:
    """Part-level rows: features, per-tier binary targets, importance weights."""

    features: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    example: np.ndarray
    fold: np.ndarray

    def drop_zero_weight(self) -> "PolicyTrainingSet":
        keep = self.weights > 0
        return PolicyTrainingSet(self.features[keep], self.targets[keep], self.weights[keep],
                                 self.example[keep], self.fold[keep])

    def records(self):
        for i in range(len(self.weights)):
            yield {
                "example": int(self.example[i]),
                "fold": int(self.fold[i]),
                "weight": float(self.weights[i]),
                "targets": [int(t) for t in self.targets[i]],
                "features": [float(v) for v in self.features[i]],
            }


def build_oneshot_training_set(data: Sequence, pseudo: Sequence[PseudoLabel], featurizer,
                               folds: Sequence[int] | None = None,
                               use_weights: bool = True) -> PolicyTrainingSet:
    feats, targets, weights, example, fold = [], [], [], [], []
    for i, (x, pl) in enumerate(zip(data, pseudo)):
        f = featurizer.part_features(x)
        feats.append(f)
        targets.append(pl.target.bits[1:].T.astype(np.int8))
        w = pl.weight if use_weights else 1.0
        weights.append(np.full(len(f), w))
        example.append(np.full(len(f), i))
        fold.append(np.full(len(f), folds[i] if folds is not None else 0))
    return PolicyTrainingSet(np.vstack(feats), np.vstack(targets), np.concatenate(weights),
                             np.concatenate(example), np.concatenate(fold))


@dataclass
class OneShotPolicy:
    """Acquire tier ``k`` for part ``c`` iff its linear score is positive."""

    coef: np.ndarray  # (num_tiers - 1, dim)
    standardizer: Standardizer
    featurizer: object
    num_tiers: int = 2
    status: str = "ok"
    lam: float | None = None  # training trade-off, kept for reporting

    def scores(self, x) -> np.ndarray:
        z = self.standardizer(self.featurizer.part_features(x))
        return z @ self.coef.T

    def decide(self, x) -> AcquisitionState:
        s = self.scores(x)
        bits = np.zeros((self.num_tiers, len(s)), dtype=bool)
        bits[1:] = (s > 0).T
        return AcquisitionState(bits)

    __call__ = decide

    def save(self, path) -> None:
        serialize.save(path, "oneshot-policy",
                       {"num_tiers": self.num_tiers, "status": self.status, "lam": self.lam,
                        "featurizer": self.featurizer.to_meta()},
                       {"coef": self.coef, "mean": self.standardizer.mean,
                        "scale": self.standardizer.scale})

    @classmethod
    def load(cls, path) -> "OneShotPolicy":
        kind, meta, arr = serialize.load(path)
        if kind != "oneshot-policy":
            raise serialize.FormatError(f"expected a one-shot policy, found {kind!r}")
        return cls(arr["coef"], Standardizer(arr["mean"], arr["scale"]),
                   featurizer_from_meta(meta["featurizer"]), meta["num_tiers"], meta["status"],
                   meta.get("lam"))


def train_oneshot(ts: PolicyTrainingSet, featurizer, class_weights: Sequence[float] | None = None,
                  reg: float | None = None, epochs: int = 400, num_tiers: int | None = None
                  ) -> OneShotPolicy:
    """Importance-weighted hinge classifiers, one per acquirable tier.

    ``class_weights[k-1]`` multiplies the weight of rows whose tier-``k``
    target is positive.  ``reg`` defaults to ``1e-3`` times the total row
    weight.
    """
    if len(ts.weights) == 0:
        raise ValueError("empty policy training set")
    if np.any(ts.weights < 0):
        raise ValueError("importance weights must be nonnegative")
    n_acq = ts.targets.shape[1]
    num_tiers = num_tiers or n_acq + 1
    cw = np.ones(n_acq) if class_weights is None else np.asarray(class_weights, dtype=float)
    std = Standardizer.fit(ts.features, ts.weights)
    if ts.weights.sum() <= 0:
        log.warning("all importance weights are zero; returning the acquire-nothing policy")
        return OneShotPolicy(np.zeros((n_acq, ts.features.shape[1])), std, featurizer,
                             num_tiers, status="degenerate")
    Z = std(ts.features)
    r = 1e-3 * ts.weights.sum() if reg is None else reg
    coef = np.zeros((n_acq, Z.shape[1]))
    for k in range(n_acq):
        y = np.where(ts.targets[:, k] > 0, 1.0, -1.0)
        w = ts.weights * np.where(y > 0, cw[k], 1.0)
        coef[k] = weighted_hinge_svm(Z, y, w, r, epochs)
    return OneShotPolicy(coef, std, featurizer, num_tiers)


# ---------------------------------------------------------------------------
# Anytime policy


def state_block(state: AcquisitionState, parts: np.ndarray) -> np.ndarray:
    """Current-state features for candidate parts: own/neighbour bits and overall fraction."""
    acq = state.bits[1:]
    n = state.num_parts
    own = acq[:, parts].T.astype(float)
    left = np.where(parts > 0, acq[:, np.maximum(parts - 1, 0)], False).T.astype(float)
    right = np.where(parts < n - 1, acq[:, np.minimum(parts + 1, n - 1)], False).T.astype(float)
    frac = np.full((len(parts), 1), acq.mean() if acq.size else 0.0)
    return np.hstack([own, left, right, frac])


def action_features(part_feats: np.ndarray, state: AcquisitionState,
                    actions: Sequence[tuple[int, int]]) -> np.ndarray:
    """One row per (tier, part) action; the tier picks which weight block is active."""
    n_acq = state.num_tiers - 1
    parts = np.array([c for _, c in actions], dtype=int)
    base = np.hstack([part_feats[parts], state_block(state, parts)])
    out = np.zeros((len(actions), n_acq * base.shape[1]))
    d = base.shape[1]
    for r, (k, _) in enumerate(actions):
        out[r, (k - 1) * d:k * d] = base[r]
    return out


def _group_argmax(values: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """Index of the first maximal entry of ``values`` within each group (groups contiguous)."""
    order = np.lexsort((np.arange(len(values)), -values, groups))
    _, first = np.unique(groups[order], return_index=True)
    return order[first]


def cost_sensitive_ranker(X: np.ndarray, groups: np.ndarray, delta: np.ndarray, reg: float,
                          epochs: int = 300, step: float = 1.0) -> np.ndarray:
    """Margin-rescaled multiclass hinge over candidate groups.

    Minimizes ``reg/2 ||w||^2 + sum_g [max_s (delta_s + <w, x_s>) - <w, x_{s*_g}>]``
    where ``s*_g`` is the first zero-``delta`` candidate of group ``g``.
    Same normalization and averaging as :func:`weighted_hinge_svm`.
    """
    n_groups = int(groups.max()) + 1 if len(groups) else 0
    w = np.zeros(X.shape[1])
    if n_groups == 0:
        return w
    gmax = np.zeros(n_groups)
    np.maximum.at(gmax, groups, delta)
    total = gmax.sum()
    if total <= 0:
        return w
    target = _group_argmax(-delta, groups, n_groups)
    lam = reg / total
    avg = np.zeros_like(w)
    n_avg = 0
    for t in range(1, epochs + 1):
        aug = delta + X @ w
        worst = _group_argmax(aug, groups, n_groups)
        viol = worst != target
        grad = lam * w + (X[worst[viol]].sum(axis=0) - X[target[viol]].sum(axis=0)) / total
        w = w - (step / np.sqrt(t)) * grad
        if t > epochs // 2:
            avg += w
            n_avg += 1
    return avg / n_avg


@dataclass
class AnytimePolicy:
    """Per-step linear rankers over single-bit additions; step ``t`` uses ``coefs[min(t, T)-1]``."""

    coefs: list[np.ndarray]
    standardizers: list[Standardizer]
    featurizer: object
    num_tiers: int = 2

    @property
    def num_steps(self) -> int:
        return len(self.coefs)

    def choose(self, x, state: AcquisitionState, t: int,
               part_feats: np.ndarray | None = None) -> AcquisitionState:
        """Apply step ``t`` (1-based) to ``state``; returns the successor state."""
        actions = acquirable_actions(state)
        if not actions:
            raise ValueError("no acquirable features left: policy undefined on the full state")
        pf = self.featurizer.part_features(x) if part_feats is None else part_feats
        i = min(t, self.num_steps) - 1
        scores = self.standardizers[i](action_features(pf, state, actions)) @ self.coefs[i]
        k, c = actions[int(np.argmax(scores))]
        return state.with_bit(k, c)

    def save(self, path) -> None:
        arrays = {}
        for i, (c, s) in enumerate(zip(self.coefs, self.standardizers)):
            arrays[f"coef_{i:04d}"] = c
            arrays[f"mean_{i:04d}"] = s.mean
            arrays[f"scale_{i:04d}"] = s.scale
        serialize.save(path, "anytime-policy",
                       {"num_tiers": self.num_tiers, "steps": self.num_steps,
                        "featurizer": self.featurizer.to_meta()}, arrays)

    @classmethod
    def load(cls, path) -> "AnytimePolicy":
        kind, meta, arr = serialize.load(path)
        if kind != "anytime-policy":
            raise serialize.FormatError(f"expected an anytime policy, found {kind!r}")
        steps = meta["steps"]
        return cls([arr[f"coef_{i:04d}"] for i in range(steps)],
                   [Standardizer(arr[f"mean_{i:04d}"], arr[f"scale_{i:04d}"]) for i in range(steps)],
                   featurizer_from_meta(meta["featurizer"]), meta["num_tiers"])


@dataclass
class AnytimeTrainingLog:
    steps: int = 0
    trajectories: list[list[AcquisitionState]] = field(default_factory=list)
    live_per_step: list[int] = field(default_factory=list)


def train_anytime(data: Sequence, golds: Sequence, predictors: Sequence[Predictor],
                  params: ModifiedLossParams, sched: CostSchedule, featurizer=None,
                  reg: float | None = None, epochs: int = 300, use_weights: bool = True,
                  log_out: AnytimeTrainingLog | None = None) -> AnytimePolicy:
    """Greedy sequential policy learning.

    ``predictors[i]`` is the (out-of-fold) predictor used to score example
    ``i``.  At each step every example that still has acquirable bits
    contributes its candidate additions with costs
    ``C(s) - min_s' C(s')``; a ranker is fitted and every example advances
    by the ranker's choice.  Training stops once every example is full.
    """
    if not data:
        raise ValueError("train_anytime needs at least one example")
    featurizer = featurizer or default_featurizer(data)
    evals = [ModifiedLoss(x, y, p, params, sched) for x, y, p in zip(data, golds, predictors)]
    num_tiers = evals[0].num_tiers
    part_feats = [featurizer.part_features(x) for x in data]
    states = [f.zero() for f in evals]
    trajectories = [[s] for s in states]
    coefs, stds = [], []
    live_counts = []
    t = 0
    while True:
        live = [i for i, s in enumerate(states) if acquirable_actions(s)]
        if not live:
            break
        t += 1
        live_counts.append(len(live))
        rows, groups, deltas, cands = [], [], [], []
        for g, i in enumerate(live):
            actions = acquirable_actions(states[i])
            succ = [states[i].with_bit(k, c) for k, c in actions]
            costs = np.array([evals[i](s) for s in succ])
            # W(s) = max C - C(s); the hinge uses W(s*) - W(s) = C(s) - min C
            if use_weights:
                d = costs - costs.min()
            else:
                d = np.ones(len(costs))
                d[int(np.argmin(costs))] = 0.0
            rows.append(action_features(part_feats[i], states[i], actions))
            groups.append(np.full(len(actions), g))
            deltas.append(d)
            cands.append(succ)
        X = np.vstack(rows)
        grp = np.concatenate(groups)
        delta = np.concatenate(deltas)
        std = Standardizer.fit(X)
        Z = std(X)
        gmax_total = sum(float(d.max()) for d in deltas)
        r = 1e-3 * gmax_total if reg is None else reg
        coef = cost_sensitive_ranker(Z, grp, delta, r, epochs)
        coefs.append(coef)
        stds.append(std)
        scores = Z @ coef
        choice = _group_argmax(scores, grp, len(live))
        offsets = np.concatenate([[0], np.cumsum([len(c) for c in cands])])
        for g, i in enumerate(live):
            states[i] = cands[g][int(choice[g] - offsets[g])]
            trajectories[i].append(states[i])
    if log_out is not None:
        log_out.steps = t
        log_out.trajectories = trajectories
        log_out.live_per_step = live_counts
    return AnytimePolicy(coefs, stds, featurizer, num_tiers)


# ---------------------------------------------------------------------------
# Out-of-fold predictors


@dataclass
class OOFPredictions:
    folds: np.ndarray
    predictors: list
    train_indices: list[np.ndarray]

    def predictor_for(self, i: int):
        return self.predictors[int(self.folds[i])]

    def assigned(self) -> list:
        return [self.predictor_for(i) for i in range(len(self.folds))]


def fold_assignment(n: int, n_folds: int, seed: int = 0) -> np.ndarray:
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    folds[perm] = np.arange(n) % n_folds
    return folds


def build_oof_predictions(data: Sequence, n_folds: int, train_fn: Callable[[list], object],
                          seed: int = 0) -> OOFPredictions:
    """Train one predictor per fold on the remaining folds."""
    if n_folds < 2:
        raise ValueError(f"n_folds must be >= 2, got {n_folds}")
    if len(data) < n_folds:
        raise ValueError(f"need at least {n_folds} examples for {n_folds} folds, got {len(data)}")
    folds = fold_assignment(len(data), n_folds, seed)
    predictors, train_idx = [], []
    for f in range(n_folds):
        idx = np.flatnonzero(folds != f)
        train_idx.append(idx)
        predictors.append(train_fn([data[i] for i in idx]))
    return OOFPredictions(folds, predictors, train_idx)


# ---------------------------------------------------------------------------
# Baselines


def uniform_policy(state: AcquisitionState, rng: np.random.Generator) -> AcquisitionState:
    """Add one acquirable bit chosen uniformly at random."""
    actions = acquirable_actions(state)
    if not actions:
        raise ValueError("uniform policy applied to a fully acquired state")
    k, c = actions[int(rng.integers(len(actions)))]
    return state.with_bit(k, c)


def uniform_fraction(state: AcquisitionState, fraction: float,
                     rng: np.random.Generator) -> AcquisitionState:
    """Apply :func:`uniform_policy` until ``round(fraction * acquirable)`` bits are added."""
    n = round(fraction * len(acquirable_actions(state)))
    for _ in range(n):
        state = uniform_policy(state, rng)
    return state


@dataclass(frozen=True)
class MyopicDecision:
    state: AcquisitionState
    cheap_prediction: tuple
    confidence: float

    @property
    def acquired(self) -> bool:
        return self.state.count() > 0


def myopic_policy(x, predictor, sched: CostSchedule, threshold: float) -> MyopicDecision:
    """Acquire everything iff length-normalized confidence under cheap features < threshold.

    The confidence comes from an inference pass under the zero state; the
    caller charges that pass in addition to the final one.
    """
    n = predictor.num_parts(x)
    zero = AcquisitionState.zeros(predictor.num_tiers, n)
    pred, conf = predictor.confidence(x, zero)
    acquire = conf < threshold or threshold == np.inf
    state = full_acquisition(predictor.num_tiers, n) if acquire else zero
    return MyopicDecision(state, pred, conf)
