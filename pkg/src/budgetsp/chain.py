"""Linear-chain sequence labeler over tiered glyph features.

Tier 0 is the raw pixel vector (plus a bias entry), tier 1 is a HOG
descriptor.  Scores decompose into per-position unary terms and a
state-independent label transition matrix; decoding is Viterbi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import serialize
from .core import AcquisitionState, DimensionError, Label

StateSampler = Callable[[np.random.Generator, int, int], AcquisitionState]

HOG_CELL = 3
HOG_BINS = 9
HOG_EPS = 1e-6


def extract_pixels(glyph) -> np.ndarray:
    g = np.asarray(glyph, dtype=np.float64)
    return np.concatenate([g.ravel(), [1.0]])


def extract_hog(glyph, cell: int = HOG_CELL, bins: int = HOG_BINS) -> np.ndarray:
    """Unsigned-orientation gradient histograms on non-overlapping square cells.

    Gradients are central differences with edge replication.  Each pixel
    votes its gradient magnitude into one of ``bins`` equal bins over
    [0, pi).  Cells tile from the top-left corner; leftover rows/columns are
    dropped.  Every cell histogram is divided by ``||h||_2 + 1e-6``.
    """
    g = np.asarray(glyph, dtype=np.float64)
    h, w = g.shape
    if h < cell or w < cell:
        raise DimensionError(f"glyph {g.shape} smaller than cell size {cell}")
    p = np.pad(g, 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    idx = np.minimum((theta / (np.pi / bins)).astype(int), bins - 1)
    rows, cols = h // cell, w // cell
    out = np.zeros((rows, cols, bins))
    for r in range(rows):
        for c in range(cols):
            sl = (slice(r * cell, (r + 1) * cell), slice(c * cell, (c + 1) * cell))
            hist = np.bincount(idx[sl].ravel(), weights=mag[sl].ravel(), minlength=bins)
            out[r, c] = hist / (np.linalg.norm(hist) + HOG_EPS)
    return out.ravel()


def hog_dim(height: int, width: int, cell: int = HOG_CELL, bins: int = HOG_BINS) -> int:
    return (height // cell) * (width // cell) * bins


@dataclass(eq=False)
class GlyphSequence:
    """A word: a stack of binary glyphs and its letter ids.

    ``clean`` optionally supplies a separate source image for the HOG tier
    (synthetic corpora degrade only the pixel view).
    """

    glyphs: np.ndarray
    gold: Label
    clean: np.ndarray | None = None
    uid: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.glyphs = np.asarray(self.glyphs, dtype=np.uint8)
        if self.glyphs.ndim != 3 or len(self.glyphs) == 0:
            raise DimensionError("glyphs must be a non-empty (length, height, width) stack")
        self.gold = tuple(int(y) for y in self.gold)
        if len(self.gold) != len(self.glyphs):
            raise DimensionError("gold length must match glyph count")
        if self.clean is not None:
            self.clean = np.asarray(self.clean, dtype=np.uint8)
            if self.clean.shape != self.glyphs.shape:
                raise DimensionError("clean view must match glyph shape")

    def __len__(self) -> int:
        return len(self.glyphs)

    def tier_features(self, tier: int) -> np.ndarray:
        """Feature matrix (parts x dim) for one tier; computed once."""
        if tier not in self._cache:
            if tier == 0:
                feats = [extract_pixels(g) for g in self.glyphs]
            elif tier == 1:
                src = self.glyphs if self.clean is None else self.clean
                feats = [extract_hog(g) for g in src]
            else:
                raise DimensionError(f"no feature extractor for tier {tier}")
            self._cache[tier] = np.vstack(feats)
        return self._cache[tier]


def viterbi(unary, transitions) -> Label:
    """Best label sequence; ties go to the lowest label index."""
    u = np.asarray(unary, dtype=np.float64)
    t = np.asarray(transitions, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] == 0:
        raise DimensionError("viterbi needs a non-empty (length x labels) table")
    n, a = u.shape
    if t.shape != (a, a):
        raise DimensionError(f"transition matrix must be {a}x{a}, got {t.shape}")
    back = np.zeros((n, a), dtype=np.int64)
    delta = u[0].copy()
    for i in range(1, n):
        cand = delta[:, None] + t
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(a)] + u[i]
    y = [int(np.argmax(delta))]
    for i in range(n - 1, 0, -1):
        y.append(int(back[i, y[-1]]))
    return tuple(reversed(y))


def sequence_score(unary, transitions, labels: Sequence[int]) -> float:
    u = np.asarray(unary)
    s = float(sum(u[i, y] for i, y in enumerate(labels)))
    s += float(sum(transitions[a, b] for a, b in zip(labels, labels[1:])))
    return s


def max_marginals(unary, transitions) -> np.ndarray:
    """``m[i, y]`` = best score of any sequence with label ``y`` at position ``i``."""
    u = np.asarray(unary, dtype=np.float64)
    t = np.asarray(transitions, dtype=np.float64)
    n, a = u.shape
    fwd = np.zeros((n, a))
    bwd = np.zeros((n, a))
    fwd[0] = u[0]
    for i in range(1, n):
        fwd[i] = (fwd[i - 1][:, None] + t).max(axis=0) + u[i]
    for i in range(n - 2, -1, -1):
        bwd[i] = (t + (u[i + 1] + bwd[i + 1])[None, :]).max(axis=1)
    return fwd + bwd


def chain_margin(unary, transitions) -> float:
    """Score gap between the best and second-best label sequence."""
    m = max_marginals(unary, transitions)
    best = viterbi(unary, transitions)
    top = sequence_score(unary, transitions, best)
    if m.shape[1] < 2:
        return math.inf
    rival = m.copy()
    rival[np.arange(len(best)), best] = -np.inf
    return float(top - rival.max())


def bernoulli_states(p: float = 0.5) -> StateSampler:
    def sample(rng: np.random.Generator, num_tiers: int, num_parts: int) -> AcquisitionState:
        return AcquisitionState(rng.random((num_tiers, num_parts)) < p)
    return sample


@dataclass
class ChainModel:
    unary: list[np.ndarray]
    transitions: np.ndarray
    # predictions depend only on each part's highest acquired tier
    cumulative_tiers = True

    @property
    def num_tiers(self) -> int:
        return len(self.unary)

    @property
    def alphabet_size(self) -> int:
        return self.transitions.shape[0]

    @classmethod
    def zeros(cls, alphabet_size: int, dims: Sequence[int]) -> "ChainModel":
        return cls([np.zeros((alphabet_size, d)) for d in dims],
                   np.zeros((alphabet_size, alphabet_size)))

    def num_parts(self, x: GlyphSequence) -> int:
        return len(x)

    def tier_responses(self, x: GlyphSequence) -> list[np.ndarray]:
        """Per-tier unary contributions, each (parts x labels)."""
        out = []
        for k, w in enumerate(self.unary):
            f = x.tier_features(k)
            if f.shape[1] != w.shape[1]:
                raise DimensionError(f"tier {k}: feature dim {f.shape[1]} != weight dim {w.shape[1]}")
            out.append(f @ w.T)
        return out

    def unary_under(self, responses: list[np.ndarray], tiers: np.ndarray) -> np.ndarray:
        table = responses[0].copy()
        for k in range(1, len(responses)):
            table += (tiers >= k)[:, None] * responses[k]
        return table

    def _check_state(self, x: GlyphSequence, state: AcquisitionState) -> None:
        if state.shape != (self.num_tiers, len(x)):
            raise DimensionError(
                f"state shape {state.shape} != ({self.num_tiers}, {len(x)})"
            )

    def scores(self, x: GlyphSequence, state: AcquisitionState) -> tuple[np.ndarray, np.ndarray]:
        self._check_state(x, state)
        return self.unary_under(self.tier_responses(x), state.effective_tiers()), self.transitions

    def predict(self, x: GlyphSequence, state: AcquisitionState) -> Label:
        return viterbi(*self.scores(x, state))

    def decoder(self, x: GlyphSequence) -> Callable[[AcquisitionState], Label]:
        """Memoized ``state -> prediction`` for one example; keyed by effective tiers."""
        responses = self.tier_responses(x)
        memo: dict[bytes, Label] = {}

        def decode(state: AcquisitionState) -> Label:
            self._check_state(x, state)
            tiers = state.effective_tiers()
            key = tiers.tobytes()
            if key not in memo:
                memo[key] = viterbi(self.unary_under(responses, tiers), self.transitions)
            return memo[key]

        return decode

    def confidence(self, x: GlyphSequence, state: AcquisitionState) -> tuple[Label, float]:
        """Prediction and its best-vs-second-best margin divided by length."""
        unary, trans = self.scores(x, state)
        return viterbi(unary, trans), chain_margin(unary, trans) / len(x)

    def save(self, path) -> None:
        arrays = {f"unary_{k}": w for k, w in enumerate(self.unary)}
        arrays["transitions"] = self.transitions
        serialize.save(path, "chain-model", {"num_tiers": self.num_tiers}, arrays)

    @classmethod
    def load(cls, path) -> "ChainModel":
        kind, meta, arr = serialize.load(path)
        if kind != "chain-model":
            raise serialize.FormatError(f"expected a chain model, found {kind!r}")
        return cls([arr[f"unary_{k}"] for k in range(meta["num_tiers"])], arr["transitions"])


def chain_scores(model: ChainModel, x: GlyphSequence, state: AcquisitionState):
    return model.scores(x, state)


class _Averager:
    """Running sum for the averaged perceptron over per-visit snapshots."""

    def __init__(self, arrays: list[np.ndarray]):
        self.acc = [np.zeros_like(a) for a in arrays]
        self.visits = 0

    def visit(self, arrays: list[np.ndarray]) -> None:
        self.visits += 1
        for a, w in zip(self.acc, arrays):
            a += w

    def mean(self) -> list[np.ndarray]:
        return [a / self.visits for a in self.acc]


def train_chain(data: Sequence[GlyphSequence], epochs: int = 50, learning_rate: float = 0.1,
                state_sampler: StateSampler | None = None, seed: int = 0,
                num_tiers: int = 2, alphabet_size: int | None = None) -> ChainModel:
    """Averaged structured perceptron with a random acquisition state per visit.

    The returned weights are the mean of the weights after every example
    visit, so each visit's prediction is trained against the features that
    its sampled state licenses.
    """
    if not data:
        raise ValueError("train_chain needs at least one sequence")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    sampler = state_sampler or bernoulli_states(0.5)
    rng = np.random.default_rng(seed)
    a = alphabet_size or 1 + max(max(x.gold) for x in data)
    dims = [data[0].tier_features(k).shape[1] for k in range(num_tiers)]
    model = ChainModel.zeros(a, dims)
    params = model.unary + [model.transitions]
    avg = _Averager(params)
    order = np.arange(len(data))
    for _ in range(epochs):
        rng.shuffle(order)
        for i in order:
            x = data[i]
            state = sampler(rng, num_tiers, len(x))
            tiers = state.effective_tiers()
            pred = model.predict(x, state)
            if pred != x.gold:
                _chain_update(model, x, tiers, x.gold, learning_rate)
                _chain_update(model, x, tiers, pred, -learning_rate)
            avg.visit(params)
    *unary, trans = avg.mean()
    return ChainModel(unary, trans)


def _chain_update(model: ChainModel, x: GlyphSequence, tiers: np.ndarray,
                  labels: Sequence[int], step: float) -> None:
    for k, w in enumerate(model.unary):
        f = x.tier_features(k)
        active = tiers >= k
        np.add.at(w, np.asarray(labels)[active], step * f[active])
    for p, q in zip(labels, labels[1:]):
        model.transitions[p, q] += step
