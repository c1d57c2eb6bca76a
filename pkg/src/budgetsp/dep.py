"""First-order graph-based dependency parser with tiered edge templates.

Tier 0 (POS templates) only looks at part-of-speech tags; tier 1 (Full)
adds word forms and in-between POS patterns.  Every edge leaving head word
``i`` is scored with the templates licensed by word ``i``'s acquisition
state; the artificial root row always uses tier 0.  ``gate_on="dependent"``
keys the gating on the dependent word instead (off by default).

Template inventory (``dir`` is L/R, ``dist`` is bucketed 1,2,3,4,5-9,10+;
``p``/``w`` are POS/form, ``h``/``d`` head/dependent, ``-1``/``+1``
neighbours)::

  tier 0: hp | dp | hp,dp | hp,dp,dir,dist | hp,hp+1,dp | hp,dp-1,dp
          | hp-1,hp,dp | hp,dp,dp+1 | hp,hp+1,dp-1,dp | hp-1,hp,dp,dp+1
          | hp-1,hp,dp-1,dp | hp,hp+1,dp,dp+1 (each also with dir,dist)
  tier 1: hw | dw | hw,hp | dw,dp | hw,dw | hw,dp | hp,dw | hw,hp,dw,dp
          | hw,hp,dp | hp,dw,dp | hw,dw,dp | hw,hp,dw | hp,bp,dp for
          every word between head and dependent (all also with dir,dist)
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import serialize
from .chain import StateSampler, bernoulli_states
from .core import AcquisitionState, DimensionError, Label, is_tree

ROOT = "<root>"
BOS = "<s>"
EOS = "</s>"
HASH_BITS = 18
NUM_TIERS = 2


@dataclass(eq=False)
class Sentence:
    forms: tuple[str, ...]
    tags: tuple[str, ...]
    gold: Label
    uid: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.forms = tuple(self.forms)
        self.tags = tuple(self.tags)
        self.gold = tuple(int(h) for h in self.gold)
        if not (len(self.forms) == len(self.tags) == len(self.gold)):
            raise DimensionError("forms, tags and heads must have equal length")
        if not self.forms:
            raise DimensionError("empty sentence")
        if not is_tree(self.gold):
            raise ValueError(f"gold heads {self.gold} do not form a tree rooted at 0")

    def __len__(self) -> int:
        return len(self.forms)


def _dist_bucket(d: int) -> str:
    if d <= 4:
        return str(d)
    return "5-9" if d < 10 else "10+"


def _pos(sent: Sentence, i: int) -> str:
    if i == 0:
        return ROOT
    if i < 0:
        return BOS
    if i > len(sent):
        return EOS
    return sent.tags[i - 1]


def _form(sent: Sentence, i: int) -> str:
    return ROOT if i == 0 else sent.forms[i - 1].lower()


def _tier0_templates(sent: Sentence, h: int, d: int) -> list[str]:
    hp, dp = _pos(sent, h), _pos(sent, d)
    hp_l, hp_r = _pos(sent, h - 1) if h > 0 else BOS, _pos(sent, h + 1) if h > 0 else _pos(sent, 1)
    dp_l, dp_r = _pos(sent, d - 1), _pos(sent, d + 1)
    base = [
        f"hp={hp}", f"dp={dp}", f"hp,dp={hp},{dp}",
        f"hp,hp+1,dp={hp},{hp_r},{dp}", f"hp,dp-1,dp={hp},{dp_l},{dp}",
        f"hp-1,hp,dp={hp_l},{hp},{dp}", f"hp,dp,dp+1={hp},{dp},{dp_r}",
        f"hp,hp+1,dp-1,dp={hp},{hp_r},{dp_l},{dp}", f"hp-1,hp,dp,dp+1={hp_l},{hp},{dp},{dp_r}",
        f"hp-1,hp,dp-1,dp={hp_l},{hp},{dp_l},{dp}", f"hp,hp+1,dp,dp+1={hp},{hp_r},{dp},{dp_r}",
    ]
    return base


def _tier1_templates(sent: Sentence, h: int, d: int) -> list[str]:
    hp, dp = _pos(sent, h), _pos(sent, d)
    hw, dw = _form(sent, h), _form(sent, d)
    out = [
        f"hw={hw}", f"dw={dw}", f"hw,hp={hw},{hp}", f"dw,dp={dw},{dp}", f"hw,dw={hw},{dw}",
        f"hw,dp={hw},{dp}", f"hp,dw={hp},{dw}", f"hw,hp,dw,dp={hw},{hp},{dw},{dp}",
        f"hw,hp,dp={hw},{hp},{dp}", f"hp,dw,dp={hp},{dw},{dp}", f"hw,dw,dp={hw},{dw},{dp}",
        f"hw,hp,dw={hw},{hp},{dw}",
    ]
    lo, hi = min(h, d), max(h, d)
    for b in range(lo + 1, hi):
        out.append(f"hp,bp,dp={hp},{_pos(sent, b)},{dp}")
    return out


def _with_direction(templates: list[str], h: int, d: int) -> list[str]:
    tag = f"|{'R' if d > h else 'L'},{_dist_bucket(abs(d - h))}"
    return templates + [t + tag for t in templates]


def edge_features(sent: Sentence, head: int, dep: int, tier: int) -> frozenset[tuple[int, str]]:
    """Template firings for edge ``head -> dep`` under the cumulative-tier rule.

    Each firing is ``(tier_of_template, template_string)``.
    """
    n = len(sent)
    if not (0 <= head <= n and 1 <= dep <= n) or head == dep:
        raise IndexError(f"invalid edge {head}->{dep} for sentence of length {n}")
    if not 0 <= tier < NUM_TIERS:
        raise IndexError(f"tier {tier} out of range")
    out = {(0, t) for t in _with_direction(_tier0_templates(sent, head, dep), head, dep)}
    if tier >= 1:
        out |= {(1, t) for t in _with_direction(_tier1_templates(sent, head, dep), head, dep)}
    return frozenset(out)


def _hash(s: str, bits: int) -> int:
    return zlib.crc32(s.encode("utf-8")) & ((1 << bits) - 1)


def sentence_index(sent: Sentence, bits: int = HASH_BITS) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per tier: (flat edge ids, hashed feature ids) for every candidate edge.

    Only the templates *new* at each tier are listed, so tier ``k`` scores
    are the sum of blocks ``0..k``.  Cached on the sentence.
    """
    key = ("index", bits)
    if key in sent._cache:
        return sent._cache[key]
    n = len(sent)
    size = n + 1
    per_tier: list[tuple[list[int], list[int]]] = [([], []) for _ in range(NUM_TIERS)]
    makers = (_tier0_templates, _tier1_templates)
    for h in range(size):
        for d in range(1, size):
            if h == d:
                continue
            eid = h * size + d
            for k, make in enumerate(makers):
                tpl = _with_direction(make(sent, h, d), h, d)
                edges, feats = per_tier[k]
                edges.extend([eid] * len(tpl))
                feats.extend(_hash(t, bits) for t in tpl)
    out = [(np.asarray(e, dtype=np.int64), np.asarray(f, dtype=np.int64)) for e, f in per_tier]
    sent._cache[key] = out
    return out


def edge_gating(state: AcquisitionState) -> np.ndarray:
    """Tier per graph node: root 0, word ``i`` its effective tier."""
    return np.concatenate([[0], state.effective_tiers()])


GATE_ON = ("head", "dependent")


def _edge_tiers(gating: np.ndarray, edges: np.ndarray, size: int, gate_on: str) -> np.ndarray:
    """Tier licensing each flat edge id ``h * size + d``."""
    return gating[edges // size] if gate_on == "head" else gating[edges % size]


@dataclass
class DepModel:
    weights: list[np.ndarray]
    hash_bits: int = HASH_BITS
    # "head": edge (i, j) uses word i's tiers; "dependent" keys on word j instead
    gate_on: str = "head"

    num_tiers = NUM_TIERS
    cumulative_tiers = True

    def __post_init__(self):
        if self.gate_on not in GATE_ON:
            raise ValueError(f"gate_on must be one of {GATE_ON}, got {self.gate_on!r}")

    @classmethod
    def zeros(cls, hash_bits: int = HASH_BITS, gate_on: str = "head") -> "DepModel":
        return cls([np.zeros(1 << hash_bits) for _ in range(NUM_TIERS)], hash_bits, gate_on)

    def num_parts(self, sent: Sentence) -> int:
        return len(sent)

    def tier_blocks(self, sent: Sentence) -> list[np.ndarray]:
        """Per-tier score contributions as (n+1)x(n+1) matrices."""
        size = len(sent) + 1
        out = []
        for w, (edges, feats) in zip(self.weights, sentence_index(sent, self.hash_bits)):
            out.append(np.bincount(edges, weights=w[feats], minlength=size * size).reshape(size, size))
        return out

    def combine(self, blocks: list[np.ndarray], gating: np.ndarray) -> np.ndarray:
        m = blocks[0].copy()
        for k in range(1, len(blocks)):
            on = gating >= k
            m += (on[:, None] if self.gate_on == "head" else on[None, :]) * blocks[k]
        np.fill_diagonal(m, -np.inf)
        m[:, 0] = -np.inf
        return m

    def _check_state(self, sent: Sentence, state: AcquisitionState) -> None:
        if state.shape != (NUM_TIERS, len(sent)):
            raise DimensionError(f"state shape {state.shape} != ({NUM_TIERS}, {len(sent)})")

    def score_matrix(self, sent: Sentence, state: AcquisitionState) -> np.ndarray:
        self._check_state(sent, state)
        return self.combine(self.tier_blocks(sent), edge_gating(state))

    def predict(self, sent: Sentence, state: AcquisitionState) -> Label:
        return cle_mst(self.score_matrix(sent, state))

    def decoder(self, sent: Sentence) -> Callable[[AcquisitionState], Label]:
        blocks = self.tier_blocks(sent)
        memo: dict[bytes, Label] = {}

        def decode(state: AcquisitionState) -> Label:
            self._check_state(sent, state)
            gating = edge_gating(state)
            key = gating.tobytes()
            if key not in memo:
                memo[key] = cle_mst(self.combine(blocks, gating))
            return memo[key]

        return decode

    def confidence(self, sent: Sentence, state: AcquisitionState) -> tuple[Label, float]:
        """Prediction and the mean per-word margin of the chosen head over the runner-up."""
        m = self.score_matrix(sent, state)
        heads = cle_mst(m)
        margins = []
        for j, h in enumerate(heads, start=1):
            col = m[:, j].copy()
            best = col[h]
            col[h] = -np.inf
            rival = col.max()
            margins.append(best - rival if np.isfinite(rival) else math.inf)
        return heads, float(np.mean(margins))

    def save(self, path) -> None:
        serialize.save(path, "dep-model", {"hash_bits": self.hash_bits, "gate_on": self.gate_on},
                       {f"w_{k}": w for k, w in enumerate(self.weights)})

    @classmethod
    def load(cls, path) -> "DepModel":
        kind, meta, arr = serialize.load(path)
        if kind != "dep-model":
            raise serialize.FormatError(f"expected a dependency model, found {kind!r}")
        return cls([arr[f"w_{k}"] for k in range(NUM_TIERS)], meta["hash_bits"],
                   meta.get("gate_on", "head"))


def edge_score_matrix(model: DepModel, sent: Sentence, state: AcquisitionState) -> np.ndarray:
    return model.score_matrix(sent, state)


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    """Return nodes of some cycle in the head map (index 0 is the root), else None."""
    n = len(heads)
    color = np.zeros(n, dtype=np.int8)
    for start in range(1, n):
        if color[start]:
            continue
        path = []
        node = start
        while node != 0 and color[node] == 0:
            color[node] = 1
            path.append(node)
            node = heads[node]
        if node != 0 and color[node] == 1:
            return path[path.index(node):]
        for p in path:
            color[p] = 2
    return None


def cle_mst(scores) -> Label:
    """Maximum-score arborescence rooted at node 0 (Chu-Liu/Edmonds).

    ``scores[h, d]`` is the score of edge ``h -> d``; entries of ``-inf`` are
    forbidden edges.  Greedy head choices break ties toward smaller heads.
    Returns heads for nodes ``1..n``.
    """
    m = np.asarray(scores, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("score matrix must be square")
    if m.shape[0] < 2:
        raise ValueError("need at least one word besides the root")
    m = m.copy()
    np.fill_diagonal(m, -np.inf)
    m[:, 0] = -np.inf
    heads = _cle(m)
    return tuple(int(h) for h in heads[1:])


def _cle(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    heads = np.argmax(m, axis=0)
    heads[0] = -1
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads
    in_cycle = np.zeros(n, dtype=bool)
    in_cycle[cycle] = True
    rest = [v for v in range(n) if not in_cycle[v]]
    c_node = len(rest)
    index = {v: i for i, v in enumerate(rest)}
    cycle_score = sum(m[heads[v], v] for v in cycle)
    sub = np.full((c_node + 1, c_node + 1), -np.inf)
    enter_from: dict[int, int] = {}
    leave_to: dict[int, int] = {}
    cyc = np.array(cycle)
    for u in rest:
        iu = index[u]
        for v in rest:
            if u != v:
                sub[iu, index[v]] = m[u, v]
        # best edge u -> cycle, scored relative to the broken cycle edge
        gains = m[u, cyc] - m[heads[cyc], cyc]
        j = int(np.argmax(gains))
        if np.isfinite(gains[j]):
            sub[iu, c_node] = cycle_score + gains[j]
            enter_from[iu] = int(cyc[j])
        # best edge cycle -> u
        outs = m[cyc, u]
        j = int(np.argmax(outs))
        if np.isfinite(outs[j]):
            sub[c_node, iu] = outs[j]
            leave_to[iu] = int(cyc[j])
    sub_heads = _cle(sub)
    result = heads.copy()
    for v in rest:
        if v == 0:
            continue
        h = sub_heads[index[v]]
        result[v] = leave_to[index[v]] if h == c_node else rest[h]
    entry = enter_from[int(sub_heads[c_node])]
    result[entry] = rest[int(sub_heads[c_node])]
    result[0] = -1
    return result


def enumerate_arborescences(n: int):
    """Yield every head assignment for nodes 1..n that forms a tree rooted at 0."""
    import itertools

    choices = [[h for h in range(n + 1) if h != d] for d in range(1, n + 1)]
    for heads in itertools.product(*choices):
        if is_tree(heads):
            yield heads


def tree_score(scores, heads: Sequence[int]) -> float:
    m = np.asarray(scores)
    return float(sum(m[h, d] for d, h in enumerate(heads, start=1)))


def uas(pred: Sequence[int], gold: Sequence[int]) -> float:
    return sum(1 for a, b in zip(pred, gold) if a == b) / len(gold)


def train_dep(data: Sequence[Sentence], epochs: int = 50, learning_rate: float = 0.1,
              state_sampler: StateSampler | None = None, seed: int = 0,
              hash_bits: int = HASH_BITS, gate_on: str = "head") -> DepModel:
    """Averaged perceptron; each visit samples an acquisition state for the sentence."""
    if not data:
        raise ValueError("train_dep needs at least one sentence")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    sampler = state_sampler or bernoulli_states(0.5)
    rng = np.random.default_rng(seed)
    model = DepModel.zeros(hash_bits, gate_on)
    # lazy averaging: acc_k holds sum_t t * delta_t so mean = ((N+1) w - acc) / N
    acc = [np.zeros_like(w) for w in model.weights]
    visits = 0
    order = np.arange(len(data))
    for _ in range(epochs):
        rng.shuffle(order)
        for i in order:
            sent = data[i]
            visits += 1
            state = sampler(rng, NUM_TIERS, len(sent))
            gating = edge_gating(state)
            pred = cle_mst(model.combine(model.tier_blocks(sent), gating))
            if pred != sent.gold:
                size = len(sent) + 1
                for sign, heads in ((learning_rate, sent.gold), (-learning_rate, pred)):
                    eids = {h * size + d for d, h in enumerate(heads, start=1)}
                    for k, (edges, feats) in enumerate(sentence_index(sent, hash_bits)):
                        mask = np.isin(edges, list(eids)) & (_edge_tiers(gating, edges, size, gate_on) >= k)
                        np.add.at(model.weights[k], feats[mask], sign)
                        np.add.at(acc[k], feats[mask], sign * visits)
    n = visits
    avg = [((n + 1) * w - a) / n for w, a in zip(model.weights, acc)]
    return DepModel(avg, hash_bits, gate_on)
