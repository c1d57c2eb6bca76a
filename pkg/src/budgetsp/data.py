"""Dataset readers/writers and synthetic corpus generators."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chain import GlyphSequence
from .core import is_tree
from .dep import Sentence

log = logging.getLogger(__name__)

GLYPH_SHAPE = (16, 8)
OCR_PIXELS = GLYPH_SHAPE[0] * GLYPH_SHAPE[1]
LETTERS = "abcdefghijklmnopqrstuvwxyz"


class DataError(ValueError):
    """Malformed input file; the message names the offending line."""


# ---------------------------------------------------------------------------
# OCR letter file: id, letter, next_id, word_id, position, fold, p_0 .. p_127


def load_ocr(path, limit_words: int | None = None) -> list[GlyphSequence]:
    """Read the tab-separated handwritten-letters file and reassemble words.

    Words are ordered by first appearance of their word id; letters within a
    word by their position column.
    """
    words: dict[int, list[tuple[int, int, np.ndarray]]] = defaultdict(list)
    order: list[int] = []
    folds: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.rstrip("\t").split("\t")
            if len(cols) != 6 + OCR_PIXELS:
                raise DataError(
                    f"{path}:{lineno}: expected {OCR_PIXELS} pixel columns, got {len(cols) - 6}"
                )
            try:
                letter = cols[1].strip()
                word_id, pos, fold = int(cols[3]), int(cols[4]), int(cols[5])
                pixels = np.array([int(v) for v in cols[6:]], dtype=np.uint8)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if len(letter) != 1 or letter not in LETTERS:
                raise DataError(f"{path}:{lineno}: bad letter {letter!r}")
            if np.any(pixels > 1):
                raise DataError(f"{path}:{lineno}: pixels must be binary")
            if word_id not in words:
                order.append(word_id)
                folds[word_id] = fold
            words[word_id].append((pos, LETTERS.index(letter), pixels.reshape(GLYPH_SHAPE)))
    out = []
    for wid in order[:limit_words] if limit_words else order:
        letters = sorted(words[wid], key=lambda t: t[0])
        out.append(GlyphSequence(np.stack([g for _, _, g in letters]),
                                 tuple(y for _, y, _ in letters), uid=f"w{wid}"))
    return out


def write_ocr(path, data: Sequence[GlyphSequence]) -> None:
    """Write sequences in the letter-file format (fold column 0, positions 1-based)."""
    lid = 1
    with open(path, "w", encoding="utf-8") as fh:
        for w, x in enumerate(data, start=1):
            wid = int(x.uid[1:]) if x.uid.startswith("w") and x.uid[1:].isdigit() else w
            for pos, (g, y) in enumerate(zip(x.glyphs, x.gold), start=1):
                nxt = lid + 1 if pos < len(x) else -1
                cols = [str(lid), LETTERS[y], str(nxt), str(wid), str(pos), "0"]
                cols += [str(int(v)) for v in g.ravel()]
                fh.write("\t".join(cols) + "\n")
                lid += 1


# ---------------------------------------------------------------------------
# CoNLL-U


@dataclass
class Rejection:
    sentence_index: int
    line: int
    reason: str


def load_conllu_report(path) -> tuple[list[Sentence], list[Rejection]]:
    """Parse CoNLL-U, skipping multiword ranges and empty nodes.

    Sentences whose heads do not form a tree rooted at 0 are rejected and
    reported, not raised.
    """
    sents: list[Sentence] = []
    rejected: list[Rejection] = []
    rows: list[tuple[str, str, int]] = []
    start_line = 1
    problem: str | None = None
    idx = 0

    def flush(lineno: int):
        nonlocal rows, problem, idx
        if rows or problem:
            heads = tuple(h for _, _, h in rows)
            if problem is None and not is_tree(heads):
                problem = f"heads {heads} do not form a tree rooted at 0"
            if problem:
                rejected.append(Rejection(idx, start_line, problem))
                log.warning("%s:%d: rejected sentence %d: %s", path, start_line, idx, problem)
            else:
                sents.append(Sentence(tuple(f for f, _, _ in rows), tuple(t for _, t, _ in rows),
                                      heads, uid=f"s{idx}"))
            idx += 1
        rows, problem = [], None

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno)
                start_line = lineno + 1
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                problem = problem or f"line {lineno}: expected 10 columns, got {len(cols)}"
                continue
            tid = cols[0]
            if "-" in tid or "." in tid:
                continue
            try:
                if int(tid) != len(rows) + 1:
                    problem = problem or f"line {lineno}: token id {tid} out of sequence"
                rows.append((cols[1], cols[3], int(cols[6])))
            except ValueError:
                problem = problem or f"line {lineno}: non-integer id or head"
    flush(-1)
    return sents, rejected


def load_conllu(path) -> list[Sentence]:
    return load_conllu_report(path)[0]


def write_conllu(path, data: Sequence[Sentence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in data:
            fh.write(f"# sent_id = {s.uid}\n")
            for i, (f, t, h) in enumerate(zip(s.forms, s.tags, s.gold), start=1):
                fh.write("\t".join([str(i), f, "_", t, "_", "_", str(h), "dep", "_", "_"]) + "\n")
            fh.write("\n")


# ---------------------------------------------------------------------------
# Synthetic corpora


def _prototypes(rng: np.random.Generator, alphabet: int, density: float) -> np.ndarray:
    """Random binary glyphs made of a few thick strokes, one per label."""
    h, w = GLYPH_SHAPE
    protos = np.zeros((alphabet, h, w), dtype=np.uint8)
    for a in range(alphabet):
        g = np.zeros((h, w), dtype=np.uint8)
        while g.mean() < density:
            if rng.random() < 0.5:
                r = rng.integers(1, h - 2)
                c0, c1 = sorted(rng.integers(0, w, size=2))
                g[r:r + 2, c0:c1 + 1] = 1
            else:
                c = rng.integers(1, w - 2)
                r0, r1 = sorted(rng.integers(0, h, size=2))
                g[r0:r1 + 1, c:c + 2] = 1
        protos[a] = g
    return protos


def _transition_matrix(rng: np.random.Generator, alphabet: int) -> np.ndarray:
    """Peaked Markov transitions so that label context carries information."""
    logits = rng.normal(scale=2.0, size=(alphabet, alphabet))
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def gen_synthetic_chain(n: int, len_range: tuple[int, int] = (4, 10), noise: float = 0.7,
                        seed: int = 0, hard_fraction: float = 0.3, alphabet_size: int = 10,
                        jitter: float = 0.03) -> list[GlyphSequence]:
    """Words over prototype glyphs with a degraded pixel view on "hard" positions.

    Every glyph is its label's prototype with a ``jitter`` fraction of pixels
    flipped.  A ``hard_fraction`` of positions additionally has each pixel of
    the pixel view flipped with probability ``noise / 2``; the HOG tier reads
    the undegraded glyph, so it resolves those positions.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    protos = _prototypes(rng, alphabet_size, 0.3)
    trans = _transition_matrix(rng, alphabet_size)
    lo, hi = len_range
    out = []
    for i in range(n):
        length = int(rng.integers(lo, hi + 1))
        ys = [int(rng.integers(alphabet_size))]
        for _ in range(length - 1):
            ys.append(int(rng.choice(alphabet_size, p=trans[ys[-1]])))
        clean = protos[ys] ^ (rng.random((length, *GLYPH_SHAPE)) < jitter)
        hard = rng.random(length) < hard_fraction
        flips = (rng.random((length, *GLYPH_SHAPE)) < noise / 2) & hard[:, None, None]
        out.append(GlyphSequence(clean ^ flips, tuple(ys), clean=clean, uid=f"syn{i}"))
    return out


# A toy English-like grammar.  Prepositions attach to the verb or to the
# closest preceding noun depending on the preposition *and* the noun's word
# form, so POS tags alone leave those attachments ambiguous.
_LEX = {
    "DET": ["the", "a", "this", "every", "some"],
    "ADJ": ["big", "old", "red", "quiet", "new", "small", "green", "happy"],
    "NOUN_N": ["picture", "top", "side", "friend", "cup", "member", "edge", "copy", "part"],
    "NOUN_V": ["dog", "man", "telescope", "park", "house", "river", "car", "girl", "tree"],
    "VERB": ["saw", "took", "found", "liked", "moved", "kept", "watched", "built"],
    "ADP": ["with", "in", "of", "near", "on", "from"],
    "ADV": ["quickly", "today", "again", "slowly", "there"],
}
_NOUN_ATTACH_PREP = {"of", "from"}


def _np(rng, words: list, tags: list, heads: list, max_adj: int) -> int:
    """Append a noun phrase; returns the 1-based index of its head noun."""
    start = len(words)
    words.append(rng.choice(_LEX["DET"]))
    tags.append("DET")
    for _ in range(int(rng.integers(0, max_adj + 1))):
        words.append(rng.choice(_LEX["ADJ"]))
        tags.append("ADJ")
    noun_class = "NOUN_N" if rng.random() < 0.5 else "NOUN_V"
    words.append(rng.choice(_LEX[noun_class]))
    tags.append("NOUN")
    noun = len(words)
    heads.extend([noun] * (noun - 1 - start))
    heads.append(-1)
    return noun


def gen_synthetic_treebank(n: int, seed: int = 0, max_pps: int = 3, max_adj: int = 2
                           ) -> list[Sentence]:
    """Sentences ``NP VERB NP (ADP NP)* [ADV]`` with lexically decided PP attachment.

    A prepositional phrase attaches to the preceding noun when the
    preposition is "of"/"from" or the noun belongs to the noun-attaching
    class, and to the verb otherwise.
    """
    rng = np.random.default_rng(seed)
    nouns_n = set(_LEX["NOUN_N"])
    out = []
    for i in range(n):
        words: list[str] = []
        tags: list[str] = []
        heads: list[int] = []
        subj = _np(rng, words, tags, heads, max_adj)
        words.append(rng.choice(_LEX["VERB"]))
        tags.append("VERB")
        heads.append(0)
        verb = len(words)
        heads[subj - 1] = verb
        obj = _np(rng, words, tags, heads, max_adj)
        heads[obj - 1] = verb
        last_noun = obj
        for _ in range(int(rng.integers(0, max_pps + 1))):
            prep = rng.choice(_LEX["ADP"])
            words.append(prep)
            tags.append("ADP")
            p_idx = len(words)
            noun_attach = prep in _NOUN_ATTACH_PREP or words[last_noun - 1] in nouns_n
            heads.append(last_noun if noun_attach else verb)
            pobj = _np(rng, words, tags, heads, max_adj)
            heads[pobj - 1] = p_idx
            last_noun = pobj
        if rng.random() < 0.4:
            words.append(rng.choice(_LEX["ADV"]))
            tags.append("ADV")
            heads.append(verb)
        out.append(Sentence(tuple(words), tuple(tags), tuple(heads), uid=f"t{i}"))
    return out


def train_test_split(data: Sequence, test_fraction: float = 0.1, seed: int = 0
                     ) -> tuple[list, list]:
    perm = np.random.default_rng(seed).permutation(len(data))
    n_test = max(1, int(round(test_fraction * len(data))))
    test_idx = set(perm[:n_test].tolist())
    train = [x for i, x in enumerate(data) if i not in test_idx]
    test = [x for i, x in enumerate(data) if i in test_idx]
    return train, test
