"""Style lexicons via the log-odds ratio with an informative Dirichlet prior.

For each word w with counts y_w^i, y_w^j in the two style corpora (totals
n^i, n^j) and a background prior alpha_w (total alpha_0):

    delta_w = log[(y_w^i + a_w) / (n^i + a_0 - (y_w^i + a_w))]
            - log[(y_w^j + a_w) / (n^j + a_0 - (y_w^j + a_w))]

Positive delta marks words overrepresented in style i, negative in style j.
The background defaults to the union of both corpora and alpha_w is floored
at 1 so words absent from the background still score. Ranking uses raw delta;
no variance normalisation is applied.

Lexicon file format (JSONL): {"word": str, "delta": float, "side": "s1"|"s2"}
sorted by |delta| descending.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NumericalDomainError",
    "CountTable",
    "LogOddsConfig",
    "StyleLexicon",
    "log_odds_delta",
    "build_style_lexicon",
    "extract_lexicon",
    "indicator_features",
    "indicator_matrix",
]


class NumericalDomainError(ArithmeticError):
    """A log-odds term left the domain of the logarithm."""


@dataclass(frozen=True)
class CountTable:
    """Word counts for one corpus; the total is always the sum of counts."""

    counts: dict[str, int]

    def __post_init__(self):
        for w, c in self.counts.items():
            if c < 0:
                raise ValueError(f"negative count for word {w!r}")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def get(self, word: str) -> int:
        return self.counts.get(word, 0)

    @classmethod
    def from_sentences(cls, sentences) -> "CountTable":
        c = Counter()
        for s in sentences:
            c.update(s)
        return cls(dict(c))

    @classmethod
    def union(cls, *tables: "CountTable") -> "CountTable":
        c = Counter()
        for t in tables:
            c.update(t.counts)
        return cls(dict(c))


@dataclass(frozen=True)
class LogOddsConfig:
    """Background count table supplying the prior: alpha_w = max(count_w, 1),
    alpha_0 = background total."""

    background: CountTable


def log_odds_delta(counts_i: CountTable, counts_j: CountTable, config: LogOddsConfig) -> dict[str, float]:
    """Score every word of either corpus; antisymmetric under swapping i and j.

    Raises NumericalDomainError naming the word if a denominator
    n + alpha_0 - (y + alpha_w) is not strictly positive.
    """
    bg = config.background
    a0 = float(bg.total)
    ni = float(counts_i.total)
    nj = float(counts_j.total)
    words = set(counts_i.counts) | set(counts_j.counts)

    def term(y: float, n: float, aw: float, word: str) -> float:
        num = y + aw
        den = n + a0 - num
        if den <= 0.0:
            raise NumericalDomainError(f"degenerate denominator for word {word!r}: {den}")
        return math.log(num / den)

    deltas = {}
    for w in sorted(words):
        aw = max(float(bg.get(w)), 1.0)
        deltas[w] = term(float(counts_i.get(w)), ni, aw, w) - term(float(counts_j.get(w)), nj, aw, w)
    return deltas


@dataclass(frozen=True)
class StyleLexicon:
    """Ranked style-marked word lists: l1 leans style i (delta > 0), l2 style j."""

    l1: tuple[str, ...]
    l2: tuple[str, ...]
    deltas: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.l1) & set(self.l2):
            raise ValueError("L1 and L2 must be disjoint")

    @property
    def l1_set(self) -> frozenset:
        return frozenset(self.l1)

    @property
    def l2_set(self) -> frozenset:
        return frozenset(self.l2)

    def save_jsonl(self, path) -> None:
        rows = [(w, self.deltas.get(w, 0.0), "s1") for w in self.l1]
        rows += [(w, self.deltas.get(w, 0.0), "s2") for w in self.l2]
        rows.sort(key=lambda r: (-abs(r[1]), r[0]))
        with open(path, "w", encoding="utf-8") as fh:
            for w, d, side in rows:
                fh.write(json.dumps({"word": w, "delta": d, "side": side}) + "\n")

    @classmethod
    def load_jsonl(cls, path) -> "StyleLexicon":
        l1, l2, deltas = [], [], {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    w, d, side = obj["word"], float(obj["delta"]), obj["side"]
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad lexicon record: {exc}") from exc
                if side == "s1":
                    l1.append(w)
                elif side == "s2":
                    l2.append(w)
                else:
                    raise ValueError(f"{path}:{lineno}: unknown side {side!r}")
                deltas[w] = d
        # restore rank order within each side
        l1.sort(key=lambda w: (-deltas[w], w))
        l2.sort(key=lambda w: (deltas[w], w))
        return cls(tuple(l1), tuple(l2), deltas)


def build_style_lexicon(deltas: dict[str, float], k: int) -> StyleLexicon:
    """Top-k and bottom-k words by delta with lexicographic tie-breaking.

    Zero-delta words are excluded whenever the nonzero words alone can fill
    both lists; L2 is always drawn from words not already taken by L1, so the
    lists are disjoint for any input.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if len(deltas) < 2 * k:
        raise ValueError(f"need at least {2 * k} scored words, got {len(deltas)}")
    nonzero = {w: d for w, d in deltas.items() if d != 0.0}
    pool = nonzero if len(nonzero) >= 2 * k else deltas
    l1 = sorted(pool, key=lambda w: (-pool[w], w))[:k]
    rest = {w: d for w, d in pool.items() if w not in set(l1)}
    l2 = sorted(rest, key=lambda w: (rest[w], w))[:k]
    return StyleLexicon(tuple(l1), tuple(l2), dict(deltas))


def extract_lexicon(corpus_i_sentences, corpus_j_sentences, k: int) -> StyleLexicon:
    """End-to-end extraction with the union-background prior."""
    ci = CountTable.from_sentences(corpus_i_sentences)
    cj = CountTable.from_sentences(corpus_j_sentences)
    config = LogOddsConfig(background=CountTable.union(ci, cj))
    return build_style_lexicon(log_odds_delta(ci, cj, config), k)


def indicator_features(token: str, lexicon: StyleLexicon) -> np.ndarray:
    """Two binary style indicators: (token in L1, token in L2)."""
    return np.array([float(token in lexicon.l1_set), float(token in lexicon.l2_set)])


def indicator_matrix(tokens, lexicon: StyleLexicon) -> np.ndarray:
    """Stacked indicators, one row per token.

    For a soft token p over a vocabulary, p @ indicator_matrix(vocab_tokens)
    is the expected indicator pair; at a one-hot p it reproduces the hard row.
    """
    out = np.zeros((len(tokens), 2))
    for idx, t in enumerate(tokens):
        if t in lexicon.l1_set:
            out[idx, 0] = 1.0
        if t in lexicon.l2_set:
            out[idx, 1] = 1.0
    return out
