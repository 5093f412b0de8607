"""Corpus handling: tokenisation, vocabularies, splits, synthetic data.

Two corpus kinds flow through the pipeline. A ``ParallelCorpus`` holds
(source, pivot) sentence pairs for translation training. A ``StyledCorpus``
holds sentences labelled with one of two styles; ``make_splits`` carves it
into the four disjoint working sets (classifier training, generator training,
dev, test) with per-style proportions preserved.

The synthetic task generator builds a pivot "language" by applying a
per-token bijection and reversing word order, which forces the translation
models to learn genuine attention alignments, and builds styled corpora from
a shared pool of content templates with style-marker tokens inserted, so
style is carried by a known, disjoint token set.

File formats (UTF-8 JSONL, one object per line):

- styled corpus:   {"text": "...", "style": "..."}
- parallel corpus: {"src": "...", "tgt": "..."}
"""

from __future__ import annotations

import json
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MAX_LEN",
    "PAD_ID",
    "BOS_ID",
    "EOS_ID",
    "UNK_ID",
    "PAD_TOKEN",
    "BOS_TOKEN",
    "EOS_TOKEN",
    "UNK_TOKEN",
    "tokenize",
    "Vocabulary",
    "StyledCorpus",
    "ParallelCorpus",
    "SplitSpec",
    "Splits",
    "make_splits",
    "SyntheticSpec",
    "gen_synthetic",
    "make_pivot_mapping",
    "pivot_transform",
    "style_of_markers",
]

MAX_LEN = 50  # sentences longer than this are truncated at ingestion

PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN = "<pad>", "<bos>", "<eos>", "<unk>"
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
_RESERVED = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)

_PUNCT = set(string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split punctuation into single-char tokens."""
    out = []
    word = []
    for ch in text.lower():
        if ch.isspace():
            if word:
                out.append("".join(word))
                word = []
        elif ch in _PUNCT:
            if word:
                out.append("".join(word))
                word = []
            out.append(ch)
        else:
            word.append(ch)
    if word:
        out.append("".join(word))
    return out


class Vocabulary:
    """Token <-> id map with four reserved entries.

    Ids 0..3 are pad, begin, end, unknown. Content tokens are assigned by
    descending frequency with lexicographic tie-breaking; ``max_size`` counts
    the reserved entries, so at most ``max_size - 4`` content tokens survive.
    """

    def __init__(self, tokens: list[str]):
        if tuple(tokens[:4]) != _RESERVED:
            raise ValueError("vocabulary must start with the four reserved tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self._tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(self._tokens)}

    @classmethod
    def build(cls, sequences, max_size: int | None = None) -> "Vocabulary":
        if max_size is not None and max_size < len(_RESERVED):
            raise ValueError(f"max_size must be at least {len(_RESERVED)}")
        counts = Counter()
        for seq in sequences:
            counts.update(seq)
        for r in _RESERVED:
            counts.pop(r, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if max_size is not None:
            ranked = ranked[: max_size - len(_RESERVED)]
        return cls(list(_RESERVED) + [t for t, _ in ranked])

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens) -> list[int]:
        return [self._ids.get(t, UNK_ID) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self._tokens[int(i)] for i in ids]


def _truncate(tokens: list[str]) -> list[str]:
    return tokens[:MAX_LEN] if len(tokens) > MAX_LEN else tokens


@dataclass
class StyledCorpus:
    """Token sequences with a style label per sentence."""

    sentences: list[list[str]] = field(default_factory=list)
    styles: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.sentences) != len(self.styles):
            raise ValueError("sentence and style counts differ")

    def __len__(self) -> int:
        return len(self.sentences)

    def style_set(self) -> list[str]:
        return sorted(set(self.styles))

    def by_style(self, style: str) -> list[list[str]]:
        return [s for s, lab in zip(self.sentences, self.styles) if lab == style]

    def add(self, tokens: list[str], style: str) -> None:
        self.sentences.append(tokens)
        self.styles.append(style)

    def save_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tokens, style in zip(self.sentences, self.styles):
                fh.write(json.dumps({"text": " ".join(tokens), "style": style}) + "\n")

    @classmethod
    def load_jsonl(cls, path) -> "StyledCorpus":
        sentences, styles = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    text, style = obj["text"], obj["style"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad styled-corpus record: {exc}") from exc
                tokens = _truncate(tokenize(text))
                if not tokens:
                    raise ValueError(f"{path}:{lineno}: empty sentence after tokenisation")
                sentences.append(tokens)
                styles.append(str(style))
        return cls(sentences, styles)


@dataclass
class ParallelCorpus:
    """Aligned (source, target) token-sequence pairs."""

    pairs: list[tuple[list[str], list[str]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def reversed(self) -> "ParallelCorpus":
        """Swap source and target sides (for training the return direction)."""
        return ParallelCorpus([(t, s) for s, t in self.pairs])

    def save_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for src, tgt in self.pairs:
                fh.write(json.dumps({"src": " ".join(src), "tgt": " ".join(tgt)}) + "\n")

    @classmethod
    def load_jsonl(cls, path) -> "ParallelCorpus":
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    src, tgt = obj["src"], obj["tgt"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad parallel record: {exc}") from exc
                s = _truncate(tokenize(src))
                t = _truncate(tokenize(tgt))
                if not s or not t:
                    raise ValueError(f"{path}:{lineno}: empty side in parallel pair")
                pairs.append((s, t))
        return cls(pairs)


@dataclass(frozen=True)
class SplitSpec:
    """Ratios for the (classifier, generator-train, dev, test) splits."""

    ratios: tuple[float, float, float, float] = (0.4, 0.4, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 4:
            raise ValueError("exactly four split ratios required")
        if any(r < 0 for r in self.ratios):
            raise ValueError("split ratios must be non-negative")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {sum(self.ratios)}")


@dataclass
class Splits:
    classifier: StyledCorpus
    train: StyledCorpus
    dev: StyledCorpus
    test: StyledCorpus

    def as_dict(self) -> dict[str, StyledCorpus]:
        return {"class": self.classifier, "train": self.train, "dev": self.dev, "test": self.test}


def make_splits(corpus: StyledCorpus, spec: SplitSpec) -> Splits:
    """Carve a styled corpus into four disjoint splits.

    Within each style (styles processed in sorted order), sentence indices are
    shuffled by ``np.random.default_rng(seed).permutation`` and assigned by
    rounded cumulative ratio boundaries, so each split's per-style count is
    within 1 of the exact proportion. Afterwards, any sentence whose token
    string also appears in dev or test is dropped from the classifier and
    train splits, keeping the evaluation sets disjoint from all training text.
    """
    rng = np.random.default_rng(spec.seed)
    parts: dict[str, StyledCorpus] = {k: StyledCorpus() for k in ("class", "train", "dev", "test")}
    order = ("class", "train", "dev", "test")
    for style in corpus.style_set():
        idx = [i for i, s in enumerate(corpus.styles) if s == style]
        perm = rng.permutation(len(idx))
        shuffled = [idx[p] for p in perm]
        n = len(shuffled)
        cum = np.cumsum(spec.ratios)
        bounds = [0] + [int(round(c * n)) for c in cum]
        bounds[-1] = n
        for name, lo, hi in zip(order, bounds[:-1], bounds[1:]):
            for i in shuffled[lo:hi]:
                parts[name].add(corpus.sentences[i], corpus.styles[i])
    held_out = {" ".join(s) for s in parts["dev"].sentences}
    held_out.update(" ".join(s) for s in parts["test"].sentences)
    for name in ("class", "train"):
        kept = StyledCorpus()
        for tokens, style in zip(parts[name].sentences, parts[name].styles):
            if " ".join(tokens) not in held_out:
                kept.add(tokens, style)
        parts[name] = kept
    return Splits(parts["class"], parts["train"], parts["dev"], parts["test"])


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the synthetic pivot-translation and style task.

    Styled sentences are drawn from a shared pool of content templates with
    1..k marker tokens from exactly one style's marker set inserted at random
    positions. Parallel sentences are fresh content draws with 0..k markers
    from either set, so the translator is style-agnostic.
    """

    content_vocab_size: int = 120
    markers_per_style: int = 8
    template_count: int = 400
    template_len: tuple[int, int] = (3, 9)
    marker_count: tuple[int, int] = (1, 2)
    parallel_pairs: int = 5000
    styled_sentences: int = 4000
    style_names: tuple[str, str] = ("s1", "s2")

    def content_tokens(self) -> list[str]:
        return [f"w{i:03d}" for i in range(self.content_vocab_size)]

    def markers(self, which: int) -> list[str]:
        tag = ("m1a", "m2b")[which]
        return [f"{tag}{i}" for i in range(self.markers_per_style)]


def make_pivot_mapping(tokens) -> dict[str, str]:
    """Per-token bijection into the pivot language (prefix rename)."""
    toks = list(tokens)
    if len(set(toks)) != len(toks):
        raise ValueError("pivot mapping requires unique tokens")
    return {t: "q" + t for t in toks}


def pivot_transform(tokens: list[str], mapping: dict[str, str]) -> list[str]:
    """Apply the bijection tokenwise, then reverse the whole sentence."""
    return [mapping[t] for t in reversed(tokens)]


def style_of_markers(tokens, marker_sets: dict[str, set]) -> str | None:
    """Recover the label of a synthetic sentence by marker lookup.

    Returns the single style whose markers appear, or None if none or both
    appear (synthetic styled sentences always yield exactly one).
    """
    present = [s for s, mk in sorted(marker_sets.items()) if any(t in mk for t in tokens)]
    return present[0] if len(present) == 1 else None


def gen_synthetic(spec: SyntheticSpec, seed: int) -> tuple[ParallelCorpus, StyledCorpus]:
    """Deterministically generate the parallel and styled corpora.

    One ``np.random.default_rng(seed)`` drives every draw in a fixed order,
    so identical (spec, seed) give byte-identical corpora.
    """
    m1, m2 = spec.markers(0), spec.markers(1)
    content = spec.content_tokens()
    if set(m1) & set(m2):
        raise ValueError("style marker sets must be disjoint")
    if (set(m1) | set(m2)) & set(content):
        raise ValueError("markers must not collide with content tokens")
    rng = np.random.default_rng(seed)
    lo, hi = spec.template_len

    templates: list[tuple[str, ...]] = []
    seen = set()
    while len(templates) < spec.template_count:
        length = int(rng.integers(lo, hi + 1))
        cand = tuple(content[i] for i in rng.integers(0, len(content), size=length))
        if cand not in seen:
            seen.add(cand)
            templates.append(cand)

    def insert_markers(base: list[str], pool: list[str], k: int) -> list[str]:
        out = list(base)
        for _ in range(k):
            tok = pool[int(rng.integers(0, len(pool)))]
            pos = int(rng.integers(0, len(out) + 1))
            out.insert(pos, tok)
        return out

    k_lo, k_hi = spec.marker_count
    both = m1 + m2
    parallel = ParallelCorpus()
    mapping = make_pivot_mapping(content + both)
    for _ in range(spec.parallel_pairs):
        length = int(rng.integers(lo, hi + 1))
        base = [content[i] for i in rng.integers(0, len(content), size=length)]
        k = int(rng.integers(0, k_hi + 1))
        src = insert_markers(base, both, k)
        parallel.pairs.append((src, pivot_transform(src, mapping)))

    styled = StyledCorpus()
    s1, s2 = spec.style_names
    for i in range(spec.styled_sentences):
        style, pool = (s1, m1) if i % 2 == 0 else (s2, m2)
        base = list(templates[int(rng.integers(0, len(templates)))])
        k = int(rng.integers(k_lo, k_hi + 1))
        styled.add(insert_markers(base, pool, k), style)
    return parallel, styled
