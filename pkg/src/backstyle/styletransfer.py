"""Style classifier and classifier-guided per-style generators.

A convolutional classifier scores a sentence on two styles from per-token
features [word embedding, in-lexicon-1, in-lexicon-2]; it accepts either hard
token ids or soft per-step distributions, where a soft token contributes its
expected embedding and expected indicators. The two paths agree exactly on
one-hot inputs.

Each style owns a decoder over the shared latent code z (the return-direction
encoder output of the sentence's pivot translation). Generators train on two
signals at once: teacher-forced reconstruction of their own style's sentences
from z, and the frozen classifier's judgment of a free-running relaxed decode
in which every step feeds back the expected embedding of a
temperature-annealed softmax over the output logits. The combined objective
is l_gen = l_recon + lambda_c * l_class, reported per step.

At inference, generation is hard greedy decoding; <unk> outputs are replaced
by the pivot token under the argmax of that step's attention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import exp, log

import numpy as np

from . import kernel
from .corpus import BOS_ID, EOS_ID, MAX_LEN, UNK_TOKEN, StyledCorpus, Vocabulary
from .kernel import ParamStore, Tensor
from .lexicon import StyleLexicon, indicator_matrix
from .seq2seq import (
    EncoderOutput,
    ModelDims,
    MTModel,
    TrainingFailureError,
    decoder_start,
    decoder_step,
    encode,
    glorot_uniform,
    greedy_decode_ids,
    init_decoder_params,
    pivot_translate,
    teacher_forced_loss,
    token_accuracy,
)

__all__ = [
    "ClassifierConfig",
    "StyleClassifier",
    "train_classifier",
    "TransferConfig",
    "anneal_tau",
    "StyleGenerator",
    "SoftSequence",
    "generate_soft",
    "StepStats",
    "TrainingStats",
    "load_stats_jsonl",
    "CachedZProvider",
    "train_style_generators",
    "copy_unk",
    "TransferPipeline",
    "transfer",
]


@dataclass(frozen=True)
class ClassifierConfig:
    """Classifier architecture and training hyperparameters.

    Per-token input width is ``embed + 2`` (embedding plus the two lexicon
    indicators); ``filters`` filters of width ``width`` are max-pooled over
    positions and mapped to two logits.
    """

    embed: int = 300
    filters: int = 100
    width: int = 5
    steps: int = 1500
    batch_size: int = 64
    lr: float = 1e-3
    clip_norm: float = 5.0
    eval_every: int = 100
    dev_fraction: float = 0.1
    seed: int = 0
    vocab_max: int | None = None
    stop_accuracy: float | None = None  # None: always run all steps

    @classmethod
    def desk(cls) -> "ClassifierConfig":
        """Small profile that trains in seconds on a laptop."""
        return cls(embed=32, filters=32, width=5, steps=800, eval_every=50)


class StyleClassifier:
    """Two-style CNN over word embeddings plus lexicon-indicator features."""

    def __init__(self, vocab: Vocabulary, lexicon: StyleLexicon, styles,
                 embed: int = 300, filters: int = 100, width: int = 5, seed: int = 0):
        styles = tuple(styles)
        if len(styles) != 2 or styles[0] == styles[1]:
            raise ValueError(f"classifier needs exactly two distinct styles, got {styles!r}")
        self.vocab = vocab
        self.lexicon = lexicon
        self.styles = styles
        self.embed_dim = int(embed)
        self.filters = int(filters)
        self.width = int(width)
        self.indicators = indicator_matrix(vocab.tokens, lexicon)  # (V, 2), constant
        self.indicators.setflags(write=False)
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        self.store.add("cls.embed", glorot_uniform(rng, (len(vocab), self.embed_dim)))
        self.store.add("cls.conv.w", glorot_uniform(rng, (self.filters, self.width, self.embed_dim + 2)))
        self.store.add("cls.conv.b", np.zeros(self.filters))
        self.store.add("cls.out.w", glorot_uniform(rng, (self.filters, 2)))
        self.store.add("cls.out.b", np.zeros(2))

    def style_index(self, style: str) -> int:
        if style not in self.styles:
            raise ValueError(f"unknown style {style!r}, classifier knows {self.styles}")
        return self.styles.index(style)

    def _head(self, feats: Tensor) -> Tensor:
        pooled = kernel.conv1d_maxpool(feats, self.store["cls.conv.w"], self.store["cls.conv.b"])
        return kernel.add(kernel.matmul(pooled, self.store["cls.out.w"]), self.store["cls.out.b"])

    def logits_ids(self, ids: np.ndarray) -> Tensor:
        """Hard path: (B, T) ids -> (B, 2) logits, or (T,) -> (2,)."""
        ids = np.asarray(ids)
        if ids.size == 0:
            raise ValueError("cannot classify an empty sequence")
        emb = kernel.embedding(self.store["cls.embed"], ids)
        ind = kernel.constant(self.indicators[ids])
        feats = kernel.concat([emb, ind], axis=ids.ndim)
        return self._head(feats)

    def logits_soft_steps(self, steps: list[Tensor]) -> Tensor:
        """Soft path: per-step (B, V) distributions -> (B, 2) logits."""
        if not steps:
            raise ValueError("cannot classify an empty sequence")
        probs = kernel.stack_steps(steps, axis=1)  # (B, T, V)
        bsz, tlen, v = probs.shape
        flat = kernel.reshape(probs, (bsz * tlen, v))
        emb = kernel.reshape(kernel.matmul(flat, self.store["cls.embed"]),
                             (bsz, tlen, self.embed_dim))
        ind = kernel.reshape(kernel.matmul(flat, kernel.constant(self.indicators)),
                             (bsz, tlen, 2))
        feats = kernel.concat([emb, ind], axis=2)
        return self._head(feats)

    def logits_soft(self, soft: "SoftSequence") -> Tensor:
        """Soft path for one sequence of (V,) distributions -> (2,) logits."""
        if len(soft) == 0:
            raise ValueError("cannot classify an empty sequence")
        probs = kernel.stack_steps(soft.probs, axis=0)  # (T, V)
        emb = kernel.matmul(probs, self.store["cls.embed"])
        ind = kernel.matmul(probs, kernel.constant(self.indicators))
        feats = kernel.concat([emb, ind], axis=1)
        return self._head(feats)

    def classify(self, inp) -> np.ndarray:
        """Probability pair over ``self.styles`` for tokens or a SoftSequence."""
        with kernel.no_grad():
            if isinstance(inp, SoftSequence):
                logits = self.logits_soft(inp)
            else:
                toks = list(inp)
                if not toks:
                    raise ValueError("cannot classify an empty sequence")
                logits = self.logits_ids(np.array(self.vocab.encode(toks)))
            return np.asarray(kernel.softmax_tau(logits, 1.0).data)

    def predict(self, tokens) -> str:
        return self.styles[int(np.argmax(self.classify(tokens)))]

    def save(self, path) -> None:
        meta = {
            "styles": list(self.styles),
            "vocab": self.vocab.tokens,
            "dims": {"embed": self.embed_dim, "filters": self.filters, "width": self.width},
            "lexicon": {
                "l1": list(self.lexicon.l1),
                "l2": list(self.lexicon.l2),
                "deltas": dict(self.lexicon.deltas),
            },
        }
        kernel.save_store(path, self.store, meta)

    @classmethod
    def load(cls, path) -> "StyleClassifier":
        arrays, meta = kernel.load_arrays(path)
        lex = StyleLexicon(
            l1=tuple(meta["lexicon"]["l1"]),
            l2=tuple(meta["lexicon"]["l2"]),
            deltas={w: float(d) for w, d in meta["lexicon"]["deltas"].items()},
        )
        dims = meta["dims"]
        clf = cls(Vocabulary(meta["vocab"]), lex, meta["styles"],
                  embed=dims["embed"], filters=dims["filters"], width=dims["width"])
        clf.store.load_arrays(arrays)
        return clf


def _split_dev(rng, n: int, fraction: float):
    """Seeded dev carve; returns (train indices, dev indices)."""
    perm = rng.permutation(n)
    n_dev = max(1, int(round(fraction * n))) if n > 1 else 0
    return perm[n_dev:], perm[:n_dev]


def train_classifier(class_corpus: StyledCorpus, lexicon: StyleLexicon,
                     config: ClassifierConfig = ClassifierConfig()):
    """Train the style classifier on a labeled corpus; returns (classifier, history).

    Sentences bucket by length for batching; a seeded ``dev_fraction`` slice
    is held out and the best-dev-accuracy parameter snapshot is restored at
    the end. ``history`` records per-step losses and per-eval accuracies.
    """
    styles = class_corpus.style_set()
    if len(styles) != 2:
        raise ValueError(f"classifier training needs exactly two styles, corpus has {styles}")
    rng = np.random.default_rng(config.seed)
    vocab = Vocabulary.build(class_corpus.sentences, max_size=config.vocab_max)
    clf = StyleClassifier(vocab, lexicon, styles, embed=config.embed,
                          filters=config.filters, width=config.width, seed=config.seed)
    data = [(np.array(vocab.encode(s)), clf.style_index(st))
            for s, st in zip(class_corpus.sentences, class_corpus.styles)]
    train_idx, dev_idx = _split_dev(rng, len(data), config.dev_fraction)
    train = [data[i] for i in train_idx]
    dev = [data[i] for i in dev_idx]
    if not train:
        train = dev

    buckets: dict[int, list[int]] = {}
    for i, (ids, _) in enumerate(train):
        buckets.setdefault(len(ids), []).append(i)
    keys = sorted(buckets)
    weights = np.array([len(buckets[k]) for k in keys], dtype=np.float64)
    weights /= weights.sum()
    stacked = {k: (np.stack([train[i][0] for i in buckets[k]]),
                   np.array([train[i][1] for i in buckets[k]]))
               for k in keys}

    adam = kernel.AdamConfig(lr=config.lr)
    history = {"loss": [], "dev_accuracy": [], "eval_steps": []}
    track_best = bool(dev)
    best = {"accuracy": -1.0, "arrays": None}

    def dev_accuracy() -> float:
        if not dev:
            return 0.0
        by_len: dict[int, list[int]] = {}
        for i, (ids, _) in enumerate(dev):
            by_len.setdefault(len(ids), []).append(i)
        correct = 0
        for length in sorted(by_len):
            idx = by_len[length]
            ids = np.stack([dev[i][0] for i in idx])
            labels = np.array([dev[i][1] for i in idx])
            with kernel.no_grad():
                logits = clf.logits_ids(ids)
            correct += int((np.asarray(logits.data).argmax(axis=1) == labels).sum())
        return correct / len(dev)

    for step in range(config.steps):
        key = keys[rng.choice(len(keys), p=weights)]
        pool = buckets[key]
        take = min(config.batch_size, len(pool))
        rows = rng.choice(len(pool), size=take, replace=False)
        ids = stacked[key][0][rows]
        labels = stacked[key][1][rows]
        try:
            clf.store.zero_grad()
            logits = clf.logits_ids(ids)
            loss = kernel.cross_entropy_logits(logits, labels)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise TrainingFailureError(step, f"non-finite loss {loss_val}")
            kernel.backward(loss)
            grads, _ = kernel.clip_by_global_norm(clf.store.gradients(), config.clip_norm)
            kernel.adam_step(clf.store, adam, grads)
        except kernel.NonFiniteError as exc:
            raise TrainingFailureError(step, str(exc)) from exc
        history["loss"].append(loss_val)
        if track_best and ((step + 1) % config.eval_every == 0 or step + 1 == config.steps):
            acc = dev_accuracy()
            history["dev_accuracy"].append(acc)
            history["eval_steps"].append(step + 1)
            if acc > best["accuracy"]:
                best = {"accuracy": acc, "arrays": clf.store.snapshot()}
            if config.stop_accuracy is not None and acc >= config.stop_accuracy:
                break
    if best["arrays"] is not None:
        clf.store.load_arrays(best["arrays"])
        history["best_dev_accuracy"] = best["accuracy"]
    return clf, history


@dataclass(frozen=True)
class TransferConfig:
    """Generator-training knobs: loss balance, temperature schedule, sizes.

    ``decay_rate`` of None picks the rate at which the schedule reaches the
    ``tau_min`` floor after 80% of the training steps.
    """

    lambda_c: float = 15.0
    tau0: float = 1.0
    tau_min: float = 1e-3
    decay_rate: float | None = None
    dims: ModelDims = field(default_factory=ModelDims.desk)
    max_len: int = MAX_LEN
    rollout_margin: int = 2
    steps: int = 2000
    batch_size: int = 32
    lr: float = 1e-3
    clip_norm: float = 5.0
    eval_every: int = 200
    dev_fraction: float = 0.1
    seed: int = 0
    stop_accuracy: float | None = None  # None: always run all steps

    def __post_init__(self):
        if self.lambda_c < 0:
            raise ValueError(f"lambda_c must be non-negative, got {self.lambda_c}")
        if not (0 < self.tau_min <= self.tau0):
            raise ValueError(f"need 0 < tau_min <= tau0, got {self.tau_min}, {self.tau0}")
        if self.decay_rate is not None and self.decay_rate < 0:
            raise ValueError(f"decay rate must be non-negative, got {self.decay_rate}")
        if self.steps <= 0:
            raise ValueError(f"steps must be positive, got {self.steps}")

    def rate(self) -> float:
        if self.decay_rate is not None:
            return self.decay_rate
        return log(self.tau0 / self.tau_min) / (0.8 * self.steps)


def anneal_tau(step: int, config: TransferConfig) -> float:
    """Exponentially decayed softmax temperature with a floor.

    tau(step) = max(tau_min, tau0 * exp(-r * step)); positive and
    non-increasing in step.
    """
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    return max(config.tau_min, config.tau0 * exp(-config.rate() * step))


class StyleGenerator:
    """One style's decoder over the shared z interface; no generator shares
    parameters with any other."""

    def __init__(self, vocab: Vocabulary, dims: ModelDims, style: str, seed: int = 0):
        self.vocab = vocab
        self.dims = dims
        self.style = str(style)
        self.store = ParamStore()
        init_decoder_params(self.store, "gen", len(vocab), dims, np.random.default_rng(seed))

    def save(self, path) -> None:
        meta = {"style": self.style, "dims": self.dims.as_dict(), "vocab": self.vocab.tokens}
        kernel.save_store(path, self.store, meta)

    @classmethod
    def load(cls, path) -> "StyleGenerator":
        arrays, meta = kernel.load_arrays(path)
        gen = cls(Vocabulary(meta["vocab"]), ModelDims.from_dict(meta["dims"]), meta["style"])
        gen.store.load_arrays(arrays)
        return gen


@dataclass
class SoftSequence:
    """Relaxed decode of one sentence: per-step distributions over the
    vocabulary, the raw logits behind them, and the attention rows."""

    probs: list
    logits: list
    attention: list

    def __len__(self) -> int:
        return len(self.probs)

    def stacked_probs(self) -> np.ndarray:
        return np.stack([np.asarray(p.data) for p in self.probs])

    def argmax_ids(self) -> list[int]:
        return [int(np.asarray(o.data).argmax()) for o in self.logits]


def _soft_rollout(store: ParamStore, prefix: str, dims: ModelDims, z: EncoderOutput,
                  tau: float, max_len: int):
    """Free-running relaxed decode over a z batch.

    Each step feeds back the expected embedding of its softmax(logits / tau).
    Rollout stops after ``max_len`` steps, or once every row's argmax logit
    is EOS (that step is kept). Returns per-step (probs, logits, attention)
    lists of (B, ...) tensors.
    """
    bsz = z.batch
    state = decoder_start(store, prefix, dims, z.final)
    emb = kernel.embedding(store[f"{prefix}.embed"], np.full(bsz, BOS_ID))
    probs_steps, logits_steps, attn_steps = [], [], []
    for _ in range(max_len):
        logits, att, state = decoder_step(store, prefix, dims, state, emb, z.states)
        p = kernel.softmax_tau(logits, tau)
        probs_steps.append(p)
        logits_steps.append(logits)
        attn_steps.append(att.weights)
        if (np.asarray(logits.data).argmax(axis=1) == EOS_ID).all():
            break
        emb = kernel.matmul(p, store[f"{prefix}.embed"])
    return probs_steps, logits_steps, attn_steps


def generate_soft(z: EncoderOutput, gen: StyleGenerator, tau: float,
                  max_len: int | None = None) -> SoftSequence:
    """Relaxed generation from one sentence's z at temperature ``tau``."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if z.batch != 1:
        raise ValueError(f"generate_soft expects a single-sentence z, got batch {z.batch}")
    cap = gen.dims.max_len if max_len is None else max_len
    probs, logits, attn = _soft_rollout(gen.store, "gen", gen.dims, z, tau, cap)

    def flat(t):
        return kernel.reshape(t, (t.shape[1],))

    return SoftSequence(
        probs=[flat(p) for p in probs],
        logits=[flat(o) for o in logits],
        attention=[flat(a) for a in attn],
    )


@dataclass(frozen=True)
class StepStats:
    """One generator-training step's losses and temperature."""

    step: int
    style: str
    l_recon: float
    l_class: float
    l_gen: float
    tau: float

    def as_dict(self) -> dict:
        return {"step": self.step, "style": self.style, "l_recon": self.l_recon,
                "l_class": self.l_class, "l_gen": self.l_gen, "tau": self.tau}


@dataclass
class TrainingStats:
    """Per-step records plus per-style dev reconstruction accuracy."""

    records: list
    dev_accuracy: dict
    best_dev_accuracy: dict

    def for_style(self, style: str) -> list:
        return [r for r in self.records if r.style == style]

    def save_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r.as_dict(), sort_keys=True) + "\n")


def load_stats_jsonl(path) -> list[StepStats]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(StepStats(**json.loads(line)))
    return records


class CachedZProvider:
    """z (and the pivot behind it) per sentence, computed once per sentence
    through a fixed MT pair."""

    def __init__(self, mt_ef: MTModel, mt_fe: MTModel):
        self.mt_ef = mt_ef
        self.mt_fe = mt_fe
        self._cache: dict[tuple, tuple] = {}

    def _entry(self, tokens):
        key = tuple(tokens)
        if key not in self._cache:
            pivot = pivot_translate(list(key), self.mt_ef)
            with kernel.no_grad():
                z = encode(pivot, self.mt_fe)
            self._cache[key] = (pivot, z.arrays())
        return self._cache[key]

    def pivot(self, tokens) -> list[str]:
        return list(self._entry(tokens)[0])

    def __call__(self, tokens) -> EncoderOutput:
        states, final = self._entry(tokens)[1]
        return EncoderOutput.from_arrays(states, final)


def train_style_generators(train_corpus: StyledCorpus, z_provider,
                           classifier: StyleClassifier,
                           config: TransferConfig = TransferConfig()):
    """Train one generator per style against the frozen classifier.

    Returns (generator for the first style, generator for the second,
    TrainingStats), styles in sorted order. Each generator minimizes
    l_gen = l_recon + lambda_c * l_class. l_recon is teacher-forced cross
    entropy reconstructing the generator's own style's sentences from their
    z. l_class is the frozen classifier's cross entropy, labeled with the
    generator's style, on a free-running relaxed decode from z drawn across
    the whole training corpus: z is the shared content representation, so
    the generator must impose its style on content from either side, which
    is exactly the transfer condition. Free rollouts are capped near the
    source length (positions plus ``rollout_margin``) so the classifier
    judges a sentence-shaped output. The classifier receives no updates; a
    NaN loss raises ``TrainingFailureError``.
    """
    styles = train_corpus.style_set()
    if tuple(styles) != classifier.styles:
        raise ValueError(
            f"corpus styles {styles} do not match classifier styles {classifier.styles}")
    classifier.store.freeze()
    vocab = classifier.vocab
    dims = config.dims
    adam = kernel.AdamConfig(lr=config.lr)

    ids_all = [np.array(vocab.encode(s)) for s in train_corpus.sentences]
    z_all = [z_provider(s).arrays() for s in train_corpus.sentences]

    # content pool for the classifier term: every training z, both styles,
    # bucketed by position count
    pool_buckets: dict[int, list[int]] = {}
    for i, (states, _) in enumerate(z_all):
        pool_buckets.setdefault(states.shape[1], []).append(i)
    pool_keys = sorted(pool_buckets)
    pool_weights = np.array([len(pool_buckets[p]) for p in pool_keys], dtype=np.float64)
    pool_weights /= pool_weights.sum()
    pool_stacked = {p: (np.concatenate([z_all[i][0] for i in pool_buckets[p]]),
                        np.concatenate([z_all[i][1] for i in pool_buckets[p]]))
                    for p in pool_keys}

    records: list[StepStats] = []
    dev_hist: dict[str, list] = {}
    best_acc: dict[str, float] = {}
    generators = []

    for style_pos, style in enumerate(styles):
        own_rows = [i for i, s in enumerate(train_corpus.styles) if s == style]
        rng = np.random.default_rng([config.seed, style_pos])
        gen = StyleGenerator(vocab, dims, style, seed=config.seed + style_pos)
        train_pos, dev_pos = _split_dev(rng, len(own_rows), config.dev_fraction)
        train_rows = [own_rows[i] for i in train_pos]
        dev_rows = [own_rows[i] for i in dev_pos]
        if not train_rows:
            train_rows = dev_rows

        def bucketize(rows):
            out: dict[tuple[int, int], list[int]] = {}
            for i in rows:
                out.setdefault((len(ids_all[i]), z_all[i][0].shape[1]), []).append(i)
            return out

        buckets = bucketize(train_rows)
        keys = sorted(buckets)
        weights = np.array([len(buckets[k]) for k in keys], dtype=np.float64)
        weights /= weights.sum()
        stacked = {}
        for k in keys:
            idx = buckets[k]
            stacked[k] = (np.stack([ids_all[i] for i in idx]),
                          np.concatenate([z_all[i][0] for i in idx]),
                          np.concatenate([z_all[i][1] for i in idx]))
        dev_buckets = bucketize(dev_rows)

        def dev_recon_accuracy() -> float:
            correct = total = 0
            for k in sorted(dev_buckets):
                idx = dev_buckets[k]
                ids = np.stack([ids_all[i] for i in idx])
                z = EncoderOutput.from_arrays(
                    np.concatenate([z_all[i][0] for i in idx]),
                    np.concatenate([z_all[i][1] for i in idx]))
                c, n = token_accuracy(gen.store, "gen", dims, z, ids)
                correct += c
                total += n
            return correct / total if total else 0.0

        label = classifier.style_index(style)
        track_best = bool(dev_buckets)
        best = {"accuracy": -1.0, "arrays": None}
        for step in range(config.steps):
            tau = anneal_tau(step, config)
            key = keys[rng.choice(len(keys), p=weights)]
            pool = buckets[key]
            take = min(config.batch_size, len(pool))
            rows = rng.choice(len(pool), size=take, replace=False)
            x_ids = stacked[key][0][rows]
            z_recon = EncoderOutput.from_arrays(stacked[key][1][rows], stacked[key][2][rows])
            pkey = pool_keys[rng.choice(len(pool_keys), p=pool_weights)]
            ppool = pool_buckets[pkey]
            ptake = min(config.batch_size, len(ppool))
            prows = rng.choice(len(ppool), size=ptake, replace=False)
            z_free = EncoderOutput.from_arrays(pool_stacked[pkey][0][prows],
                                               pool_stacked[pkey][1][prows])
            try:
                gen.store.zero_grad()
                l_recon, _, _ = teacher_forced_loss(gen.store, "gen", dims, z_recon, x_ids)
                cap = min(config.max_len, pkey + config.rollout_margin)
                p_steps, _, _ = _soft_rollout(gen.store, "gen", dims, z_free, tau, cap)
                cls_logits = classifier.logits_soft_steps(p_steps)
                labels = np.full(ptake, label)
                l_class = kernel.cross_entropy_logits(cls_logits, labels)
                loss = kernel.add(l_recon, kernel.scale(l_class, config.lambda_c))
                loss_val = float(loss.data)
                if not np.isfinite(loss_val):
                    raise TrainingFailureError(step, f"non-finite loss {loss_val}")
                kernel.backward(loss)
                grads, _ = kernel.clip_by_global_norm(gen.store.gradients(), config.clip_norm)
                kernel.adam_step(gen.store, adam, grads)
            except kernel.NonFiniteError as exc:
                raise TrainingFailureError(step, str(exc)) from exc
            records.append(StepStats(step=step, style=style, l_recon=float(l_recon.data),
                                     l_class=float(l_class.data), l_gen=loss_val, tau=tau))
            if track_best and ((step + 1) % config.eval_every == 0 or step + 1 == config.steps):
                acc = dev_recon_accuracy()
                dev_hist.setdefault(style, []).append((step + 1, acc))
                # ties prefer the later snapshot: equal reconstruction at a
                # lower temperature means more classifier-guided training
                if acc >= best["accuracy"]:
                    best = {"accuracy": acc, "arrays": gen.store.snapshot()}
                if config.stop_accuracy is not None and acc >= config.stop_accuracy:
                    break
        if best["arrays"] is not None:
            gen.store.load_arrays(best["arrays"])
            best_acc[style] = best["accuracy"]
        generators.append(gen)

    stats = TrainingStats(records=records, dev_accuracy=dev_hist, best_dev_accuracy=best_acc)
    return generators[0], generators[1], stats


def copy_unk(output_tokens, attention_history, source_tokens) -> list[str]:
    """Replace each <unk> output token with the most-attended source token.

    ``attention_history`` must hold one distribution over source positions
    per output token; ties go to the smallest source index. Non-UNK tokens
    pass through untouched.
    """
    out = list(output_tokens)
    src = list(source_tokens)
    if len(attention_history) != len(out):
        raise ValueError(
            f"need one attention row per output token, got {len(attention_history)} rows "
            f"for {len(out)} tokens")
    result = []
    for t, tok in enumerate(out):
        if tok != UNK_TOKEN:
            result.append(tok)
            continue
        row = np.asarray(attention_history[t], dtype=np.float64)
        if row.shape != (len(src),):
            raise ValueError(
                f"attention row {t} has shape {row.shape}, expected ({len(src)},)")
        result.append(src[int(np.argmax(row))])
    return result


@dataclass
class TransferPipeline:
    """Everything inference needs: the MT pair plus one generator per style."""

    mt_ef: MTModel
    mt_fe: MTModel
    generators: dict

    def generator_for(self, style: str) -> StyleGenerator:
        if style not in self.generators:
            raise ValueError(f"no generator for style {style!r}, have {sorted(self.generators)}")
        return self.generators[style]


def transfer(tokens, source_style: str, target_style: str,
             pipeline: TransferPipeline, max_len: int | None = None) -> list[str]:
    """Rewrite one sentence into the target style.

    Pipeline: greedy pivot translation, return-direction encoding to z,
    greedy decoding with the target style's generator, then UNK replacement
    from the pivot via the attention history. Stage failures surface as
    ``PipelineStageError`` with the stage name.
    """
    toks = list(tokens)
    if not toks:
        raise ValueError("cannot transfer an empty sentence")
    pipeline.generator_for(source_style)  # validates the tag early
    gen = pipeline.generator_for(target_style)
    pivot = pivot_translate(toks, pipeline.mt_ef)
    with kernel.no_grad():
        z = encode(pivot, pipeline.mt_fe)
        cap = gen.dims.max_len if max_len is None else max_len
        ids, attns = greedy_decode_ids(gen.store, "gen", gen.dims, z, cap)[0]
    return copy_unk(gen.vocab.decode(ids), attns, pivot)
