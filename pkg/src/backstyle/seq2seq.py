"""Attention-based encoder-decoder translation and the latent code z.

The encoder is a 2-layer bidirectional LSTM whose per-direction states are
concatenated, so encoder states have width 2*hidden. The decoder is a 2-layer
unidirectional LSTM with dot-product attention over the encoder states; a
learned projection maps the decoder state to encoder-state width before the
dot product, the attention-weighted context is combined with the decoder
state through a tanh layer, and an affine output projection produces logits.

The latent code z of a sentence is the full ``EncoderOutput`` of the return
(f -> e) encoder applied to the sentence's pivot translation: the
per-position state sequence plus the final-state summary. Style generators
attend over exactly this interface.

Training is teacher-forced cross entropy with Adam and global-norm gradient
clipping; the checkpoint with the best dev token accuracy is returned.
Translation at inference is greedy argmax decoding, capped at 50 tokens.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import exp, log

import numpy as np

from . import kernel
from .corpus import BOS_ID, EOS_ID, MAX_LEN, PAD_ID, ParallelCorpus, Vocabulary
from .kernel import ParamStore, Tensor

__all__ = [
    "ModelDims",
    "MTTrainConfig",
    "MTModel",
    "EncoderOutput",
    "AttentionState",
    "TrainingFailureError",
    "PipelineStageError",
    "encode",
    "encode_ids",
    "attend",
    "decode_greedy",
    "greedy_decode_ids",
    "train_mt",
    "pivot_translate",
    "backtranslate_encode",
    "corpus_bleu",
    "antidiagonal_attention_mass",
    "glorot_uniform",
    "init_decoder_params",
    "decoder_start",
    "decoder_step",
    "teacher_forced_loss",
    "token_accuracy",
]


class TrainingFailureError(RuntimeError):
    """Training diverged; ``step`` records where."""

    def __init__(self, step: int, message: str):
        super().__init__(f"training failed at step {step}: {message}")
        self.step = step


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class ModelDims:
    """Network widths. Defaults are the full-scale values; ``desk()`` is the
    small profile used for synthetic-task runs."""

    embed: int = 300
    hidden: int = 500
    attn: int = 500
    layers: int = 2
    max_len: int = MAX_LEN

    @classmethod
    def desk(cls) -> "ModelDims":
        return cls(embed=32, hidden=64, attn=64, layers=2)

    def as_dict(self) -> dict:
        return {"embed": self.embed, "hidden": self.hidden, "attn": self.attn,
                "layers": self.layers, "max_len": self.max_len}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelDims":
        return cls(**d)


@dataclass
class EncoderOutput:
    """Latent code: per-position states (B, T, 2H) plus final summary (B, 2H)."""

    states: Tensor
    final: Tensor

    @property
    def batch(self) -> int:
        return self.states.shape[0]

    @property
    def positions(self) -> int:
        return self.states.shape[1]

    def detached(self) -> "EncoderOutput":
        """Constant copy that takes no gradient (frozen z for generator training)."""
        return EncoderOutput(kernel.constant(self.states.data), kernel.constant(self.final.data))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.states.data), np.asarray(self.final.data)

    @classmethod
    def from_arrays(cls, states: np.ndarray, final: np.ndarray) -> "EncoderOutput":
        return cls(kernel.constant(states), kernel.constant(final))


@dataclass
class AttentionState:
    """One attention step: query state, alignment weights, context vector."""

    h: Tensor
    weights: Tensor
    context: Tensor


def glorot_uniform(rng, shape):
    # scale by fan-in/fan-out so activations neither vanish nor blow up
    limit = np.sqrt(6.0 / (shape[0] + shape[-1]))
    return rng.uniform(-limit, limit, size=shape)


def _init_lstm_stack(store: ParamStore, prefix: str, input_dim: int, dims: ModelDims, rng) -> None:
    """Register wx/wh/b for each layer; forget-gate bias starts at 1."""
    h = dims.hidden
    for layer in range(dims.layers):
        din = input_dim if layer == 0 else h
        store.add(f"{prefix}.l{layer}.wx", glorot_uniform(rng, (din, 4 * h)))
        store.add(f"{prefix}.l{layer}.wh", glorot_uniform(rng, (h, 4 * h)))
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        store.add(f"{prefix}.l{layer}.b", b)


def init_decoder_params(store: ParamStore, prefix: str, vocab_size: int, dims: ModelDims, rng) -> None:
    """Register every decoder parameter under ``prefix``."""
    h, a = dims.hidden, dims.attn
    store.add(f"{prefix}.embed", glorot_uniform(rng, (vocab_size, dims.embed)))
    _init_lstm_stack(store, prefix, dims.embed, dims, rng)
    for layer in range(dims.layers):
        store.add(f"{prefix}.init{layer}.w", glorot_uniform(rng, (2 * h, h)))
        store.add(f"{prefix}.init{layer}.b", np.zeros(h))
    store.add(f"{prefix}.attn.query", glorot_uniform(rng, (h, 2 * h)))
    store.add(f"{prefix}.attn.combine.w", glorot_uniform(rng, (3 * h, a)))
    store.add(f"{prefix}.attn.combine.b", np.zeros(a))
    store.add(f"{prefix}.out.w", glorot_uniform(rng, (a, vocab_size)))
    store.add(f"{prefix}.out.b", np.zeros(vocab_size))


class MTModel:
    """One translation direction: vocabularies, dims, parameters, tag."""

    def __init__(self, src_vocab: Vocabulary, tgt_vocab: Vocabulary, dims: ModelDims,
                 direction: str, seed: int = 0):
        if direction not in ("e->f", "f->e"):
            raise ValueError(f"unknown direction tag {direction!r}")
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.dims = dims
        self._direction = direction
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        store = self.store
        store.add("enc.embed", glorot_uniform(rng, (len(src_vocab), dims.embed)))
        h = dims.hidden
        for direction_name in ("fwd", "bwd"):
            for layer in range(dims.layers):
                din = dims.embed if layer == 0 else 2 * h
                store.add(f"enc.{direction_name}.l{layer}.wx", glorot_uniform(rng, (din, 4 * h)))
                store.add(f"enc.{direction_name}.l{layer}.wh", glorot_uniform(rng, (h, 4 * h)))
                b = np.zeros(4 * h)
                b[h:2 * h] = 1.0
                store.add(f"enc.{direction_name}.l{layer}.b", b)
        init_decoder_params(store, "dec", len(tgt_vocab), dims, rng)

    @property
    def direction(self) -> str:
        return self._direction

    def save(self, path) -> None:
        meta = {
            "direction": self._direction,
            "dims": self.dims.as_dict(),
            "src_vocab": self.src_vocab.tokens,
            "tgt_vocab": self.tgt_vocab.tokens,
        }
        kernel.save_store(path, self.store, meta)

    @classmethod
    def load(cls, path) -> "MTModel":
        arrays, meta = kernel.load_arrays(path)
        model = cls(
            Vocabulary(meta["src_vocab"]),
            Vocabulary(meta["tgt_vocab"]),
            ModelDims.from_dict(meta["dims"]),
            meta["direction"],
        )
        model.store.load_arrays(arrays)
        return model


def encode_ids(store: ParamStore, dims: ModelDims, ids: np.ndarray) -> EncoderOutput:
    """Run the bidirectional encoder over an id batch (B, T)."""
    ids = np.asarray(ids)
    if ids.ndim != 2 or ids.shape[1] == 0:
        raise ValueError(f"encoder expects a non-empty (B, T) id batch, got {ids.shape}")
    bsz, tlen = ids.shape
    h = dims.hidden
    inputs = [kernel.embedding(store["enc.embed"], ids[:, t]) for t in range(tlen)]
    fwd_last = bwd_last = None
    for layer in range(dims.layers):
        outs_f, outs_b = [], []
        hf = kernel.constant(np.zeros((bsz, h)))
        cf = kernel.constant(np.zeros((bsz, h)))
        for t in range(tlen):
            hf, cf = kernel.lstm_cell(inputs[t], hf, cf,
                                      store[f"enc.fwd.l{layer}.wx"],
                                      store[f"enc.fwd.l{layer}.wh"],
                                      store[f"enc.fwd.l{layer}.b"])
            outs_f.append(hf)
        hb = kernel.constant(np.zeros((bsz, h)))
        cb = kernel.constant(np.zeros((bsz, h)))
        for t in reversed(range(tlen)):
            hb, cb = kernel.lstm_cell(inputs[t], hb, cb,
                                      store[f"enc.bwd.l{layer}.wx"],
                                      store[f"enc.bwd.l{layer}.wh"],
                                      store[f"enc.bwd.l{layer}.b"])
            outs_b.append(hb)
        outs_b.reverse()
        inputs = [kernel.concat([f, b], axis=1) for f, b in zip(outs_f, outs_b)]
        fwd_last, bwd_last = outs_f[-1], outs_b[0]
    states = kernel.stack_steps(inputs, axis=1)  # (B, T, 2H)
    final = kernel.concat([fwd_last, bwd_last], axis=1)  # (B, 2H)
    return EncoderOutput(states, final)


def encode(tokens, model: MTModel) -> EncoderOutput:
    """Encode one sentence; output positions equal the input length."""
    toks = list(tokens)
    if not toks:
        raise ValueError("cannot encode an empty sentence")
    if len(toks) > model.dims.max_len:
        raise ValueError(f"sentence length {len(toks)} exceeds max {model.dims.max_len}")
    ids = np.array([model.src_vocab.encode(toks)])
    return encode_ids(model.store, model.dims, ids)


def attend(h: Tensor, states: Tensor, projection: Tensor | None = None) -> AttentionState:
    """Dot-score attention of a decoder state over encoder states.

    ``projection`` (H x D_enc) maps the query to encoder-state width first;
    pass None when the widths already match. Weights are a softmax over
    source positions, so they are non-negative and sum to 1.
    """
    query = kernel.matmul(h, projection) if projection is not None else h
    scores = kernel.attn_scores(query, states)
    weights = kernel.softmax_tau(scores, 1.0)
    context = kernel.attn_context(weights, states)
    return AttentionState(h=h, weights=weights, context=context)


def decoder_start(store: ParamStore, prefix: str, dims: ModelDims, final: Tensor):
    """Initial decoder state: per-layer h = tanh(affine(final)), c = 0."""
    bsz = final.shape[0]
    state = []
    for layer in range(dims.layers):
        hl = kernel.tanh(kernel.add(kernel.matmul(final, store[f"{prefix}.init{layer}.w"]),
                                    store[f"{prefix}.init{layer}.b"]))
        cl = kernel.constant(np.zeros((bsz, dims.hidden)))
        state.append((hl, cl))
    return state


def decoder_step(store: ParamStore, prefix: str, dims: ModelDims, state, x_emb: Tensor,
                 enc_states: Tensor):
    """One decoder step from an input embedding; returns (logits, attention, state)."""
    h = x_emb
    new_state = []
    for layer in range(dims.layers):
        hl, cl = kernel.lstm_cell(h, state[layer][0], state[layer][1],
                                  store[f"{prefix}.l{layer}.wx"],
                                  store[f"{prefix}.l{layer}.wh"],
                                  store[f"{prefix}.l{layer}.b"])
        new_state.append((hl, cl))
        h = hl
    att = attend(h, enc_states, store[f"{prefix}.attn.query"])
    combined = kernel.tanh(kernel.add(
        kernel.matmul(kernel.concat([att.context, h], axis=1), store[f"{prefix}.attn.combine.w"]),
        store[f"{prefix}.attn.combine.b"]))
    logits = kernel.add(kernel.matmul(combined, store[f"{prefix}.out.w"]), store[f"{prefix}.out.b"])
    return logits, att, new_state


def teacher_forced_loss(store: ParamStore, prefix: str, dims: ModelDims, z: EncoderOutput,
                        tgt_ids: np.ndarray, reduction: str = "mean"):
    """Cross entropy of [BOS + tgt] predicting [tgt + EOS], averaged per token."""
    bsz, tlen = tgt_ids.shape
    dec_in = np.concatenate([np.full((bsz, 1), BOS_ID, dtype=tgt_ids.dtype), tgt_ids], axis=1)
    dec_out = np.concatenate([tgt_ids, np.full((bsz, 1), EOS_ID, dtype=tgt_ids.dtype)], axis=1)
    state = decoder_start(store, prefix, dims, z.final)
    step_logits = []
    for t in range(tlen + 1):
        emb = kernel.embedding(store[f"{prefix}.embed"], dec_in[:, t])
        logits, _, state = decoder_step(store, prefix, dims, state, emb, z.states)
        step_logits.append(logits)
    all_logits = kernel.concat(step_logits, axis=0)  # step-major (T+1)*B rows
    targets = np.concatenate([dec_out[:, t] for t in range(tlen + 1)])
    return kernel.cross_entropy_logits(all_logits, targets, reduction=reduction), all_logits, targets


def token_accuracy(store: ParamStore, prefix: str, dims: ModelDims, z: EncoderOutput,
                   tgt_ids: np.ndarray) -> tuple[int, int]:
    """Teacher-forced argmax hits over (tgt + EOS); returns (correct, total)."""
    with kernel.no_grad():
        _, all_logits, targets = teacher_forced_loss(store, prefix, dims, z, tgt_ids)
    pred = np.asarray(all_logits.data).argmax(axis=1)
    return int((pred == targets).sum()), len(targets)


def greedy_decode_ids(store: ParamStore, prefix: str, dims: ModelDims, z: EncoderOutput,
                      max_len: int = MAX_LEN, min_len: int = 1):
    """Batched greedy decoding; one (ids, attention rows) pair per batch row.

    Decoding runs until every row has emitted EOS or ``max_len`` steps have
    passed; each row's output stops at its first EOS (exclusive). Attention
    rows align one-to-one with the emitted tokens. EOS is suppressed for the
    first ``min_len`` steps so every row emits at least that many tokens.
    """
    bsz = z.batch
    with kernel.no_grad():
        state = decoder_start(store, prefix, dims, z.final)
        current = np.full(bsz, BOS_ID)
        finished = np.zeros(bsz, dtype=bool)
        ids_steps, attn_steps = [], []
        for step in range(max_len):
            emb = kernel.embedding(store[f"{prefix}.embed"], current)
            logits, att, state = decoder_step(store, prefix, dims, state, emb, z.states)
            scores = np.asarray(logits.data)
            if step < min_len:
                scores = scores.copy()
                scores[:, EOS_ID] = -np.inf
            current = scores.argmax(axis=1)
            ids_steps.append(current.copy())
            attn_steps.append(np.asarray(att.weights.data).copy())
            finished |= current == EOS_ID
            if finished.all():
                break
    results = []
    for row in range(bsz):
        ids, attns = [], []
        for step_ids, step_attn in zip(ids_steps, attn_steps):
            tok = int(step_ids[row])
            if tok == EOS_ID:
                break
            ids.append(tok)
            attns.append(step_attn[row])
        results.append((ids, attns))
    return results


def decode_greedy(z: EncoderOutput, model: MTModel, max_len: int = MAX_LEN):
    """Greedy translation of one encoded sentence -> (tokens, attention history)."""
    (ids, attns) = greedy_decode_ids(model.store, "dec", model.dims, z, max_len)[0]
    return model.tgt_vocab.decode(ids), attns


@dataclass(frozen=True)
class MTTrainConfig:
    dims: ModelDims = field(default_factory=ModelDims.desk)
    steps: int = 4000
    batch_size: int = 64
    lr: float = 1e-3
    clip_norm: float = 5.0
    eval_every: int = 200
    dev_fraction: float = 0.05
    seed: int = 0
    vocab_max: int | None = None
    stop_accuracy: float | None = 1.0  # None: always run all steps


def _bucket_pairs(pairs_ids):
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, (s, t) in enumerate(pairs_ids):
        buckets.setdefault((len(s), len(t)), []).append(i)
    return buckets


def train_mt(parallel: ParallelCorpus, config: MTTrainConfig, direction: str = "e->f"):
    """Train one translation direction; returns (model, history).

    A deterministic dev slice (``dev_fraction`` of pairs, from a seeded
    permutation) is held out for token-accuracy evaluation every
    ``eval_every`` steps; the best-scoring parameter snapshot is restored at
    the end. ``history`` records per-step losses and per-eval accuracies.
    Divergence (non-finite loss) raises ``TrainingFailureError`` with the
    step index.
    """
    if len(parallel) == 0:
        raise ValueError("cannot train on an empty parallel corpus")
    rng = np.random.default_rng(config.seed)
    src_vocab = Vocabulary.build((s for s, _ in parallel.pairs), max_size=config.vocab_max)
    tgt_vocab = Vocabulary.build((t for _, t in parallel.pairs), max_size=config.vocab_max)
    model = MTModel(src_vocab, tgt_vocab, config.dims, direction, seed=config.seed)
    store = model.store

    pairs_ids = [(np.array(src_vocab.encode(s)), np.array(tgt_vocab.encode(t)))
                 for s, t in parallel.pairs]
    perm = rng.permutation(len(pairs_ids))
    n_dev = max(1, int(round(config.dev_fraction * len(pairs_ids)))) if len(pairs_ids) > 1 else 0
    dev_idx = perm[:n_dev]
    train_idx = perm[n_dev:] if n_dev else perm
    train_pairs = [pairs_ids[i] for i in train_idx]
    dev_pairs = [pairs_ids[i] for i in dev_idx]
    if not train_pairs:
        train_pairs = dev_pairs
    buckets = _bucket_pairs(train_pairs)
    keys = sorted(buckets)
    weights = np.array([len(buckets[k]) for k in keys], dtype=np.float64)
    weights /= weights.sum()
    stacked = {k: (np.stack([train_pairs[i][0] for i in buckets[k]]),
                   np.stack([train_pairs[i][1] for i in buckets[k]]))
               for k in keys}

    adam = kernel.AdamConfig(lr=config.lr)
    history = {"loss": [], "dev_accuracy": [], "eval_steps": []}
    track_best = bool(dev_pairs)  # without a dev set, keep the final params
    best = {"accuracy": -1.0, "arrays": None}

    def dev_accuracy() -> float:
        if not dev_pairs:
            return 0.0
        dev_buckets = _bucket_pairs(dev_pairs)
        correct = total = 0
        for key in sorted(dev_buckets):
            idx = dev_buckets[key]
            src = np.stack([dev_pairs[i][0] for i in idx])
            tgt = np.stack([dev_pairs[i][1] for i in idx])
            with kernel.no_grad():
                z = encode_ids(store, config.dims, src)
            c, n = token_accuracy(store, "dec", config.dims, z, tgt)
            correct += c
            total += n
        return correct / total if total else 0.0

    for step in range(config.steps):
        key = keys[rng.choice(len(keys), p=weights)]
        pool = buckets[key]
        take = min(config.batch_size, len(pool))
        rows = rng.choice(len(pool), size=take, replace=False)
        src = stacked[key][0][rows]
        tgt = stacked[key][1][rows]
        try:
            store.zero_grad()
            z = encode_ids(store, config.dims, src)
            loss, _, _ = teacher_forced_loss(store, "dec", config.dims, z, tgt)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise TrainingFailureError(step, f"non-finite loss {loss_val}")
            kernel.backward(loss)
            grads, _ = kernel.clip_by_global_norm(store.gradients(), config.clip_norm)
            kernel.adam_step(store, adam, grads)
        except kernel.NonFiniteError as exc:
            raise TrainingFailureError(step, str(exc)) from exc
        history["loss"].append(loss_val)
        if track_best and ((step + 1) % config.eval_every == 0 or step + 1 == config.steps):
            acc = dev_accuracy()
            history["dev_accuracy"].append(acc)
            history["eval_steps"].append(step + 1)
            if acc > best["accuracy"]:
                best = {"accuracy": acc, "arrays": store.snapshot()}
            if config.stop_accuracy is not None and acc >= config.stop_accuracy:
                break
    if best["arrays"] is not None:
        store.load_arrays(best["arrays"])
        history["best_dev_accuracy"] = best["accuracy"]
    return model, history


def pivot_translate(tokens, mt_ef: MTModel) -> list[str]:
    """Greedy pivot translation of one sentence; the model is read-only.

    An empty translation raises a ``PipelineStageError`` naming the stage,
    since the rest of the pipeline cannot work with a vanished sentence.
    """
    with kernel.no_grad():
        z_src = encode(tokens, mt_ef)
        pivot, _ = decode_greedy(z_src, mt_ef)
    if not pivot:
        raise PipelineStageError("translate e->f", f"empty pivot translation for {list(tokens)!r}")
    return pivot


def backtranslate_encode(tokens, mt_ef: MTModel, mt_fe: MTModel) -> EncoderOutput:
    """z for a source sentence: translate e->f greedily, encode with f->e."""
    pivot = pivot_translate(tokens, mt_ef)
    with kernel.no_grad():
        return encode(pivot, mt_fe)


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses, references) -> float:
    """Corpus BLEU-4 with brevity penalty, in [0, 100].

    Precisions for n >= 2 get add-one smoothing. The unigram precision is
    exact unless no unigram matches at all, in which case it is floored at
    1e-9: a zero-overlap corpus scores positive but below 1.0 instead of an
    exact 0 that would hide the brevity penalty and higher-order terms.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference counts differ")
    if not hypotheses:
        raise ValueError("empty corpus")
    match = [0] * 5
    total = [0] * 5
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            hc = _ngram_counts(hyp, n)
            rc = _ngram_counts(ref, n)
            match[n] += sum(min(c, rc[g]) for g, c in hc.items())
            total[n] += max(len(hyp) - n + 1, 0)
    if total[1] == 0:
        return 0.0
    if match[1] > 0:
        p1 = match[1] / total[1]
    else:
        p1 = 1e-9
    log_sum = log(p1)
    for n in range(2, 5):
        log_sum += log((match[n] + 1.0) / (total[n] + 1.0))
    geo = exp(log_sum / 4.0)
    bp = 1.0 if hyp_len >= ref_len else exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * geo


def antidiagonal_attention_mass(attention_rows, source_len: int) -> float:
    """Mean attention mass within +-1 of the anti-diagonal alignment.

    For output step t of a reversal task, the aligned source position is
    source_len - 1 - t; returns the average mass on that position and its
    immediate neighbours across the given steps.
    """
    if not attention_rows:
        return 0.0
    masses = []
    for t, row in enumerate(attention_rows):
        pos = source_len - 1 - t
        lo, hi = max(0, pos - 1), min(source_len, pos + 2)
        if lo >= hi:
            masses.append(0.0)
        else:
            masses.append(float(np.asarray(row)[lo:hi].sum()))
    return float(np.mean(masses))
