"""End-to-end pipeline stages over an on-disk run directory.

Each stage reads its inputs from the run directory, writes artifacts, and
records a RunManifest under ``manifests/``. Stages are plain functions so
the command-line driver and the test suite share one implementation. All
artifacts are deterministic functions of (config, seed): no stage writes
wall-clock values, absolute paths, or unordered collections, so two runs
with the same resolved config produce byte-identical files.

Stage order: synth-data, prepare, lexicon, train-classifier, train-mt,
train-style, transfer, evaluate. ``run_all`` chains them.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import HELDOUT_SEED_OFFSET, PipelineConfig, RunManifest, config_hash, content_hash
from .corpus import ParallelCorpus, StyledCorpus, gen_synthetic, make_splits
from .evalharness import (
    FLUENCY,
    MEANING,
    corpus_stopwords,
    make_tasks,
    mean_content_retention,
    render_transfer_report,
    save_tasks,
    transfer_accuracy,
)
from .lexicon import StyleLexicon, extract_lexicon
from .seq2seq import MTModel, PipelineStageError, corpus_bleu, encode, greedy_decode_ids, token_accuracy, train_mt
from .styletransfer import (
    CachedZProvider,
    StyleClassifier,
    StyleGenerator,
    TransferPipeline,
    train_classifier,
    train_style_generators,
    transfer,
)

__all__ = [
    "STAGES",
    "RunPaths",
    "stage_synth_data",
    "stage_prepare",
    "stage_lexicon",
    "stage_train_classifier",
    "stage_train_mt",
    "stage_train_style",
    "stage_transfer",
    "stage_evaluate",
    "run_all",
    "load_transfer_outputs",
]


class RunPaths:
    """File layout of one run directory."""

    def __init__(self, root, config: PipelineConfig):
        self.root = Path(root)
        self.data_dir = self.root / config.data_dir
        self.artifact_dir = self.root / config.artifact_dir
        self.report_dir = self.root / config.report_dir
        self.manifest_dir = self.root / "manifests"

    def ensure(self) -> None:
        for d in (self.data_dir, self.artifact_dir, self.report_dir, self.manifest_dir):
            d.mkdir(parents=True, exist_ok=True)

    def data(self, name: str) -> Path:
        return self.data_dir / name

    def artifact(self, name: str) -> Path:
        return self.artifact_dir / name

    def report(self, name: str) -> Path:
        return self.report_dir / name

    def manifest(self, stage: str) -> Path:
        return self.manifest_dir / f"{stage}.json"

    def rel(self, path: Path) -> str:
        # paths outside the run root (explicit --out targets) stay absolute
        try:
            return str(Path(path).relative_to(self.root))
        except ValueError:
            return str(Path(path))


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(paths: RunPaths, stage: str, *files: Path) -> None:
    missing = [p for p in files if not p.exists()]
    if missing:
        names = ", ".join(paths.rel(p) for p in missing)
        raise PipelineStageError(stage, f"missing inputs: {names}; run earlier stages first")


def _finish(paths: RunPaths, stage: str, config: PipelineConfig,
            inputs: dict[str, Path], artifacts: dict[str, Path]) -> RunManifest:
    manifest = RunManifest(
        stage=stage,
        config_hash=config_hash(config),
        seed=config.seed,
        inputs={name: content_hash(p) for name, p in sorted(inputs.items())},
        artifacts={name: paths.rel(p) for name, p in sorted(artifacts.items())},
    )
    manifest.save(paths.manifest(stage))
    return manifest


def stage_synth_data(config: PipelineConfig, root) -> RunManifest:
    """Generate the parallel pivot corpus and the styled corpus."""
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    parallel, styled = gen_synthetic(config.synthetic, config.seed)
    parallel.save_jsonl(paths.data("parallel.jsonl"))
    styled.save_jsonl(paths.data("styled.jsonl"))
    return _finish(paths, "synth-data", config, {}, {
        "parallel": paths.data("parallel.jsonl"),
        "styled": paths.data("styled.jsonl"),
    })


def stage_prepare(config: PipelineConfig, root) -> RunManifest:
    """Split the styled corpus into class/train/dev/test."""
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    _require(paths, "prepare", paths.data("styled.jsonl"))
    styled = StyledCorpus.load_jsonl(paths.data("styled.jsonl"))
    splits = make_splits(styled, config.split)
    artifacts = {}
    for name, part in splits.as_dict().items():
        out = paths.data(f"{name}.jsonl")
        part.save_jsonl(out)
        artifacts[name] = out
    return _finish(paths, "prepare", config,
                   {"styled": paths.data("styled.jsonl")}, artifacts)


def stage_lexicon(config: PipelineConfig, root) -> RunManifest:
    """Extract the style lexicon from the classifier split."""
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    _require(paths, "lexicon", paths.data("class.jsonl"))
    part = StyledCorpus.load_jsonl(paths.data("class.jsonl"))
    styles = part.style_set()
    if len(styles) != 2:
        raise PipelineStageError("lexicon", f"need exactly two styles, got {styles}")
    lex = extract_lexicon(part.by_style(styles[0]), part.by_style(styles[1]),
                          k=config.lexicon_k)
    lex.save_jsonl(paths.artifact("lexicon.jsonl"))
    return _finish(paths, "lexicon", config,
                   {"class": paths.data("class.jsonl")},
                   {"lexicon": paths.artifact("lexicon.jsonl")})


def stage_train_classifier(config: PipelineConfig, root) -> RunManifest:
    """Train the guidance classifier and the held-out evaluation classifier."""
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    _require(paths, "train-classifier", paths.data("class.jsonl"),
             paths.artifact("lexicon.jsonl"))
    part = StyledCorpus.load_jsonl(paths.data("class.jsonl"))
    lex = StyleLexicon.load_jsonl(paths.artifact("lexicon.jsonl"))

    guidance, hist = train_classifier(part, lex, config.classifier)
    guidance.save(paths.artifact("classifier.ckpt"))
    heldout_cfg = replace(config.classifier, seed=config.seed + HELDOUT_SEED_OFFSET)
    heldout, hist_h = train_classifier(part, lex, heldout_cfg)
    heldout.save(paths.artifact("classifier_heldout.ckpt"))

    report = {
        "guidance_best_dev_accuracy": hist["best_dev_accuracy"],
        "heldout_best_dev_accuracy": hist_h["best_dev_accuracy"],
        "heldout_split_accuracy": {},
    }
    for split_name in ("dev", "test"):
        split_path = paths.data(f"{split_name}.jsonl")
        if split_path.exists():
            split = StyledCorpus.load_jsonl(split_path)
            hits = sum(heldout.predict(s) == y
                       for s, y in zip(split.sentences, split.styles))
            report["heldout_split_accuracy"][split_name] = hits / len(split)
    _write_json(paths.report("classifier_report.json"), report)
    return _finish(paths, "train-classifier", config,
                   {"class": paths.data("class.jsonl"),
                    "lexicon": paths.artifact("lexicon.jsonl")},
                   {"classifier": paths.artifact("classifier.ckpt"),
                    "classifier_heldout": paths.artifact("classifier_heldout.ckpt"),
                    "classifier_report": paths.report("classifier_report.json")})


def _mt_quality(model: MTModel, pairs) -> dict:
    """Greedy-decode held-out pairs: exact token accuracy and corpus BLEU."""
    hyp, ref = [], []
    correct = total = 0
    for src, tgt in pairs:
        z = encode(src, model)
        c, t = token_accuracy(model.store, "dec", model.dims, z,
                              np.array([model.tgt_vocab.encode(tgt)]))
        correct += c
        total += t
        ids, _ = greedy_decode_ids(model.store, "dec", model.dims, z,
                                   model.dims.max_len)[0]
        hyp.append(model.tgt_vocab.decode(ids))
        ref.append(tgt)
    return {"token_accuracy": correct / total, "bleu": corpus_bleu(hyp, ref),
            "pairs": len(pairs)}


def stage_train_mt(config: PipelineConfig, root) -> RunManifest:
    """Train both translation directions; score them on held-out pairs."""
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    _require(paths, "train-mt", paths.data("parallel.jsonl"))
    parallel = ParallelCorpus.load_jsonl(paths.data("parallel.jsonl"))
    n_test = config.mt_heldout_pairs
    if n_test >= len(parallel):
        raise PipelineStageError(
            "train-mt", f"mt_heldout_pairs={n_test} >= corpus size {len(parallel)}")
    heldout = ParallelCorpus(parallel.pairs[len(parallel) - n_test:])
    train_part = ParallelCorpus(parallel.pairs[:len(parallel) - n_test])
    heldout.save_jsonl(paths.data("mt_heldout.jsonl"))

    report = {}
    artifacts = {"mt_heldout": paths.data("mt_heldout.jsonl")}
    for tag, corp, name in (("e->f", train_part, "mt_ef"),
                            ("f->e", train_part.reversed(), "mt_fe")):
        model, hist = train_mt(corp, config.mt, tag)
        model.save(paths.artifact(f"{name}.ckpt"))
        artifacts[name] = paths.artifact(f"{name}.ckpt")
        eval_pairs = heldout.pairs if tag == "e->f" else heldout.reversed().pairs
        report[tag] = {
            **_mt_quality(model, eval_pairs),
            "best_dev_accuracy": hist["best_dev_accuracy"],
            "steps_run": len(hist["loss"]),
        }
    _write_json(paths.report("mt_report.json"), report)
    artifacts["mt_report"] = paths.report("mt_report.json")
    return _finish(paths, "train-mt", config,
                   {"parallel": paths.data("parallel.jsonl")}, artifacts)


def stage_train_style(config: PipelineConfig, root) -> RunManifest:
    """Train one generator per style against the frozen guidance classifier.

    After training, the in-memory classifier is re-serialized next to the
    original checkpoint; the two files being byte-identical is on-disk
    evidence that generator training never touched the classifier weights.
    """
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    _require(paths, "train-style", paths.data("train.jsonl"),
             paths.artifact("classifier.ckpt"), paths.artifact("mt_ef.ckpt"),
             paths.artifact("mt_fe.ckpt"))
    train_part = StyledCorpus.load_jsonl(paths.data("train.jsonl"))
    classifier = StyleClassifier.load(paths.artifact("classifier.ckpt"))
    mt_ef = MTModel.load(paths.artifact("mt_ef.ckpt"))
    mt_fe = MTModel.load(paths.artifact("mt_fe.ckpt"))

    provider = CachedZProvider(mt_ef, mt_fe)
    gen_a, gen_b, stats = train_style_generators(train_part, provider, classifier,
                                                 config.transfer)
    artifacts = {}
    for gen in (gen_a, gen_b):
        out = paths.artifact(f"generator_{gen.style}.ckpt")
        gen.save(out)
        artifacts[f"generator_{gen.style}"] = out
    stats.save_jsonl(paths.artifact("style_stats.jsonl"))
    artifacts["style_stats"] = paths.artifact("style_stats.jsonl")
    classifier.save(paths.artifact("classifier_post_style.ckpt"))
    artifacts["classifier_post_style"] = paths.artifact("classifier_post_style.ckpt")

    _write_json(paths.report("style_report.json"), {
        "best_dev_reconstruction": stats.best_dev_accuracy,
        "steps_per_style": {s: len(stats.for_style(s)) for s in stats.best_dev_accuracy},
        "classifier_unchanged": (paths.artifact("classifier.ckpt").read_bytes()
                                 == paths.artifact("classifier_post_style.ckpt").read_bytes()),
    })
    artifacts["style_report"] = paths.report("style_report.json")
    return _finish(paths, "train-style", config,
                   {"train": paths.data("train.jsonl"),
                    "classifier": paths.artifact("classifier.ckpt"),
                    "mt_ef": paths.artifact("mt_ef.ckpt"),
                    "mt_fe": paths.artifact("mt_fe.ckpt")},
                   artifacts)


def _load_pipeline(paths: RunPaths, stage: str) -> TransferPipeline:
    _require(paths, stage, paths.artifact("mt_ef.ckpt"), paths.artifact("mt_fe.ckpt"))
    mt_ef = MTModel.load(paths.artifact("mt_ef.ckpt"))
    mt_fe = MTModel.load(paths.artifact("mt_fe.ckpt"))
    generators = {}
    for ckpt in sorted(paths.artifact_dir.glob("generator_*.ckpt")):
        gen = StyleGenerator.load(ckpt)
        generators[gen.style] = gen
    if len(generators) != 2:
        raise PipelineStageError(stage, f"expected two generator checkpoints, "
                                        f"found {sorted(generators)}")
    return TransferPipeline(mt_ef=mt_ef, mt_fe=mt_fe, generators=generators)


def stage_transfer(config: PipelineConfig, root, in_path=None, target: str | None = None,
                   out_path=None) -> RunManifest:
    """Transfer sentences to the opposite (or a requested) style.

    Without arguments, every test-split sentence is transferred to the
    other style and written to ``reports/transfer_outputs.jsonl`` as rows
    of {"src", "out", "target_style"}. With ``in_path``/``target``, that
    corpus is transferred to the one requested style instead.
    """
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    pipe = _load_pipeline(paths, "transfer")
    styles = sorted(pipe.generators)
    other = {styles[0]: styles[1], styles[1]: styles[0]}

    if in_path is None:
        _require(paths, "transfer", paths.data("test.jsonl"))
        in_path = paths.data("test.jsonl")
        corpus = StyledCorpus.load_jsonl(in_path)
        jobs = [(toks, style, other[style])
                for toks, style in zip(corpus.sentences, corpus.styles)]
    else:
        in_path = Path(in_path)
        _require(paths, "transfer", in_path)
        if target not in other:
            raise PipelineStageError("transfer",
                                     f"target style {target!r} not in {styles}")
        corpus = StyledCorpus.load_jsonl(in_path)
        jobs = [(toks, style, target)
                for toks, style in zip(corpus.sentences, corpus.styles)]

    out_path = Path(out_path) if out_path else paths.report("transfer_outputs.jsonl")
    with open(out_path, "w", encoding="utf-8") as fh:
        for toks, style, tgt in jobs:
            out = transfer(toks, style, tgt, pipe)
            fh.write(json.dumps({"src": " ".join(toks), "out": " ".join(out),
                                 "target_style": tgt}) + "\n")
    return _finish(paths, "transfer", config,
                   {"input": in_path, "mt_ef": paths.artifact("mt_ef.ckpt"),
                    "mt_fe": paths.artifact("mt_fe.ckpt")},
                   {"transfer_outputs": out_path})


def load_transfer_outputs(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            missing = {"src", "out", "target_style"} - set(row)
            if missing:
                raise ValueError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            rows.append(row)
    return rows


def stage_evaluate(config: PipelineConfig, root) -> RunManifest:
    """Score transfer outputs and emit reports plus annotation tasks.

    Transfer accuracy uses the held-out classifier; content retention uses
    the lexicon plus the corpus stopword list. Annotation tasks compare the
    "reconstruction" system (decode back to the source style) against the
    "transfer" system on a seeded sample of test sentences, as meaning A/B
    pairs and per-sentence fluency items.
    """
    config = config.resolve()
    paths = RunPaths(root, config)
    paths.ensure()
    _require(paths, "evaluate", paths.report("transfer_outputs.jsonl"),
             paths.artifact("classifier_heldout.ckpt"),
             paths.artifact("lexicon.jsonl"), paths.data("train.jsonl"))
    rows = load_transfer_outputs(paths.report("transfer_outputs.jsonl"))
    if not rows:
        raise PipelineStageError("evaluate", "transfer_outputs.jsonl is empty")
    heldout = StyleClassifier.load(paths.artifact("classifier_heldout.ckpt"))
    lex = StyleLexicon.load_jsonl(paths.artifact("lexicon.jsonl"))
    train_part = StyledCorpus.load_jsonl(paths.data("train.jsonl"))
    stopwords = corpus_stopwords(train_part.sentences, k=config.stopword_k)

    sources = [r["src"].split() for r in rows]
    outputs = [r["out"].split() for r in rows]
    targets = [r["target_style"] for r in rows]
    report = transfer_accuracy(outputs, targets, heldout)
    report = report.with_retention(
        mean_content_retention(sources, outputs, lex, stopwords))
    with open(paths.report("transfer_report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    with open(paths.report("transfer_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_transfer_report(report) + "\n")

    pipe = _load_pipeline(paths, "evaluate")
    other = {report.styles[0]: report.styles[1], report.styles[1]: report.styles[0]}
    rng = np.random.default_rng([config.seed, 2])
    n_sample = min(config.annotation_samples, len(rows))
    picked = sorted(rng.choice(len(rows), size=n_sample, replace=False).tolist())
    sample_sources = [sources[i] for i in picked]
    sample_transfer = [outputs[i] for i in picked]
    # the reconstruction candidate decodes back to the source's own style
    sample_recon = [transfer(sources[i], other[targets[i]], other[targets[i]], pipe)
                    for i in picked]
    tasks = make_tasks(sample_sources, sample_recon, sample_transfer, MEANING,
                       seed=config.seed, system_a="reconstruction", system_b="transfer")
    tasks += make_tasks(sample_sources, sample_recon, sample_transfer, FLUENCY,
                        seed=config.seed, system_a="reconstruction", system_b="transfer")
    save_tasks(paths.report("tasks.json"), tasks)

    return _finish(paths, "evaluate", config,
                   {"transfer_outputs": paths.report("transfer_outputs.jsonl"),
                    "classifier_heldout": paths.artifact("classifier_heldout.ckpt"),
                    "lexicon": paths.artifact("lexicon.jsonl"),
                    "train": paths.data("train.jsonl")},
                   {"transfer_report_json": paths.report("transfer_report.json"),
                    "transfer_report_txt": paths.report("transfer_report.txt"),
                    "tasks": paths.report("tasks.json")})


STAGES = {
    "synth-data": stage_synth_data,
    "prepare": stage_prepare,
    "lexicon": stage_lexicon,
    "train-classifier": stage_train_classifier,
    "train-mt": stage_train_mt,
    "train-style": stage_train_style,
    "transfer": stage_transfer,
    "evaluate": stage_evaluate,
}


def run_all(config: PipelineConfig, root) -> dict[str, RunManifest]:
    """Run every stage in order; returns the manifests keyed by stage."""
    manifests = {}
    for name, fn in STAGES.items():
        manifests[name] = fn(config, root)
    return manifests
