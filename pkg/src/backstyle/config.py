"""Pipeline configuration profiles and reproducibility manifests.

A PipelineConfig gathers every knob of the end-to-end run: corpus
generation, splits, lexicon size, classifier and generator training, MT
training, and report/annotation parameters. The default construction is
the full-scale configuration (300-dim embeddings, 500-dim hidden/attention
layers, two LSTM layers, 100 classifier filters of width 5 over a 302-dim
input, lambda_c 15, temperature annealed from 1.0 to 1e-3). ``desk()`` and
``micro()`` are shrunken profiles for single-core synthetic runs; they only
reduce dimensions, corpus sizes, and step counts.

A RunManifest records what a stage consumed and produced: the hash of the
resolved config, the seed, content hashes of the input files, and paths of
the artifacts, which is sufficient to reproduce a run bit-exactly on one
platform. Configs serialize to a single declarative JSON document.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import SplitSpec, SyntheticSpec
from .seq2seq import ModelDims, MTTrainConfig
from .styletransfer import ClassifierConfig, TransferConfig

__all__ = [
    "HELDOUT_SEED_OFFSET",
    "PipelineConfig",
    "RunManifest",
    "config_hash",
    "content_hash",
]

# the held-out evaluation classifier trains on the same class split as the
# guidance classifier but from a different seed, so scoring never reuses
# the exact weights that steered generation
HELDOUT_SEED_OFFSET = 1000


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the end-to-end pipeline, with full-scale defaults."""

    seed: int = 0
    profile: str = "full"
    dims: ModelDims = field(default_factory=ModelDims)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    mt: MTTrainConfig = field(default_factory=MTTrainConfig)
    transfer: TransferConfig = field(default_factory=TransferConfig)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    split: SplitSpec = field(default_factory=SplitSpec)
    lexicon_k: int = 8
    stopword_k: int = 50
    mt_heldout_pairs: int = 200
    annotation_samples: int = 20
    data_dir: str = "data"
    artifact_dir: str = "artifacts"
    report_dir: str = "reports"

    @property
    def classifier_input_width(self) -> int:
        """Embedding plus the two style-indicator channels."""
        return self.classifier.embed + 2

    @classmethod
    def desk(cls, seed: int = 0) -> "PipelineConfig":
        """Synthetic-task profile: minutes on one core, same architecture."""
        return cls(
            seed=seed,
            profile="desk",
            dims=ModelDims.desk(),
            classifier=ClassifierConfig.desk(),
            mt=MTTrainConfig(dims=ModelDims.desk(), steps=4000, batch_size=64,
                             eval_every=200),
            transfer=TransferConfig(dims=ModelDims.desk(), steps=1500,
                                    batch_size=32, eval_every=150),
            synthetic=SyntheticSpec(),
        )

    @classmethod
    def micro(cls, seed: int = 0) -> "PipelineConfig":
        """Smoke-test profile: seconds per stage, for determinism checks."""
        dims = ModelDims(embed=8, hidden=12, attn=12, layers=2)
        return cls(
            seed=seed,
            profile="micro",
            dims=dims,
            classifier=ClassifierConfig(embed=8, filters=8, width=3, steps=80,
                                        batch_size=32, eval_every=40),
            mt=MTTrainConfig(dims=dims, steps=400, batch_size=32, eval_every=50),
            transfer=TransferConfig(dims=dims, steps=60, batch_size=16,
                                    eval_every=30),
            synthetic=SyntheticSpec(content_vocab_size=30, markers_per_style=4,
                                    template_count=40, template_len=(3, 6),
                                    parallel_pairs=300, styled_sentences=300),
            lexicon_k=4,
            stopword_k=5,  # must stay well under the 38-token micro vocabulary
            mt_heldout_pairs=30,
            annotation_samples=5,
        )

    def resolve(self) -> "PipelineConfig":
        """Push the top-level seed and dims into every stage config."""
        return replace(
            self,
            split=replace(self.split, seed=self.seed),
            classifier=replace(self.classifier, seed=self.seed),
            mt=replace(self.mt, dims=self.dims, seed=self.seed),
            transfer=replace(self.transfer, dims=self.dims, seed=self.seed),
        )

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "profile": self.profile,
            "dims": self.dims.as_dict(),
            "classifier": _plain(self.classifier),
            "mt": {**_plain(self.mt), "dims": self.mt.dims.as_dict()},
            "transfer": {**_plain(self.transfer), "dims": self.transfer.dims.as_dict()},
            "synthetic": _plain(self.synthetic),
            "split": _plain(self.split),
            "lexicon_k": self.lexicon_k,
            "stopword_k": self.stopword_k,
            "mt_heldout_pairs": self.mt_heldout_pairs,
            "annotation_samples": self.annotation_samples,
            "data_dir": self.data_dir,
            "artifact_dir": self.artifact_dir,
            "report_dir": self.report_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        def tupled(raw: dict, *names) -> dict:
            out = dict(raw)
            for n in names:
                if n in out:
                    out[n] = tuple(out[n])
            return out

        kwargs = dict(d)
        kwargs["dims"] = ModelDims.from_dict(d["dims"])
        kwargs["classifier"] = ClassifierConfig(**d["classifier"])
        mt = dict(d["mt"])
        mt["dims"] = ModelDims.from_dict(mt["dims"])
        kwargs["mt"] = MTTrainConfig(**mt)
        tr = dict(d["transfer"])
        tr["dims"] = ModelDims.from_dict(tr["dims"])
        kwargs["transfer"] = TransferConfig(**tr)
        kwargs["synthetic"] = SyntheticSpec(
            **tupled(d["synthetic"], "template_len", "marker_count", "style_names"))
        kwargs["split"] = SplitSpec(**tupled(d["split"], "ratios"))
        return cls(**kwargs)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _plain(dc) -> dict:
    """Shallow dataclass -> dict without recursing into nested dataclasses."""
    out = {}
    for name in dc.__dataclass_fields__:
        value = getattr(dc, name)
        if isinstance(value, ModelDims):
            continue
        out[name] = list(value) if isinstance(value, tuple) else value
    return out


def config_hash(config: PipelineConfig) -> str:
    blob = json.dumps(config.as_dict(), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()


def content_hash(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """What one stage read and wrote, hashed for reproducibility checks."""

    stage: str
    config_hash: str
    seed: int
    inputs: dict
    artifacts: dict

    def as_dict(self) -> dict:
        return {"stage": self.stage, "config_hash": self.config_hash,
                "seed": self.seed, "inputs": dict(self.inputs),
                "artifacts": dict(self.artifacts)}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(stage=d["stage"], config_hash=d["config_hash"], seed=d["seed"],
                   inputs=d["inputs"], artifacts=d["artifacts"])
