"""
Back-translation style transfer, end to end
===========================================

Runs every pipeline stage: synthetic corpora, splits, lexicon, guidance +
held-out classifiers, both translation directions, classifier-guided
generators, transfer of the test split, and the evaluation reports. The
configuration below lands around 90% transfer accuracy and 80% content
retention in about a minute; ``bst --profile desk run`` is the stronger,
slower setting.
"""

import json
import tempfile
from pathlib import Path

from backstyle.config import PipelineConfig
from backstyle.corpus import SyntheticSpec
from backstyle.pipeline import load_transfer_outputs, run_all
from backstyle.seq2seq import ModelDims, MTModel, MTTrainConfig
from backstyle.styletransfer import (
    ClassifierConfig,
    StyleClassifier,
    StyleGenerator,
    TransferConfig,
    TransferPipeline,
    transfer,
)

dims = ModelDims(embed=24, hidden=40, attn=40, layers=2)
config = PipelineConfig(
    seed=4, profile="demo", dims=dims,
    classifier=ClassifierConfig(embed=24, filters=24, width=3, steps=400,
                                batch_size=32, eval_every=50),
    mt=MTTrainConfig(dims=dims, steps=1500, batch_size=48, eval_every=100),
    transfer=TransferConfig(dims=dims, steps=1200, batch_size=24, eval_every=150),
    synthetic=SyntheticSpec(content_vocab_size=60, markers_per_style=6,
                            template_count=150, template_len=(3, 7),
                            parallel_pairs=1500, styled_sentences=1200),
    lexicon_k=6, stopword_k=10, mt_heldout_pairs=100, annotation_samples=10)

root = Path(tempfile.mkdtemp(prefix="bst_demo_"))
print("running all stages into", root, "(about a minute)")
run_all(config, root)

report = json.loads((root / "reports" / "transfer_report.json").read_text())
print("\naggregate transfer accuracy: %.3f" % report["aggregate_accuracy"])
print("mean content retention:      %.3f" % report["content_retention"])
print("\n" + (root / "reports" / "transfer_report.txt").read_text())

rows = load_transfer_outputs(root / "reports" / "transfer_outputs.jsonl")
print("sample transfers (style markers flip, content stays):")
for row in rows[:5]:
    print(f"  {row['src']}")
    print(f"    -> [{row['target_style']}] {row['out']}")

# the same rewrite, driven directly through the loaded artifacts
mt_ef = MTModel.load(root / "artifacts" / "mt_ef.ckpt")
mt_fe = MTModel.load(root / "artifacts" / "mt_fe.ckpt")
classifier = StyleClassifier.load(root / "artifacts" / "classifier_heldout.ckpt")
generators = {}
for path in sorted((root / "artifacts").glob("generator_*.ckpt")):
    gen = StyleGenerator.load(path)
    generators[gen.style] = gen

pipe = TransferPipeline(mt_ef, mt_fe, generators)
src = rows[0]["src"].split()
source_style, target_style = sorted(generators)
out = transfer(src, source_style, target_style, pipe)
print("\ndirect call: ", " ".join(src))
print("   becomes:  ", " ".join(out))
print("   classified as:", classifier.predict(out))
