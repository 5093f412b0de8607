"""
CNN style classifier with lexicon indicator features
====================================================

Trains the convolutional classifier used both to guide generator training
(through its gradients) and, retrained with a different seed, to score
transfer accuracy. Inputs are word embeddings concatenated with two
lexicon-membership indicator columns.
"""

from backstyle.corpus import SplitSpec, SyntheticSpec, gen_synthetic, make_splits
from backstyle.lexicon import extract_lexicon
from backstyle.styletransfer import ClassifierConfig, train_classifier

spec = SyntheticSpec(content_vocab_size=40, markers_per_style=4,
                     styled_sentences=600)
_, styled = gen_synthetic(spec, seed=3)
splits = make_splits(styled, SplitSpec(seed=3))

by_style = {s: [] for s in splits.classifier.style_set()}
for sent, style in zip(splits.classifier.sentences, splits.classifier.styles):
    by_style[style].append(sent)
s1, s2 = sorted(by_style)
lexicon = extract_lexicon(by_style[s1], by_style[s2], k=4)

config = ClassifierConfig(embed=12, filters=12, width=3, steps=120,
                          batch_size=32, eval_every=40, seed=3)
clf, history = train_classifier(splits.classifier, lexicon, config)
print("best dev accuracy during training:", history["best_dev_accuracy"])

hits = sum(clf.predict(s) == y
           for s, y in zip(splits.test.sentences, splits.test.styles))
print(f"test accuracy: {hits}/{len(splits.test)} = {hits / len(splits.test):.3f}")

for sent, style in list(zip(splits.test.sentences, splits.test.styles))[:4]:
    probs = clf.classify(sent)
    print(f"  gold={style} predicted={clf.predict(sent)} "
          f"p({clf.styles[0]})={probs[0]:.3f}  {' '.join(sent)}")
