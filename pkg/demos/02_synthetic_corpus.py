"""
Synthetic pivot-translation and style corpora
=============================================

The synthetic task pairs every sentence with its pivot translation (a
token bijection plus word-order reversal) and stamps styled sentences
with style-specific marker tokens, so every later stage has a ground
truth to be measured against.
"""

from backstyle.corpus import SyntheticSpec, gen_synthetic, make_splits, SplitSpec

spec = SyntheticSpec(content_vocab_size=40, markers_per_style=4,
                     template_count=60, template_len=(3, 6),
                     parallel_pairs=12, styled_sentences=400)
parallel, styled = gen_synthetic(spec, seed=7)

print("pivot pairs (bijection + reversal):")
for src, tgt in parallel.pairs[:4]:
    print("  e:", " ".join(src))
    print("  f:", " ".join(tgt))

print("\nstyled sentences (marker tokens carry the style):")
for sent, style in list(zip(styled.sentences, styled.styles))[:6]:
    print(f"  [{style}] {' '.join(sent)}")

splits = make_splits(styled, SplitSpec(seed=7))
for name, part in splits.as_dict().items():
    print(f"{name:>6}: {len(part)} sentences")
