"""Constructing self-supervised prompt pre-training data.

Shows the three builders (3-way next-sentence prediction, next-sentence
selection, pseudo-labeled sentiment) plus the unified multiple-choice
builder, the option-count configuration table, and the train/valid file
output.
"""

import collections
import tempfile
from pathlib import Path

from pptlab import (
    build_nsp3,
    build_nss,
    build_pseudo_ssc,
    build_unified_mc,
    lexicon_annotator,
    make_document,
    option_config_for,
    write_dataset,
)
from pptlab.synth import adjacency_corpus

corpus = adjacency_corpus(n_docs=16, n_sents=8, seed=0)
print(f"corpus: {len(corpus)} documents, e.g. {corpus[0].sentences[0]!r}")

print("\n--- 3-way next-sentence prediction (sentence pairs) ---")
examples = build_nsp3(corpus, n=30, seed=1)
counts = collections.Counter(ex.label for ex in examples)
print(f"label mixture over 30 examples: {dict(sorted(counts.items()))}")
ex = examples[0]
print(f"s1={ex.slots['s1']!r}\ns2={ex.slots['s2']!r}\nlabel={ex.label} -> target {ex.target_token!r}")

print("\n--- next-sentence selection (multiple choice) ---")
examples = build_nss(corpus, n=5, seed=2, num_options=6, max_query_len=389, max_option_len=86)
ex = examples[0]
print(f"query: {ex.slots['sq']!r}")
for i in range(1, 7):
    marker = "  <-- answer" if i == ex.label else ""
    print(f"  {chr(96 + i)}. {ex.slots[f's{i}']}{marker}")

print("\n--- option-count configuration table ---")
print("num  len(q)  len(op)  pos  neg-same  neg-diff")
for n in (2, 6, 10, 16):
    c = option_config_for(n)
    print(f"{n:3d}  {c.max_query_len:6d}  {c.max_option_len:7d}  {c.n_positive:3d}  {c.n_neg_same_doc:8d}  {c.n_neg_diff_doc:8d}")

print("\n--- unified multiple choice: option counts sampled 2..16 ---")
examples = build_unified_mc(corpus, n=60, seed=3)
hist = collections.Counter(ex.meta["num_options"] for ex in examples)
print(f"option-count histogram: {dict(sorted(hist.items()))}")

print("\n--- pseudo-labeled sentiment with confidence thresholds ---")
reviews = make_document(
    "reviews",
    "the film was terrible awful dreadful throughout . a good and pleasant evening at the pictures . "
    "great excellent wonderful amazing in every way . rather bad and boring for long stretches . "
    "seven plain words describe the movie here . loved it superb and amazing best picture .",
)
examples = build_pseudo_ssc([reviews], lexicon_annotator, n=6, seed=4)
for ex in examples:
    print(f"label {ex.label} ({ex.target_token:8s}) conf {ex.meta['confidence']:.2f}: {ex.slots['s'][:60]}")

with tempfile.TemporaryDirectory() as tmp:
    train_path, valid_path = write_dataset(build_nsp3(corpus, n=100, seed=5), tmp, "spc")
    n_train = len(Path(train_path).read_text().splitlines())
    n_valid = len(Path(valid_path).read_text().splitlines())
    print(f"\nwrote {train_path.name} ({n_train}) and {valid_path.name} ({n_valid}); 5% held out, meta-disjoint")
