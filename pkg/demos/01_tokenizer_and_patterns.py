"""Tokenization and pattern-verbalizer pairs, end to end.

Builds a small vocabulary, renders the built-in patterns for all three
task formats (and their hard-prompt variants), and reads a label off a
mask distribution with a verbalizer.
"""

import numpy as np

from pptlab import (
    RESERVED_TOKENS,
    TaskInstance,
    attach_hard_prompt,
    build_vocab,
    builtin_hard_prompt,
    decode,
    encode,
    make_builtin_pvp,
    render,
    score_labels,
)

corpus = [
    "the cat sat on the mat . it purred all night",
    "a fine movie for a quiet evening",
    "which sentence comes next ? candidate one . candidate two",
]
vocab = build_vocab(corpus, max_size=256, reserved=RESERVED_TOKENS)
print(f"vocabulary: {len(vocab)} tokens; specials at ids 0..3 -> {vocab.tokens[:4]}")

ids = encode(vocab, "It was <X>.")
print(f"\nencode('It was <X>.') -> {ids} -> '{decode(vocab, ids)}'")

print("\n--- sentence-pair classification ---")
template, verbalizer = make_builtin_pvp("SPC", n_labels=3)
instance = TaskInstance({"s1": "the cat sat on the mat", "s2": "it purred all night"})
ids, mask_pos = render(template, instance, vocab)
print(f"pattern:    {decode(vocab, ids)}")
print(f"mask index: {mask_pos}; verbalizer: {dict(zip(verbalizer.labels, verbalizer.tokens))}")

hybrid = attach_hard_prompt(template, builtin_hard_prompt("SPC"))
ids, _ = render(hybrid, instance, vocab)
print(f"hybrid:     {decode(vocab, ids)}")

print("\n--- single-sentence classification ---")
template, verbalizer = make_builtin_pvp("SSC", n_labels=2)
instance = TaskInstance({"s": "a fine movie for a quiet evening"})
ids, _ = render(template, instance, vocab)
print(f"pattern:    {decode(vocab, ids)}")
print(f"2-label endpoint subset: {verbalizer.tokens}")
ids, _ = render(attach_hard_prompt(template, builtin_hard_prompt("SSC")), instance, vocab)
print(f"hybrid:     {decode(vocab, ids)}")

print("\n--- multiple choice ---")
template, verbalizer = make_builtin_pvp("MCC", n_options=2)
instance = TaskInstance({"sq": "which sentence comes next", "s1": "candidate one", "s2": "candidate two"})
ids, _ = render(template, instance, vocab)
print(f"pattern:    {decode(vocab, ids)}")

print("\n--- reading labels off a mask distribution ---")
_, verbalizer = make_builtin_pvp("SPC", n_labels=2)
dist = np.zeros(len(vocab))
dist[vocab.id_of("no")] = 0.2
dist[vocab.id_of("yes")] = 0.6
dist[vocab.id_of("cat")] = 0.2
scores = score_labels(dist, verbalizer, vocab)
print(f"restricted softmax over {verbalizer.tokens}: {scores}  (renormalized from 0.2/0.6)")
