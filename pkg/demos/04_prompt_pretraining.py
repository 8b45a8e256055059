"""Prompt pre-training on a frozen backbone, start to finish.

Builds next-sentence-selection data from a synthetic corpus, pre-trains a
soft prompt under the inverse-square-root schedule, and shows that the
backbone never moved while validation loss fell. Runs in about a minute.
"""

import numpy as np

from pptlab import ModelConfig, TrainConfig, build_nss, init_model, pretrain_prompt
from pptlab.synth import adjacency_corpus, corpus_vocab, warmup_backbone

pretrain_corpus = adjacency_corpus(n_docs=30, n_sents=12, seed=100)
warm_corpus = adjacency_corpus(n_docs=60, n_sents=12, seed=200)
vocab = corpus_vocab([pretrain_corpus, warm_corpus])
config = ModelConfig(vocab_size=len(vocab))
print(f"backbone: d={config.d_model}, {config.n_layers_enc}+{config.n_layers_dec} layers, vocab {len(vocab)}")

print("warming the backbone (span LM + next-sentence cloze on a separate corpus)...")
params = warmup_backbone(init_model(config, seed=0), warm_corpus, vocab,
                         lm_steps=200, cloze_steps=400, seed=0)

data = build_nss(pretrain_corpus, n=800, seed=1, num_options=2)
print(f"pre-training data: {len(data)} binary next-sentence examples")

train_config = TrainConfig(
    mode="PT", batch_size=16, max_steps=300, eval_every=50,
    lr=0.1, scheduler="inverse_sqrt", seed=0,
)
backbone_before = params.digest()
history = []
prompt = pretrain_prompt(params, data, train_config, vocab, k=100, history=history)

print("\nstep   lr       validation loss")
for rec in history:
    if "valid_loss" in rec:
        chosen = "  <- checkpoint" if rec.get("checkpoint_id") else ""
        print(f"{rec['step']:4d}   {rec['lr']:.4f}   {rec['valid_loss']:.4f}{chosen}")

print(f"\nbackbone untouched: {params.digest() == backbone_before}")
print(f"returned prompt: {prompt.k} x {prompt.d} "
      f"({prompt.k * prompt.d:,} tunable parameters, |values| < {np.abs(prompt.matrix).max():.2f})")
