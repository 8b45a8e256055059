import numpy as np
import pytest

from pptlab.model import ModelConfig, init_model
from pptlab.synth import adjacency_corpus, adjacency_task, corpus_vocab


@pytest.fixture(scope="session")
def tiny_world():
    """Shared small setup: a fast backbone, a vocabulary, a pre-training
    corpus, and a downstream 4-option next-sentence task."""
    pretrain_corpus = adjacency_corpus(n_docs=12, n_sents=6, seed=0)
    downstream_corpus = adjacency_corpus(n_docs=10, n_sents=6, seed=100)
    vocab = corpus_vocab([pretrain_corpus, downstream_corpus])
    config = ModelConfig(
        d_model=16,
        n_layers_enc=1,
        n_layers_dec=1,
        n_heads=2,
        d_ff=32,
        max_len=256,
        vocab_size=len(vocab),
    )
    params = init_model(config, seed=1)
    task = adjacency_task(downstream_corpus, n_train=120, n_test=60, seed=7)
    return {
        "pretrain_corpus": pretrain_corpus,
        "downstream_corpus": downstream_corpus,
        "vocab": vocab,
        "config": config,
        "params": params,
        "task": task,
    }
