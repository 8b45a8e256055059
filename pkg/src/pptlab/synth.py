"""Synthetic corpora with plantable adjacency structure.

Every sentence names its document's topic, its own position marker, and
the marker of the sentence that follows it, so next-sentence relations are
recoverable from surface tokens: the true continuation shares the query's
topic and carries the step marker the query announces. Pre-training and
downstream corpora drawn from the same token space but different seeds
make transfer measurable at desk scale.
"""

from __future__ import annotations

import numpy as np

from .corpus import Document, build_nss
from .fewshot import TaskSource
from .model import FT, ModelParams, loss_and_grad
from .pvp import MCC, RESERVED_TOKENS, TaskInstance
from .tokenization import Vocabulary, build_vocab
from .training import Adam, TrainConfig, clip_global_norm, lm_adapt, render_pretrain_examples


def adjacency_corpus(
    n_docs: int,
    n_sents: int = 6,
    seed: int = 0,
    n_topics: int = 10,
    n_fill: int = 30,
) -> list[Document]:
    """Documents whose sentence j reads
    "topic<t> step<j> tells fill<a> fill<b>": the sentence after it shares
    the topic and carries the successor step marker, so adjacency is a
    conjunction of topic identity and step succession."""
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(n_docs):
        topic = f"topic{d % n_topics}"
        sentences = []
        for j in range(n_sents):
            a, b = rng.integers(n_fill, size=2)
            sentences.append(f"{topic} step{j} tells fill{a} fill{b}")
        docs.append(Document(f"doc{d}", tuple(sentences)))
    return docs


def adjacency_task(
    corpus: list[Document],
    n_train: int,
    n_test: int,
    seed: int,
    num_options: int = 4,
    name: str | None = None,
) -> TaskSource:
    """A labeled next-sentence-selection task built from a corpus: each
    instance is a query with options, the gold label is the 1-based
    position of the true continuation."""
    examples = build_nss(corpus, n_train + n_test, seed, num_options=num_options)
    instances = [TaskInstance(ex.slots, ex.label) for ex in examples]
    return TaskSource(
        name or f"next-sentence-{num_options}",
        MCC,
        tuple(instances[:n_train]),
        tuple(instances[n_train:]),
    )


def corpus_vocab(corpora: list[list[Document]], max_size: int = 512) -> Vocabulary:
    """One vocabulary covering all given corpora plus the reserved PVP
    surface tokens."""
    texts = [" . ".join(doc.sentences) for corpus in corpora for doc in corpus]
    return build_vocab(texts, max_size=max_size, reserved=RESERVED_TOKENS)


def warmup_backbone(
    params: ModelParams,
    corpus: list[Document],
    vocab: Vocabulary,
    *,
    lm_steps: int = 400,
    cloze_steps: int = 1200,
    num_options: int = 2,
    n_examples: int = 4000,
    lr: float = 3e-3,
    batch_size: int = 16,
    seed: int = 0,
) -> ModelParams:
    """Desk-scale stand-in for a pre-trained backbone: brief span-LM
    training over documents followed by next-sentence cloze training, both
    full-model and prompt-free, on a warmup corpus kept disjoint from
    prompt pre-training and downstream data. The result is frozen and
    shared by every tuning method; soft prompts can then only re-route the
    competence it already has."""
    lm_config = TrainConfig(mode="LM", batch_size=batch_size, lr=1e-3, seed=seed)
    params = lm_adapt(params, corpus, lm_steps, vocab, config=lm_config)
    if cloze_steps == 0:
        return params
    data = build_nss(corpus, n=n_examples, seed=seed + 1, num_options=num_options)
    triples = render_pretrain_examples(data, vocab)
    opt = Adam(params.weights)
    rng = np.random.default_rng(seed + 2)
    for _ in range(cloze_steps):
        idx = rng.choice(len(triples), size=batch_size, replace=False)
        batch = [triples[i] for i in idx]
        _, grads = loss_and_grad(params, None, batch, FT)
        clip_global_norm(grads.params)
        opt.step(params.weights, grads.params, lr)
    return params


def experiment_world(invocation: int = 0, *, model_seed: int = 3) -> dict:
    """The artifacts for one invocation of the desk-scale PPT-vs-PT
    experiment: a frozen warmed backbone, a shared vocabulary, binary
    next-sentence pre-training data, and a downstream task from a corpus
    the backbone and prompt never saw. The invocation index shifts every
    corpus seed so reruns are independent draws."""
    from .model import ModelConfig, init_model

    gen = dict(n_sents=6, n_topics=40, n_fill=60)
    warm = adjacency_corpus(300, seed=3000 + invocation, **gen)
    pre = adjacency_corpus(60, seed=1000 + invocation, **gen)
    down = adjacency_corpus(45, seed=2000 + invocation, **gen)
    vocab = corpus_vocab([warm, pre, down])
    config = ModelConfig(vocab_size=len(vocab))
    params = warmup_backbone(
        init_model(config, model_seed), warm, vocab, cloze_steps=1500, seed=5 + invocation
    )
    pretrain_data = build_nss(pre, n=2500, seed=11 + invocation, num_options=2)
    task = adjacency_task(down, n_train=250, n_test=200, seed=5, num_options=2)
    return {
        "vocab": vocab,
        "config": config,
        "params": params,
        "pretrain_data": pretrain_data,
        "task": task,
        "corpora": {"warmup": warm, "pretrain": pre, "downstream": down},
    }
