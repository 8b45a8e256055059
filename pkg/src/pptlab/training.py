"""Optimization loops: prompt pre-training, downstream prompt tuning and
full-model tuning with learning-rate grid search, and LM adaption.

All loops use adaptive moment estimation (decoupled weight decay of zero)
with gradient clipping at global norm 1.0, and are deterministic per seed.
Prompt training never writes to the backbone; tests pin this by hashing
the weights around whole loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import (
    FT,
    LM,
    PT,
    ModelParams,
    SoftPrompt,
    forward_batch_distribution,
    init_soft_prompt,
    loss_and_grad,
    span_corrupt,
)
from .pvp import (
    SPC,
    SSC,
    PatternTemplate,
    TaskInstance,
    Verbalizer,
    make_builtin_pvp,
    render,
    score_labels,
)
from .tokenization import UNK_ID, Vocabulary, encode

# Downstream prompt-tuning learning-rate search grid.
PT_LR_GRID = (5e-3, 1e-2, 2e-2, 5e-2)

# Full-model tuning grids by model size tag.
FT_LR_GRIDS = {
    "small": (2e-4, 5e-4, 1e-3),
    "base": (2e-4, 5e-4, 1e-3),
    "large": (5e-5, 1e-4, 2e-4),
    "xl": (3e-5, 5e-5, 1e-4),
    "xxl": (3e-6, 5e-6, 1e-5),
}

SCHEDULERS = ("constant", "inverse_sqrt")
SELECTION_METRICS = ("dev_accuracy", "valid_loss")

GRAD_CLIP_NORM = 1.0


@dataclass(frozen=True)
class TrainConfig:
    mode: str = PT
    batch_size: int = 16
    max_epochs: int | None = 50
    max_steps: int | None = None
    eval_every: int = 6
    lr: float | None = None
    lr_grid: tuple[float, ...] | None = None
    scheduler: str = "constant"
    seed: int = 0
    selection: str = "dev_accuracy"

    def __post_init__(self) -> None:
        if (self.lr is None) == (self.lr_grid is None):
            raise ValueError("exactly one of lr / lr_grid must be set")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.selection not in SELECTION_METRICS:
            raise ValueError(f"unknown selection metric {self.selection!r}")
        if self.max_epochs is None and self.max_steps is None:
            raise ValueError("one of max_epochs / max_steps must be set")


@dataclass
class Checkpoint:
    step: int
    metric: float
    lr: float
    prompt: SoftPrompt | None = None
    params: ModelParams | None = None


def lr_schedule(scheduler: str, base_lr: float, step: int) -> float:
    """constant -> base_lr; inverse_sqrt -> base_lr / sqrt(step), step >= 1."""
    if step < 1:
        raise ValueError("step must be >= 1")
    if scheduler == "constant":
        return base_lr
    if scheduler == "inverse_sqrt":
        return base_lr / math.sqrt(step)
    raise ValueError(f"unknown scheduler {scheduler!r}")


class Adam:
    """Adaptive moment estimation over a dict of arrays, weight decay 0."""

    def __init__(self, arrays: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * np.square(g)
            arrays[k] -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float = GRAD_CLIP_NORM) -> float:
    total = math.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values()))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches, reshuffled each epoch."""
    while True:
        order = rng.permutation(n)
        for i in range(0, n, batch_size):
            yield order[i : i + batch_size]


# ---------------------------------------------------------------------------
# rendering task data into model inputs
# ---------------------------------------------------------------------------


def _template_for_task(task: str, slots: dict) -> tuple[PatternTemplate, Verbalizer]:
    if task == SPC:
        return make_builtin_pvp(SPC, n_labels=3)
    if task == SSC:
        return make_builtin_pvp(SSC, n_labels=5)
    n_options = len([k for k in slots if k != "sq"])
    return make_builtin_pvp(task, n_options=n_options)


def render_pretrain_examples(examples, vocab: Vocabulary) -> list[tuple[list[int], int, int]]:
    """Render pre-training examples to (input ids, mask position, target id)."""
    cache: dict = {}
    out = []
    for ex in examples:
        key = (ex.task, len(ex.slots))
        if key not in cache:
            cache[key] = _template_for_task(ex.task, ex.slots)
        template, _ = cache[key]
        ids, pos = render(template, TaskInstance(ex.slots), vocab)
        target = vocab.id_of(ex.target_token)
        if target == UNK_ID:
            raise ValueError(f"verbalizer token {ex.target_token!r} not in vocabulary")
        out.append((ids, pos, target))
    return out


def render_supervised(
    instances: Sequence[TaskInstance],
    template: PatternTemplate,
    verbalizer: Verbalizer,
    vocab: Vocabulary,
) -> list[tuple[list[int], int, int]]:
    out = []
    for inst in instances:
        if inst.gold_label is None:
            raise ValueError("instance has no gold label")
        ids, pos = render(template, inst, vocab)
        target = vocab.id_of(verbalizer.label_tokens[inst.gold_label])
        if target == UNK_ID:
            raise ValueError("verbalizer token not in vocabulary")
        out.append((ids, pos, target))
    return out


def evaluate_accuracy(
    params: ModelParams,
    prompt: SoftPrompt | None,
    instances: Sequence[TaskInstance],
    template: PatternTemplate,
    verbalizer: Verbalizer,
    vocab: Vocabulary,
    batch_size: int = 64,
) -> tuple[float, list[int]]:
    """Accuracy of restricted-softmax predictions over instances; also
    returns the predicted labels."""
    rendered = [render(template, inst, vocab) for inst in instances]
    preds: list[int] = []
    for i in range(0, len(rendered), batch_size):
        chunk = rendered[i : i + batch_size]
        dists = forward_batch_distribution(params, prompt, chunk)
        for row in dists:
            scores = score_labels(row, verbalizer, vocab)
            preds.append(verbalizer.labels[int(np.argmax(scores))])
    golds = [inst.gold_label for inst in instances]
    correct = sum(p == g for p, g in zip(preds, golds))
    return correct / len(instances), preds


def _mean_loss(params, prompt, triples, batch_size=64) -> float:
    """Mean target NLL without gradient work."""
    total, count = 0.0, 0
    for i in range(0, len(triples), batch_size):
        chunk = triples[i : i + batch_size]
        dists = forward_batch_distribution(params, prompt, [(ids, pos) for ids, pos, _ in chunk])
        targets = np.array([t for _, _, t in chunk])
        picked = dists[np.arange(len(chunk)), targets]
        total += float(-np.log(np.maximum(picked, 1e-30)).sum())
        count += len(chunk)
    return total / count


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------


def pretrain_prompt(
    params: ModelParams,
    task_data: Sequence,
    config: TrainConfig,
    vocab: Vocabulary,
    *,
    k: int = 100,
    valid_data: Sequence | None = None,
    history: list | None = None,
) -> SoftPrompt:
    """Pre-train a soft prompt on self-supervised examples with the
    backbone frozen.

    5% of the data is held out for validation when no validation stream is
    supplied; validation loss is measured every eval_every steps and the
    checkpoint with the lowest validation loss is returned.
    """
    if not task_data:
        raise ValueError("empty pre-training data")
    if config.mode != PT:
        raise ValueError("pretrain_prompt requires PT mode")
    if valid_data is None:
        from .corpus import split_train_valid

        task_data, valid_data = split_train_valid(task_data, 0.05, config.seed)
    if not valid_data:
        raise ValueError("empty validation split")

    train = render_pretrain_examples(task_data, vocab)
    valid = render_pretrain_examples(valid_data, vocab)

    max_steps = config.max_steps
    if max_steps is None:
        max_steps = config.max_epochs * math.ceil(len(train) / config.batch_size)
    if max_steps < config.eval_every:
        raise ValueError("eval_every exceeds total steps; no checkpoint would be recorded")

    prompt = init_soft_prompt("random", k=k, d_model=params.config.d_model, seed=config.seed)
    opt = Adam({"prompt": prompt.matrix})
    rng = np.random.default_rng(config.seed)
    stream = _batches(len(train), config.batch_size, rng)

    best: Checkpoint | None = None
    for step in range(1, max_steps + 1):
        batch = [train[i] for i in next(stream)]
        lr = lr_schedule(config.scheduler, config.lr, step)
        loss, grads = loss_and_grad(params, prompt, batch, PT)
        gdict = {"prompt": grads.prompt}
        clip_global_norm(gdict)
        opt.step({"prompt": prompt.matrix}, gdict, lr)
        record = {"step": step, "lr": lr, "train_loss": loss}
        if step % config.eval_every == 0:
            val = _mean_loss(params, prompt, valid)
            record["valid_loss"] = val
            if best is None or val < best.metric:
                best = Checkpoint(step, val, lr, prompt=prompt.copy())
                record["checkpoint_id"] = f"step{step}"
        if history is not None:
            history.append(record)
    return best.prompt


def _tune_arm(
    params: ModelParams,
    prompt: SoftPrompt | None,
    train_triples,
    dev_eval: Callable,
    config: TrainConfig,
    lr: float,
    mode: str,
    history: list | None,
) -> Checkpoint:
    """Train one learning-rate arm and keep its best checkpoint by dev
    metric (ties go to the earlier step)."""
    max_steps = config.max_steps
    if max_steps is None:
        max_steps = config.max_epochs * math.ceil(len(train_triples) / config.batch_size)
    if max_steps < config.eval_every:
        raise ValueError("eval_every exceeds total steps; no checkpoint would be recorded")

    arrays = {"prompt": prompt.matrix} if mode == PT else dict(params.weights)
    if mode != PT and prompt is not None:
        arrays["prompt"] = prompt.matrix
    opt = Adam(arrays)
    rng = np.random.default_rng(config.seed)
    stream = _batches(len(train_triples), config.batch_size, rng)

    best: Checkpoint | None = None
    for step in range(1, max_steps + 1):
        batch = [train_triples[i] for i in next(stream)]
        eff_lr = lr_schedule(config.scheduler, lr, step)
        loss, grads = loss_and_grad(params, prompt, batch, mode)
        gdict: dict[str, np.ndarray] = {}
        if grads.prompt is not None:
            gdict["prompt"] = grads.prompt
        if grads.params is not None:
            gdict.update(grads.params)
        clip_global_norm(gdict)
        opt.step(arrays, gdict, eff_lr)
        record = {"step": step, "lr": eff_lr, "train_loss": loss, "arm_lr": lr}
        if step % config.eval_every == 0:
            metric = dev_eval(params, prompt)
            record["dev_metric"] = metric
            if best is None or metric > best.metric:
                best = Checkpoint(
                    step,
                    metric,
                    lr,
                    prompt=prompt.copy() if prompt is not None else None,
                    params=params.copy() if mode != PT else None,
                )
                record["checkpoint_id"] = f"lr{lr:g}-step{step}"
        if history is not None:
            history.append(record)
    return best


def _select(best: Checkpoint | None, cand: Checkpoint | None) -> Checkpoint | None:
    """Higher metric wins; ties prefer the earlier checkpoint, then the
    smaller learning rate."""
    if cand is None:
        return best
    if best is None:
        return cand
    a = (-best.metric, best.step, best.lr)
    b = (-cand.metric, cand.step, cand.lr)
    return cand if b < a else best


def prompt_tune(
    params: ModelParams,
    prompt_init: SoftPrompt,
    split,
    template: PatternTemplate,
    verbalizer: Verbalizer,
    vocab: Vocabulary,
    config: TrainConfig,
    history: list | None = None,
) -> tuple[SoftPrompt, float]:
    """Tune only the soft prompt on a few-shot split, searching the
    learning-rate grid; returns the checkpoint with the best dev accuracy.
    The backbone is frozen throughout."""
    if not split.dev:
        raise ValueError("true few-shot requires dev")
    if prompt_init.d != params.config.d_model:
        raise ValueError("prompt shape mismatch")
    train_triples = render_supervised(split.train, template, verbalizer, vocab)
    dev_instances = list(split.dev)

    def dev_eval(p, prompt):
        acc, _ = evaluate_accuracy(p, prompt, dev_instances, template, verbalizer, vocab)
        return acc

    grid = config.lr_grid if config.lr_grid is not None else (config.lr,)
    best: Checkpoint | None = None
    for lr in sorted(grid):
        prompt = prompt_init.copy()
        cand = _tune_arm(params, prompt, train_triples, dev_eval, config, lr, PT, history)
        best = _select(best, cand)
    if history is not None:
        history.append(
            {"selected_arm_lr": best.lr, "selected_step": best.step, "dev_metric": best.metric}
        )
    return best.prompt, best.metric


def full_model_tune(
    params_init: ModelParams,
    split,
    template: PatternTemplate,
    verbalizer: Verbalizer,
    vocab: Vocabulary,
    config: TrainConfig,
    model_size_tag: str | None = None,
    history: list | None = None,
) -> tuple[ModelParams, float]:
    """Tune all backbone parameters (no soft prompt) on a few-shot split.

    The learning-rate grid defaults to the search interval for the given
    model size tag; selection matches prompt_tune.
    """
    if not split.dev:
        raise ValueError("true few-shot requires dev")
    if model_size_tag is not None:
        tag = model_size_tag.lower()
        if tag not in FT_LR_GRIDS:
            raise ValueError(f"unknown model size tag {model_size_tag!r}")
        grid = FT_LR_GRIDS[tag]
    else:
        grid = config.lr_grid if config.lr_grid is not None else (config.lr,)
    train_triples = render_supervised(split.train, template, verbalizer, vocab)
    dev_instances = list(split.dev)

    def dev_eval(p, _prompt):
        acc, _ = evaluate_accuracy(p, None, dev_instances, template, verbalizer, vocab)
        return acc

    best: Checkpoint | None = None
    for lr in sorted(grid):
        params = params_init.copy()
        cand = _tune_arm(params, None, train_triples, dev_eval, config, lr, FT, history)
        best = _select(best, cand)
    if history is not None:
        history.append(
            {"selected_arm_lr": best.lr, "selected_step": best.step, "dev_metric": best.metric}
        )
    return best.params, best.metric


def lm_adapt(
    params: ModelParams,
    corpus,
    steps: int,
    vocab: Vocabulary,
    *,
    config: TrainConfig | None = None,
    history: list | None = None,
) -> ModelParams:
    """Continue backbone training with the span language-modeling objective
    for a fixed number of steps; returns the adapted backbone."""
    seqs = corpus_sequences(corpus, vocab)
    if not seqs:
        raise ValueError("empty corpus")
    if config is None:
        config = TrainConfig(mode=LM, batch_size=16, max_steps=steps, lr=1e-3, eval_every=50)
    adapted = params.copy()
    if steps == 0:
        return adapted
    opt = Adam(adapted.weights)
    rng = np.random.default_rng(config.seed)
    stream = _batches(len(seqs), config.batch_size, rng)
    for step in range(1, steps + 1):
        batch = [seqs[i] for i in next(stream)]
        span_rng = np.random.default_rng((config.seed, step))
        lr = lr_schedule(config.scheduler, config.lr, step)
        loss, grads = loss_and_grad(adapted, None, batch, LM, rng=span_rng)
        clip_global_norm(grads.params)
        opt.step(adapted.weights, grads.params, lr)
        if history is not None:
            history.append({"step": step, "lr": lr, "train_loss": loss})
    return adapted


def corpus_sequences(corpus, vocab: Vocabulary, max_tokens: int = 128) -> list[list[int]]:
    """Encode documents as raw id sequences for the LM objective, chunked
    to max_tokens. Whole documents (sentences joined with periods) give
    the span objective long-range context to copy from."""
    seqs = []
    for doc in corpus:
        ids = encode(vocab, " . ".join(doc.sentences) + " .")
        for i in range(0, len(ids), max_tokens):
            chunk = ids[i : i + max_tokens]
            if len(chunk) >= 2:
                seqs.append(chunk)
    return seqs


def lm_validation_loss(
    params: ModelParams, seqs: Sequence[Sequence[int]], seed: int = 0
) -> float:
    """Span-objective NLL over held-out sequences under a fixed corruption
    seed, so losses are comparable across snapshots."""
    rng = np.random.default_rng(seed)
    total = 0.0
    for seq in seqs:
        corrupted, pos, targets = span_corrupt(seq, rng)
        dist = forward_batch_distribution(params, None, [(corrupted, pos)])[0]
        total += float(-np.log(max(dist[targets[0]], 1e-30)))
    return total / len(seqs)
