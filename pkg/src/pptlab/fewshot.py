"""True few-shot dataset construction.

Train and dev sets are the same tiny size and are drawn only from the
source's training pool; the test pool is never touched during sampling.
Tasks with at most 5 labels get 32 samples balanced to within one; tasks
with more labels get exactly 8 per label.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ioutil import read_jsonl, write_jsonl_atomic
from .pvp import FORMATS, TaskInstance

DEFAULT_SAMPLES = 32
SAMPLES_PER_LABEL_MANY = 8
MANY_LABEL_THRESHOLD = 5


@dataclass(frozen=True)
class TaskSource:
    """A labeled downstream dataset with separate train and test pools."""

    name: str
    format: str
    train_pool: tuple[TaskInstance, ...]
    test_pool: tuple[TaskInstance, ...]

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(sorted({inst.gold_label for inst in self.train_pool + self.test_pool}))

    @property
    def n_class(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class FewShotSplit:
    train: tuple[TaskInstance, ...]
    dev: tuple[TaskInstance, ...]
    test: tuple[TaskInstance, ...]
    seed: int
    n_class: int


def load_task(path: str | Path, name: str | None = None) -> TaskSource:
    """JSONL rows: {"pool": "train"|"test", "format": ..., "slots": {...},
    "label": int}."""
    train, test = [], []
    fmt = None
    for rec in read_jsonl(path):
        if fmt is None:
            fmt = rec["format"]
            if fmt not in FORMATS:
                raise ValueError(f"unknown format {fmt!r}")
        elif rec["format"] != fmt:
            raise ValueError("mixed formats in task file")
        inst = TaskInstance(dict(rec["slots"]), int(rec["label"]))
        if rec["pool"] == "train":
            train.append(inst)
        elif rec["pool"] == "test":
            test.append(inst)
        else:
            raise ValueError(f"unknown pool {rec['pool']!r}")
    if fmt is None:
        raise ValueError("empty task file")
    return TaskSource(name or Path(path).stem, fmt, tuple(train), tuple(test))


def save_task(source: TaskSource, path: str | Path) -> None:
    records = []
    for pool, instances in (("train", source.train_pool), ("test", source.test_pool)):
        for inst in instances:
            records.append(
                {
                    "pool": pool,
                    "format": source.format,
                    "slots": dict(inst.slot_values),
                    "label": inst.gold_label,
                }
            )
    write_jsonl_atomic(path, records)


def _per_label_counts(size: int, labels: Sequence[int], rng: np.random.Generator) -> dict[int, int]:
    """Balanced counts summing to size; the remainder goes to labels in
    seeded random order."""
    base, rem = divmod(size, len(labels))
    order = [labels[int(i)] for i in rng.permutation(len(labels))]
    counts = {y: base for y in labels}
    for y in order[:rem]:
        counts[y] += 1
    return counts


def _label_streams(source: TaskSource, rng: np.random.Generator) -> dict[int, list[int]]:
    """Per label, a seeded shuffle of that label's train-pool indices."""
    pools: dict[int, list[int]] = {y: [] for y in source.labels}
    for i, inst in enumerate(source.train_pool):
        pools[inst.gold_label].append(i)
    streams = {}
    for y in source.labels:
        idx = np.array(pools[y], dtype=np.int64)
        rng.shuffle(idx)
        streams[y] = idx.tolist()
    return streams


def _resolve_size(source: TaskSource, size: int | None) -> tuple[int, bool]:
    if size is not None:
        return size, False
    if source.n_class > MANY_LABEL_THRESHOLD:
        return SAMPLES_PER_LABEL_MANY * source.n_class, True
    return DEFAULT_SAMPLES, False


def sample_fewshot(source: TaskSource, seed: int, size: int | None = None) -> FewShotSplit:
    """Sample a balanced few-shot split with |train| = |dev|.

    With at most 5 labels the default size is 32 with per-label counts
    within one of each other; with more labels exactly 8 per label are
    drawn. Dev is sampled the same way from the remaining pool; the test
    pool passes through untouched. Deterministic per (source, seed).
    """
    rng = np.random.default_rng(seed)
    total, exact_per_label = _resolve_size(source, size)
    if exact_per_label:
        counts = {y: SAMPLES_PER_LABEL_MANY for y in source.labels}
    else:
        counts = _per_label_counts(total, source.labels, rng)
    streams = _label_streams(source, rng)

    train_idx, dev_idx = [], []
    for y in source.labels:
        c = counts[y]
        if len(streams[y]) < 2 * c:
            raise ValueError(f"insufficient samples for label {y}")
        train_idx.extend(streams[y][:c])
        dev_idx.extend(streams[y][c : 2 * c])
    train = tuple(source.train_pool[i] for i in sorted(train_idx))
    dev = tuple(source.train_pool[i] for i in sorted(dev_idx))
    return FewShotSplit(train, dev, source.test_pool, seed, source.n_class)


def sample_sweep(source: TaskSource, sizes: Sequence[int], seed: int) -> list[FewShotSplit]:
    """Nested splits for a sample-efficiency sweep: each smaller train set
    is a subset of every larger one, balanced at each size. Dev sets are
    nested too and drawn beyond the largest train slice, so no dev example
    appears in any train set of the sweep."""
    if list(sizes) != sorted(set(sizes)):
        raise ValueError("sizes not ascending")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(source.labels))
    remainder_order = [source.labels[int(i)] for i in order]
    streams = _label_streams(source, rng)

    def counts_for(size: int) -> dict[int, int]:
        base, rem = divmod(size, len(source.labels))
        counts = {y: base for y in source.labels}
        for y in remainder_order[:rem]:
            counts[y] += 1
        return counts

    max_counts = counts_for(sizes[-1])
    splits = []
    for size in sizes:
        counts = counts_for(size)
        train_idx, dev_idx = [], []
        for y in source.labels:
            c, cmax = counts[y], max_counts[y]
            if len(streams[y]) < cmax + c:
                raise ValueError(f"insufficient samples for label {y}")
            train_idx.extend(streams[y][:c])
            dev_idx.extend(streams[y][cmax : cmax + c])
        train = tuple(source.train_pool[i] for i in sorted(train_idx))
        dev = tuple(source.train_pool[i] for i in sorted(dev_idx))
        splits.append(FewShotSplit(train, dev, source.test_pool, seed, source.n_class))
    return splits
