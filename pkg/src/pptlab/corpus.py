"""Self-supervised pre-training data built from unlabeled documents.

Three builders, one per task format: 3-way next-sentence prediction for
sentence pairs, next-sentence selection among candidates for multiple
choice (fixed option count or option counts sampled 2..16 for the unified
task), and pseudo-labeled sentiment for single sentences. All builders are
deterministic per (corpus, n, seed, params).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .ioutil import read_jsonl, write_jsonl_atomic
from .pvp import MCC, OPTION_LETTERS, SPC, SPC_WORDS_3, SSC, SSC_WORDS, UNIFIED_MC
from .tokenization import tokenize

logger = logging.getLogger(__name__)

MIN_SENT_TOKENS = 5
MAX_LEN_RATIO = 100.0

# Query/option token caps for the dedicated 6-candidate selection task.
MCC_QUERY_CAP = 389
MCC_OPTION_CAP = 86

DEFAULT_SSC_THRESHOLDS = (0.95, 0.50, 0.50, 0.50, 0.70)

_RETRY_LIMIT = 100

_SENT_SPLIT = re.compile(r"[.?!]+(?:\s+|$)")


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[str, ...]


@dataclass(frozen=True)
class PretrainExample:
    task: str
    slots: dict[str, str]
    label: int
    target_token: str
    meta: dict


@dataclass(frozen=True)
class OptionConfig:
    """One row of the option-count configuration table. For option
    counts of 11 and above the table's mixture
    columns sum to one more than the option count; builders therefore
    derive the effective cross-document negative count as
    num_options - 1 - n_neg_same_doc (see effective_neg_diff)."""

    num_options: int
    max_query_len: int
    max_option_len: int
    n_positive: int
    n_neg_same_doc: int
    n_neg_diff_doc: int

    @property
    def effective_neg_diff(self) -> int:
        return self.num_options - self.n_positive - self.n_neg_same_doc


# num_options -> (len(q), len(op), Pos, Neg-S, Neg-D)
_OPTION_TABLE = {
    2: (400, 50, 1, 1, 0),
    3: (400, 50, 1, 1, 1),
    4: (400, 50, 1, 1, 2),
    5: (400, 40, 1, 1, 3),
    6: (300, 40, 1, 1, 4),
    7: (250, 30, 1, 2, 4),
    8: (200, 30, 1, 2, 5),
    9: (200, 30, 1, 2, 6),
    10: (150, 20, 1, 2, 7),
    11: (150, 20, 1, 3, 8),
    12: (150, 20, 1, 3, 9),
    13: (150, 20, 1, 3, 10),
    14: (150, 20, 1, 3, 11),
    15: (150, 20, 1, 3, 12),
    16: (150, 20, 1, 3, 13),
}


def option_config_for(num_options: int) -> OptionConfig:
    """Input configuration (length caps and option mixture) for a given
    option count."""
    if num_options not in _OPTION_TABLE:
        raise ValueError("unsupported option count")
    q, op, pos, neg_s, neg_d = _OPTION_TABLE[num_options]
    return OptionConfig(num_options, q, op, pos, neg_s, neg_d)


def split_sentences(text: str) -> tuple[str, ...]:
    """Split on ./?/! followed by whitespace (or end of text); pieces are
    trimmed and empties dropped."""
    return tuple(s.strip() for s in _SENT_SPLIT.split(text) if s.strip())


def make_document(doc_id: str, text: str) -> Document:
    return Document(doc_id, split_sentences(text))


def load_corpus(path: str | Path) -> list[Document]:
    """JSONL corpus, one record per document: {"id": str, "text": str}."""
    docs = [make_document(rec["id"], rec["text"]) for rec in read_jsonl(path)]
    if not docs:
        raise ValueError("empty corpus")
    return docs


def _norm(sentence: str) -> str:
    return " ".join(tokenize(sentence))


def _truncate(sentence: str, cap: int) -> str:
    return " ".join(tokenize(sentence)[:cap])


def _sent_len(sentence: str) -> int:
    return len(tokenize(sentence))


def _valid_index(corpus: Sequence[Document]) -> list[list[int]]:
    """Per document, the indices of sentences passing the length filter."""
    return [
        [i for i, s in enumerate(doc.sentences) if _sent_len(s) >= MIN_SENT_TOKENS]
        for doc in corpus
    ]


def _ratio_ok(s1: str, s2: str) -> bool:
    a, b = _sent_len(s1), _sent_len(s2)
    return max(a, b) / min(a, b) <= MAX_LEN_RATIO


def build_nsp3(corpus: Sequence[Document], n: int, seed: int) -> list[PretrainExample]:
    """3-class next-sentence prediction pairs.

    Label 2: s2 directly follows s1 in one document. Label 1: same document,
    non-adjacent (at least one sentence apart in either direction). Label 0:
    different documents. Labels are mixed uniformly (to within rounding) and
    every sentence passes the >=5-token filter; pairs whose token-length
    ratio exceeds 100 are discarded.
    """
    rng = np.random.default_rng(seed)
    valid = _valid_index(corpus)

    counts = [n // 3] * 3
    for k in range(n % 3):
        counts[k] += 1
    order = np.repeat(np.arange(3), counts)
    rng.shuffle(order)

    examples: list[PretrainExample] = []
    for label in order:
        pair = _sample_nsp3_pair(rng, corpus, valid, int(label))
        if pair is None:
            raise ValueError(f"insufficient corpus for label {int(label)}")
        (d1, i1), (d2, i2) = pair
        examples.append(
            PretrainExample(
                task=SPC,
                slots={
                    "s1": _norm(corpus[d1].sentences[i1]),
                    "s2": _norm(corpus[d2].sentences[i2]),
                },
                label=int(label),
                target_token=SPC_WORDS_3[int(label)],
                meta={
                    "doc1": corpus[d1].id,
                    "sent1": i1,
                    "doc2": corpus[d2].id,
                    "sent2": i2,
                },
            )
        )
    return examples


def _sample_nsp3_pair(rng, corpus, valid, label):
    n_docs = len(corpus)
    for _ in range(_RETRY_LIMIT):
        if label == 0:
            if n_docs < 2:
                return None
            d1, d2 = rng.choice(n_docs, size=2, replace=False)
            if not valid[d1] or not valid[d2]:
                continue
            i1 = int(rng.choice(valid[d1]))
            i2 = int(rng.choice(valid[d2]))
        else:
            d1 = d2 = int(rng.integers(n_docs))
            sents = valid[d1]
            if label == 2:
                starts = [i for i in sents if i + 1 in sents]
                if not starts:
                    continue
                i1 = int(rng.choice(starts))
                i2 = i1 + 1
            else:
                if len(sents) < 2:
                    continue
                i1 = int(rng.choice(sents))
                away = [j for j in sents if abs(j - i1) >= 2]
                if not away:
                    continue
                i2 = int(rng.choice(away))
        s1 = corpus[d1].sentences[i1]
        s2 = corpus[d2].sentences[i2]
        if _ratio_ok(s1, s2):
            return (int(d1), i1), (int(d2), i2)
    return None


def _build_mc_example(rng, corpus, valid, config, query_cap, option_cap, task_tag):
    """One next-sentence-selection example, or None if the corpus cannot
    supply it within the retry budget."""
    n_docs = len(corpus)
    n_neg_diff = config.effective_neg_diff
    donor_docs = [d for d in range(n_docs) if valid[d]]
    for _ in range(_RETRY_LIMIT):
        d = int(rng.integers(n_docs))
        sents = valid[d]
        starts = [i for i in sents if i + 1 in sents]
        if not starts:
            continue
        q = int(rng.choice(starts))
        same_pool = [i for i in sents if abs(i - q) >= 2]
        if len(same_pool) < config.n_neg_same_doc:
            continue
        other_docs = [dd for dd in donor_docs if dd != d]
        if len(other_docs) < n_neg_diff:
            return None
        same_negs = rng.choice(same_pool, size=config.n_neg_same_doc, replace=False)
        neg_doc_ids = rng.choice(other_docs, size=n_neg_diff, replace=False)

        options = [(d, q + 1)]
        options += [(d, int(i)) for i in same_negs]
        for dd in neg_doc_ids:
            options.append((int(dd), int(rng.choice(valid[int(dd)]))))
        perm = rng.permutation(len(options))
        options = [options[int(p)] for p in perm]
        answer_pos = [i for i, o in enumerate(options) if o == (d, q + 1)][0] + 1

        slots = {"sq": _truncate(corpus[d].sentences[q], query_cap)}
        for i, (dd, ii) in enumerate(options):
            slots[f"s{i + 1}"] = _truncate(corpus[dd].sentences[ii], option_cap)
        return PretrainExample(
            task=task_tag,
            slots=slots,
            label=answer_pos,
            target_token=OPTION_LETTERS[answer_pos - 1],
            meta={
                "query_doc": corpus[d].id,
                "query_sent": q,
                "options": [[corpus[dd].id, ii] for dd, ii in options],
                "answer_position": answer_pos,
                "num_options": config.num_options,
            },
        )
    return None


def build_nss(
    corpus: Sequence[Document],
    n: int,
    seed: int,
    num_options: int = 6,
    *,
    max_query_len: int | None = None,
    max_option_len: int | None = None,
) -> list[PretrainExample]:
    """Next-sentence selection: pick the sentence that follows the query.

    Options are 1 adjacent sentence (the answer), same-document non-adjacent
    sentences, and sentences from other documents (one per distinct donor
    document), per the option-count configuration. Option order is shuffled
    so the answer position is uniform; the label is the answer's 1-based
    position. Length caps default to the configuration row; the dedicated
    6-candidate pre-training task uses 389/86 instead (pass them explicitly
    or use MCC_QUERY_CAP/MCC_OPTION_CAP).
    """
    config = option_config_for(num_options)
    query_cap = max_query_len if max_query_len is not None else config.max_query_len
    option_cap = max_option_len if max_option_len is not None else config.max_option_len
    rng = np.random.default_rng(seed)
    valid = _valid_index(corpus)
    if sum(1 for v in valid if v) < 1 + config.effective_neg_diff:
        raise ValueError("insufficient distinct documents")
    examples = []
    for _ in range(n):
        ex = _build_mc_example(rng, corpus, valid, config, query_cap, option_cap, MCC)
        if ex is None:
            raise ValueError("insufficient distinct documents")
        examples.append(ex)
    return examples


def build_unified_mc(corpus: Sequence[Document], n: int, seed: int) -> list[PretrainExample]:
    """Unified multiple-choice examples with option counts sampled
    uniformly from 2..16, each built under its option-count configuration."""
    rng = np.random.default_rng(seed)
    valid = _valid_index(corpus)
    examples = []
    for _ in range(n):
        num_options = int(rng.integers(2, 17))
        config = option_config_for(num_options)
        if sum(1 for v in valid if v) < 1 + config.effective_neg_diff:
            raise ValueError("insufficient distinct documents")
        ex = _build_mc_example(
            rng, corpus, valid, config, config.max_query_len, config.max_option_len, UNIFIED_MC
        )
        if ex is None:
            raise ValueError("insufficient distinct documents")
        examples.append(ex)
    return examples


def build_pseudo_ssc(
    corpus: Sequence[Document],
    annotator: Callable[[str], tuple[int, float]],
    n: int,
    seed: int,
    thresholds: Sequence[float] = DEFAULT_SSC_THRESHOLDS,
) -> list[PretrainExample]:
    """Pseudo-labeled single-sentence sentiment examples.

    A sentence is kept only when the annotator's confidence reaches its
    label's threshold. Kept sentences are drawn round-robin across labels
    (majority labels downsampled) up to n; shortfalls and empty labels are
    logged as balance warnings.
    """
    if len(thresholds) != 5 or any(not 0 < t <= 1 for t in thresholds):
        raise ValueError("thresholds must be 5 values in (0, 1]")
    rng = np.random.default_rng(seed)
    valid = _valid_index(corpus)

    candidates = [(d, i) for d in range(len(corpus)) for i in valid[d]]
    rng.shuffle(candidates)

    buckets: dict[int, list] = {y: [] for y in range(5)}
    for d, i in candidates:
        sentence = corpus[d].sentences[i]
        label, conf = annotator(sentence)
        if not 0 <= label <= 4:
            raise ValueError(f"annotator label {label} out of range")
        if conf >= thresholds[label]:
            buckets[label].append((d, i, float(conf)))

    if all(not b for b in buckets.values()):
        raise ValueError("annotator produced nothing above thresholds")
    empty = [y for y, b in buckets.items() if not b]
    if empty:
        logger.warning("pseudo-label buckets empty for labels %s; proceeding", empty)

    taken: dict[int, int] = {y: 0 for y in range(5)}
    picked: list[tuple[int, int, int, float]] = []
    while len(picked) < n:
        progressed = False
        for y in range(5):
            if len(picked) >= n:
                break
            if taken[y] < len(buckets[y]):
                d, i, conf = buckets[y][taken[y]]
                picked.append((y, d, i, conf))
                taken[y] += 1
                progressed = True
        if not progressed:
            break

    counts = [taken[y] for y in range(5) if buckets[y]]
    if counts and max(counts) - min(counts) > 1:
        logger.warning("pseudo-label output imbalanced: per-label counts %s", dict(taken))

    return [
        PretrainExample(
            task=SSC,
            slots={"s": _norm(corpus[d].sentences[i])},
            label=y,
            target_token=SSC_WORDS[y],
            meta={"doc": corpus[d].id, "sent": i, "confidence": conf},
        )
        for y, d, i, conf in picked
    ]


_NEG_STRONG = {"terrible", "awful", "horrible", "worst", "hate", "hated", "dreadful", "disaster"}
_NEG_MILD = {"bad", "boring", "poor", "dull", "weak", "bland", "tedious", "mediocre"}
_POS_MILD = {"good", "nice", "fine", "solid", "decent", "pleasant", "enjoyable", "fun"}
_POS_STRONG = {"great", "excellent", "wonderful", "amazing", "best", "love", "loved", "superb"}


def lexicon_annotator(sentence: str) -> tuple[int, float]:
    """Reference sentiment annotator: signed word lexicon with confidence
    from the hit count and score magnitude. Sentences with no sentiment
    words are neutral at confidence 0.5."""
    weights = []
    for tok in tokenize(sentence):
        if tok in _NEG_STRONG:
            weights.append(-2.0)
        elif tok in _NEG_MILD:
            weights.append(-1.0)
        elif tok in _POS_MILD:
            weights.append(1.0)
        elif tok in _POS_STRONG:
            weights.append(2.0)
    if not weights:
        return 2, 0.5
    raw = sum(weights)
    mean = raw / len(weights)
    if mean <= -1.5:
        label = 0
    elif mean < -0.25:
        label = 1
    elif mean <= 0.25:
        label = 2
    elif mean < 1.5:
        label = 3
    else:
        label = 4
    confidence = min(1.0, 0.4 + 0.2 * len(weights) + 0.1 * abs(raw))
    return label, confidence


def example_key(ex: PretrainExample) -> str:
    """Canonical identity of an example, derived from its provenance."""
    return json.dumps({"task": ex.task, "meta": ex.meta}, sort_keys=True)


def split_train_valid(
    examples: Sequence[PretrainExample], valid_fraction: float = 0.05, seed: int = 0
) -> tuple[list[PretrainExample], list[PretrainExample]]:
    """Hold out a validation slice, keeping identical provenance keys on
    one side so train and valid never share meta."""
    groups: dict[str, list[PretrainExample]] = {}
    for ex in examples:
        groups.setdefault(example_key(ex), []).append(ex)
    keys = sorted(groups)
    rng = np.random.default_rng(seed)
    rng.shuffle(keys)
    n_valid_groups = max(1, int(round(len(keys) * valid_fraction))) if len(keys) > 1 else 0
    valid_keys = set(keys[:n_valid_groups])
    train, valid = [], []
    for ex in examples:
        (valid if example_key(ex) in valid_keys else train).append(ex)
    return train, valid


def _to_record(ex: PretrainExample) -> dict:
    return {
        "task": ex.task,
        "input": ex.slots,
        "label": ex.label,
        "target_token": ex.target_token,
        "meta": ex.meta,
    }


def _from_record(rec: dict) -> PretrainExample:
    return PretrainExample(
        task=rec["task"],
        slots=dict(rec["input"]),
        label=int(rec["label"]),
        target_token=rec["target_token"],
        meta=rec["meta"],
    )


def write_dataset(
    examples: Sequence[PretrainExample],
    out_dir: str | Path,
    name: str,
    valid_fraction: float = 0.05,
    seed: int = 0,
) -> tuple[Path, Path]:
    """Write <name>.train.jsonl / <name>.valid.jsonl under out_dir."""
    out_dir = Path(out_dir)
    train, valid = split_train_valid(examples, valid_fraction, seed)
    train_path = out_dir / f"{name}.train.jsonl"
    valid_path = out_dir / f"{name}.valid.jsonl"
    write_jsonl_atomic(train_path, [_to_record(ex) for ex in train])
    write_jsonl_atomic(valid_path, [_to_record(ex) for ex in valid])
    return train_path, valid_path


def load_dataset(path: str | Path) -> list[PretrainExample]:
    return [_from_record(rec) for rec in read_jsonl(path)]
