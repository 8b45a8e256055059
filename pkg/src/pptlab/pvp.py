"""Pattern-verbalizer pairs for the three task formats and their unified
multiple-choice recasting.

A pattern turns a task instance into a masked token sequence; a verbalizer
maps each label to a single vocabulary token read off the mask position.
Pattern strings are whitespace-separated atoms: "{name}" marks an input
slot, the bare atom "<X>" marks the mask, anything else is literal text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .tokenization import MASK_ID, MASK_TOKEN, SPECIAL_TOKENS, Vocabulary, encode, tokenize

SPC = "SPC"
MCC = "MCC"
SSC = "SSC"
UNIFIED_MC = "UNIFIED_MC"
FORMATS = (SPC, MCC, SSC, UNIFIED_MC)

SPC_WORDS_3 = ("no", "maybe", "yes")
SPC_WORDS_2 = ("no", "yes")
SSC_WORDS = ("terrible", "bad", "maybe", "good", "great")

# Endpoint subsets of the 5-point scale, paired from the ends inward.
SSC_SUBSETS = {
    2: ("terrible", "great"),
    3: ("terrible", "maybe", "great"),
    4: ("terrible", "bad", "good", "great"),
    5: SSC_WORDS,
}

# Single-character option tokens for up to 16 choices.
OPTION_LETTERS = "abcdefghijklmnop"

MAX_OPTIONS = 16


@dataclass(frozen=True)
class Slot:
    name: str


@dataclass(frozen=True)
class Mask:
    pass


@dataclass(frozen=True)
class PatternTemplate:
    """Ordered segments (literal text, input slot, or the mask), tagged
    with the task format it renders."""

    format: str
    segments: tuple[object, ...]

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")
        masks = sum(isinstance(s, Mask) for s in self.segments)
        if masks != 1:
            raise ValueError("pattern must contain exactly one mask '<X>'")
        names = [s.name for s in self.segments if isinstance(s, Slot)]
        if len(names) != len(set(names)):
            raise ValueError("duplicate slot name in pattern")

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments if isinstance(s, Slot))


@dataclass(frozen=True)
class Verbalizer:
    """Ordered labels and an injective label -> single-token mapping."""

    labels: tuple[int, ...]
    label_tokens: dict[int, str]

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise ValueError("verbalizer needs at least 2 labels")
        toks = [self.label_tokens[y] for y in self.labels]
        if len(set(toks)) != len(toks):
            raise ValueError("verbalizer tokens must be distinct")
        for tok in toks:
            if len(tokenize(tok)) != 1:
                raise ValueError(f"verbalizer token {tok!r} is not a single token")

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.label_tokens[y] for y in self.labels)


@dataclass(frozen=True)
class TaskInstance:
    slot_values: Mapping[str, str]
    gold_label: int | None = None


@dataclass(frozen=True)
class HardPromptSpec:
    """A fixed textual prompt for one format; the soft prompt is always
    prepended by the model layer and is not part of this text."""

    format: str
    pattern: str


def parse_pattern(format: str, pattern: str) -> PatternTemplate:
    """Parse a pattern string into a template.

    The mask must appear as a standalone whitespace-separated "<X>" atom
    so it is unambiguous; punctuation in literals should be space-separated
    to match tokenizer output.
    """
    segments: list[object] = []
    literal_run: list[str] = []

    def flush() -> None:
        if literal_run:
            segments.append(" ".join(literal_run))
            literal_run.clear()

    for atom in pattern.split():
        if atom.startswith("{") and atom.endswith("}") and len(atom) > 2:
            flush()
            segments.append(Slot(atom[1:-1]))
        elif atom == MASK_TOKEN or atom == MASK_TOKEN.lower():
            flush()
            segments.append(Mask())
        else:
            if MASK_TOKEN.lower() in atom.lower():
                raise ValueError(
                    "mask token must be a standalone space-separated atom"
                )
            literal_run.append(atom)
    flush()
    return PatternTemplate(format, tuple(segments))


def _mc_pattern(n_options: int, *, query_prefix: str = "", answer_text: str = "answer is") -> str:
    parts: list[str] = []
    if query_prefix:
        parts.append(query_prefix)
    parts.append("{sq} ?")
    for i in range(n_options):
        parts.append(f"{OPTION_LETTERS[i]} . {{s{i + 1}}} .")
    parts.append(f"{answer_text} <X> .")
    return " ".join(parts)


def make_builtin_pvp(
    format: str,
    n_labels: int | None = None,
    n_options: int | None = None,
) -> tuple[PatternTemplate, Verbalizer]:
    """The built-in PVP for a format.

    SPC renders "s1 <X> . s2" with no/maybe/yes (or no/yes for two labels).
    MCC and UNIFIED_MC render the query followed by lettered options and
    "answer is <X>", with letter verbalizers and 1-based position labels.
    SSC renders "s . <X> ." over the 5-point word scale or an endpoint
    subset of it.
    """
    if format == SPC:
        if n_labels not in (2, 3):
            raise ValueError("unsupported label count for format")
        words = SPC_WORDS_2 if n_labels == 2 else SPC_WORDS_3
        template = parse_pattern(SPC, "{s1} <X> . {s2}")
        verb = Verbalizer(tuple(range(n_labels)), dict(enumerate(words)))
        return template, verb
    if format == SSC:
        if n_labels is None or not 2 <= n_labels <= 5:
            raise ValueError("unsupported label count for format")
        words = SSC_SUBSETS[n_labels]
        template = parse_pattern(SSC, "{s} . <X> .")
        verb = Verbalizer(tuple(range(n_labels)), dict(enumerate(words)))
        return template, verb
    if format in (MCC, UNIFIED_MC):
        if n_options is None or not 2 <= n_options <= MAX_OPTIONS:
            raise ValueError("unsupported label count for format")
        template = parse_pattern(format, _mc_pattern(n_options))
        labels = tuple(range(1, n_options + 1))
        verb = Verbalizer(labels, {y: OPTION_LETTERS[y - 1] for y in labels})
        return template, verb
    raise ValueError(f"unknown format {format!r}")


def builtin_hard_prompt(format: str, n_options: int = 6) -> HardPromptSpec:
    """The manually designed hard prompt for a format."""
    if format == SPC:
        return HardPromptSpec(SPC, "question : {s1} ? <X> . {s2}")
    if format == SSC:
        return HardPromptSpec(SSC, "{s} . it was <X> .")
    if format in (MCC, UNIFIED_MC):
        pattern = "we ask " + _mc_pattern(n_options, answer_text="the answer is")
        return HardPromptSpec(format, pattern)
    raise ValueError(f"unknown format {format!r}")


def attach_hard_prompt(template: PatternTemplate, hard: HardPromptSpec) -> PatternTemplate:
    """Replace a builtin pattern with its hard-prompt variant, binding the
    same input slots."""
    if hard.format != template.format:
        raise ValueError("hard prompt format mismatch")
    new = parse_pattern(template.format, hard.pattern)
    if set(new.slot_names) != set(template.slot_names):
        raise ValueError("hard prompt format mismatch")
    return new


def render_text(template: PatternTemplate, instance: TaskInstance) -> str:
    """Substitute slots verbatim and return the pre-tokenization string."""
    provided = set(instance.slot_values)
    needed = set(template.slot_names)
    missing = needed - provided
    if missing:
        raise ValueError(f"unbound slot {sorted(missing)[0]!r}")
    extra = provided - needed
    if extra:
        raise ValueError(f"unexpected slot {sorted(extra)[0]!r}")
    parts = []
    for seg in template.segments:
        if isinstance(seg, Slot):
            parts.append(instance.slot_values[seg.name])
        elif isinstance(seg, Mask):
            parts.append(MASK_TOKEN)
        else:
            parts.append(seg)
    return " ".join(parts)


def render(
    template: PatternTemplate, instance: TaskInstance, vocab: Vocabulary
) -> tuple[list[int], int]:
    """Render an instance to token ids and the mask position.

    The rendered sequence contains the mask exactly once; slot text that
    itself contains the mask literal is rejected.
    """
    ids = encode(vocab, render_text(template, instance))
    positions = [i for i, t in enumerate(ids) if t == MASK_ID]
    if len(positions) != 1:
        raise ValueError("mask collision")
    return ids, positions[0]


def score_labels(
    mask_distribution: np.ndarray, verbalizer: Verbalizer, vocab: Vocabulary
) -> np.ndarray:
    """Restrict a vocabulary distribution to the verbalizer tokens and
    renormalize; output is ordered by the verbalizer's label order.

    The predicted label is the argmax; np.argmax takes the lowest index
    on ties.
    """
    dist = np.asarray(mask_distribution, dtype=np.float64)
    if dist.ndim != 1 or dist.shape[0] != len(vocab):
        raise ValueError("distribution does not match vocabulary size")
    if np.any(dist < 0) or abs(float(dist.sum()) - 1.0) > 1e-6:
        raise ValueError("mask distribution is not a probability vector")
    ids = [vocab.id_of(tok) for tok in verbalizer.tokens]
    mass = dist[ids]
    total = float(mass.sum())
    if total <= 0.0:
        raise ValueError("degenerate verbalizer mass")
    return mass / total


def predict_label(
    mask_distribution: np.ndarray, verbalizer: Verbalizer, vocab: Vocabulary
) -> int:
    scores = score_labels(mask_distribution, verbalizer, vocab)
    return verbalizer.labels[int(np.argmax(scores))]


def to_unified_mc(
    format: str, slot_values: Mapping[str, str], verbalizer: Verbalizer, gold_label: int | None
) -> tuple[dict[str, str], int, int | None]:
    """Recast an instance of any format as a multiple-choice instance.

    For SPC the query is the two sentences concatenated and the options are
    the verbalizer words in label order; for SSC the query is the sentence
    and the options are the label words. MC instances pass through. Returns
    (slots, n_options, gold 1-based position).
    """
    if format in (MCC, UNIFIED_MC):
        n_options = len([k for k in slot_values if k != "sq"])
        return dict(slot_values), n_options, gold_label
    if format == SPC:
        query = f"{slot_values['s1']} {slot_values['s2']}"
    elif format == SSC:
        query = slot_values["s"]
    else:
        raise ValueError(f"unknown format {format!r}")
    options = verbalizer.tokens
    slots = {"sq": query}
    for i, word in enumerate(options):
        slots[f"s{i + 1}"] = word
    gold = None
    if gold_label is not None:
        gold = verbalizer.labels.index(gold_label) + 1
    return slots, len(options), gold


def _collect_reserved() -> tuple[str, ...]:
    surfaces: set[str] = set()
    for n in (2, 3):
        t, v = make_builtin_pvp(SPC, n_labels=n)
        surfaces.update(v.tokens)
    for n in range(2, 6):
        _, v = make_builtin_pvp(SSC, n_labels=n)
        surfaces.update(v.tokens)
    t, v = make_builtin_pvp(MCC, n_options=MAX_OPTIONS)
    surfaces.update(v.tokens)
    texts = ["{s1} <X> . {s2}", "{s} . <X> .", _mc_pattern(MAX_OPTIONS)]
    for fmt in (SPC, SSC, MCC):
        texts.append(builtin_hard_prompt(fmt, n_options=MAX_OPTIONS).pattern)
    for text in texts:
        for atom in text.split():
            if atom.startswith("{") or atom == MASK_TOKEN:
                continue
            surfaces.update(tokenize(atom))
    surfaces -= set(SPECIAL_TOKENS)
    return tuple(sorted(surfaces))


# Tokens every vocabulary must carry so the builtin PVPs and hard prompts
# always render without UNK.
RESERVED_TOKENS: tuple[str, ...] = _collect_reserved()


def load_pvp_config(source: str | Path | Mapping) -> tuple[PatternTemplate, Verbalizer]:
    """Load a custom PVP from JSON with keys {format, pattern, verbalizer}.

    The verbalizer is either a list of tokens (labels 0..n-1) or an object
    {"labels": [...], "tokens": [...]}.
    """
    cfg = source if isinstance(source, Mapping) else json.loads(Path(source).read_text())
    template = parse_pattern(cfg["format"], cfg["pattern"])
    verb_cfg = cfg["verbalizer"]
    if isinstance(verb_cfg, Mapping):
        labels = tuple(int(y) for y in verb_cfg["labels"])
        tokens = list(verb_cfg["tokens"])
    else:
        tokens = list(verb_cfg)
        labels = tuple(range(len(tokens)))
    verb = Verbalizer(labels, dict(zip(labels, tokens)))
    return template, verb


def load_hard_prompt_config(source: str | Path | Mapping) -> HardPromptSpec:
    cfg = source if isinstance(source, Mapping) else json.loads(Path(source).read_text())
    return HardPromptSpec(cfg["format"], cfg["pattern"])
