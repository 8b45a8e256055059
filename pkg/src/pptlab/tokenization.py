"""Deterministic word-level tokenizer and vocabulary.

The vocabulary reserves four special tokens at fixed ids: PAD=0, UNK=1,
EOS=2, MASK=3. The mask sentinel's surface form is the literal string
"<X>"; normalization lowercases text, so "<x>" in running text is
recognized as the mask as well.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

PAD_ID = 0
UNK_ID = 1
EOS_ID = 2
MASK_ID = 3

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
EOS_TOKEN = "<eos>"
MASK_TOKEN = "<X>"

SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, EOS_TOKEN, MASK_TOKEN)

# Punctuation detached into standalone tokens during normalization.
_DETACHED = ".,?!"


def tokenize(text: str) -> list[str]:
    """Normalize text to a token list: lowercase, split on whitespace,
    with . , ? ! detached as separate tokens. The mask literal "<X>"
    survives as the token "<X>". Idempotent on its own output."""
    lowered = text.lower()
    for ch in _DETACHED:
        lowered = lowered.replace(ch, f" {ch} ")
    return [MASK_TOKEN if tok == "<x>" else tok for tok in lowered.split()]


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token <-> id mapping; ids are contiguous from 0."""

    tokens: tuple[str, ...]
    token_to_id: dict[str, int]

    def __post_init__(self) -> None:
        if self.tokens[:4] != SPECIAL_TOKENS:
            raise ValueError("special tokens must occupy ids 0..3")
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("duplicate token in vocabulary")
        if any(not tok for tok in self.tokens):
            raise ValueError("empty token string")

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id


def build_vocab(
    corpus: Sequence[str],
    max_size: int,
    reserved: Iterable[str] = (),
) -> Vocabulary:
    """Build a vocabulary from a corpus of documents.

    Contains the 4 special tokens, then `reserved` tokens in given order,
    then the most frequent corpus tokens up to `max_size` total. Frequency
    ties break lexicographically. Deterministic for fixed inputs.
    """
    if max_size < 4:
        raise ValueError("vocabulary too small")
    if not corpus:
        raise ValueError("empty corpus")

    counts: Counter[str] = Counter()
    for doc in corpus:
        counts.update(tokenize(doc))
    if not counts and not reserved:
        raise ValueError("empty corpus")

    tokens: list[str] = list(SPECIAL_TOKENS)
    seen = set(tokens)
    for tok in reserved:
        if tok not in seen:
            if len(tokens) >= max_size:
                raise ValueError("vocabulary too small")
            tokens.append(tok)
            seen.add(tok)

    by_freq = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    for tok, _ in by_freq:
        if len(tokens) >= max_size:
            break
        if tok not in seen:
            tokens.append(tok)
            seen.add(tok)

    return Vocabulary(tuple(tokens), {tok: i for i, tok in enumerate(tokens)})


def encode(vocab: Vocabulary, text: str) -> list[int]:
    """Encode text to ids; out-of-vocabulary tokens map to UNK."""
    return [vocab.token_to_id.get(tok, UNK_ID) for tok in tokenize(text)]


def decode(vocab: Vocabulary, ids: Sequence[int]) -> str:
    """Space-join surface forms, dropping PAD tokens."""
    out = []
    for i in ids:
        if i < 0 or i >= len(vocab):
            raise ValueError("id out of range")
        if i == PAD_ID:
            continue
        out.append(vocab.tokens[i])
    return " ".join(out)


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    """One token per line; the line number is the id."""
    Path(path).write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tokens = tuple(lines)
    return Vocabulary(tokens, {tok: i for i, tok in enumerate(tokens)})
