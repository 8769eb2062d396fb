"""Tokenization, character set, vocabulary, and semi-character word encoding.

Everything downstream (perturbation generators, the recognizer, the
classifiers) shares the types defined here.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as _data


class DataError(ValueError):
    """Malformed or inconsistent input data (maps to CLI exit code 3)."""


UNK_WORD = "<unk>"


# ---------------------------------------------------------------------------
# Character set


class CharSet:
    """Ordered character inventory with an index<->character bijection.

    Characters outside the set are mapped to a reserved placeholder, so
    every string is encodable. The default set is 26 lowercase letters,
    10 digits, apostrophe, hyphen, and the placeholder (39 characters,
    giving a 117-dim semi-character vector).
    """

    def __init__(self, chars: str, placeholder: str):
        if len(set(chars)) != len(chars):
            raise ValueError("duplicate characters in charset")
        if placeholder not in chars:
            raise ValueError("placeholder must be a member of the charset")
        for c in "abcdefghijklmnopqrstuvwxyz0123456789":
            if c not in chars:
                raise ValueError(f"charset must contain {c!r}")
        self.chars = chars
        self.placeholder = placeholder
        self._index = {c: i for i, c in enumerate(chars)}

    @property
    def size(self) -> int:
        return len(self.chars)

    def index(self, ch: str) -> int:
        """Index of ``ch``, falling back to the placeholder index."""
        return self._index.get(ch, self._index[self.placeholder])

    def __contains__(self, ch: str) -> bool:
        return ch in self._index

    def char(self, index: int) -> str:
        return self.chars[index]

    def encodes_exactly(self, word: str) -> bool:
        """True when no character of ``word`` collapses to the placeholder."""
        return all(c in self._index and c != self.placeholder for c in word)


DEFAULT_CHARSET = CharSet("abcdefghijklmnopqrstuvwxyz0123456789'-#", placeholder="#")

LETTERS = "abcdefghijklmnopqrstuvwxyz"


# ---------------------------------------------------------------------------
# Tokens and sentences


@dataclass(frozen=True)
class Token:
    surface: str

    @property
    def lowercased(self) -> str:
        return self.surface.lower()

    @property
    def is_word(self) -> bool:
        return any(c.isalpha() for c in self.surface)

    @property
    def char_len(self) -> int:
        return len(self.surface)


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    label: int | None = None

    def __post_init__(self):
        if not self.tokens:
            raise DataError("sentence has no tokens")

    def text(self) -> str:
        return " ".join(t.surface for t in self.tokens)

    def words(self) -> list[str]:
        return [t.surface for t in self.tokens if t.is_word]

    def replace_token(self, index: int, surface: str) -> "Sentence":
        toks = list(self.tokens)
        toks[index] = Token(surface)
        return Sentence(tuple(toks), self.label)

    def with_label(self, label: int | None) -> "Sentence":
        return Sentence(self.tokens, label)


def tokenize(text: str, label: int | None = None) -> Sentence:
    """Lowercase and split into tokens.

    Whitespace separates chunks; leading and trailing punctuation of each
    chunk becomes separate one-character tokens, while internal
    apostrophes/hyphens stay inside the word.
    """
    if not text or not text.strip():
        raise DataError("empty input text")
    tokens: list[Token] = []
    for chunk in text.lower().split():
        head: list[str] = []
        tail: list[str] = []
        while chunk and not chunk[0].isalnum():
            head.append(chunk[0])
            chunk = chunk[1:]
        while chunk and not chunk[-1].isalnum():
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(Token(c) for c in head)
        if chunk:
            tokens.append(Token(chunk))
        tokens.extend(Token(c) for c in reversed(tail))
    return Sentence(tuple(tokens), label)


def is_perturbable(token: Token, stopwords: frozenset[str] | set[str]) -> bool:
    """Word tokens of length >= 4 that are not stopwords may be edited."""
    return token.is_word and token.char_len >= 4 and token.lowercased not in stopwords


# ---------------------------------------------------------------------------
# Vocabulary


@dataclass(frozen=True)
class Vocabulary:
    """Closed word list with a reserved UNK id (always id 0)."""

    words: tuple[str, ...]
    cap: int
    freq: dict[str, int] = field(compare=False, repr=False)
    word_to_id: dict[str, int] = field(compare=False, repr=False)

    unk_id = 0

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_id

    def id_of(self, word: str) -> int:
        return self.word_to_id.get(word, self.unk_id)

    def word_of(self, index: int) -> str:
        return self.words[index]

    @staticmethod
    def from_words(words: list[str], cap: int, freq: dict[str, int] | None = None) -> "Vocabulary":
        full = (UNK_WORD, *words)
        mapping = {w: i for i, w in enumerate(full) if w != UNK_WORD}
        return Vocabulary(full, cap, dict(freq or {}), mapping)


def build_vocab(corpus: list[Sentence], cap: int) -> Vocabulary:
    """Keep the ``cap`` most frequent word tokens; ties break lexicographically."""
    if not corpus:
        raise DataError("empty corpus")
    if cap < 1:
        raise DataError("vocabulary cap must be >= 1")
    counts = Counter()
    for sent in corpus:
        counts.update(t.lowercased for t in sent.tokens if t.is_word)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [w for w, _ in ranked[:cap]]
    return Vocabulary.from_words(kept, cap, dict(counts))


# ---------------------------------------------------------------------------
# Semi-character encoding


def encode_semichar(word: str, cs: CharSet = DEFAULT_CHARSET) -> np.ndarray:
    """Encode a word as [first one-hot | internal bag-of-counts | last one-hot].

    The middle block counts characters at positions 2..l-1 and is therefore
    invariant under any permutation of the internal characters. Length-1
    words put the same character in the first and last blocks; length-1 and
    length-2 words have an all-zero middle block.
    """
    if not word:
        raise DataError("cannot encode an empty word")
    k = cs.size
    vec = np.zeros(3 * k, dtype=np.float32)
    vec[cs.index(word[0])] = 1.0
    vec[2 * k + cs.index(word[-1])] = 1.0
    for c in word[1:-1]:
        vec[k + cs.index(c)] += 1.0
    return vec


def encode_sentence(sentence: Sentence, cs: CharSet = DEFAULT_CHARSET) -> np.ndarray:
    """Stack per-token semi-character vectors into a (T, 3K) matrix."""
    return np.stack([encode_semichar(t.lowercased, cs) for t in sentence.tokens])


# ---------------------------------------------------------------------------
# Corpus and stopword files


def read_corpus_tsv(path: str | Path) -> list[Sentence]:
    """Read a `label<TAB>text` file, one example per line."""
    sentences = []
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read corpus {path}: {e}") from e
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise DataError(f"{path}:{n}: expected 'label<TAB>text'")
        label_str, text = parts
        try:
            label = int(label_str)
        except ValueError as e:
            raise DataError(f"{path}:{n}: bad label {label_str!r}") from e
        sentences.append(tokenize(text, label))
    if not sentences:
        raise DataError(f"{path}: no examples")
    return sentences


def write_corpus_tsv(path: str | Path, corpus: list[Sentence]) -> None:
    lines = [f"{s.label if s.label is not None else 0}\t{s.text()}" for s in corpus]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """One lowercase word per line; defaults to the bundled list."""
    if path is None:
        text = _data.read_text("stopwords.txt")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())
