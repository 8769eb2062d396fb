"""Character-level perturbation generators and corpus corruption.

Four edit families over the internal characters of a word: swapping two
adjacent characters, dropping one, inserting a letter, and substituting a
QWERTY-adjacent letter. First and last characters are never touched, and
generators never emit the unedited word.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from pathlib import Path

from . import data as _data
from .text import (
    DEFAULT_CHARSET,
    LETTERS,
    CharSet,
    DataError,
    Sentence,
    Token,
    is_perturbable,
)


class AttackType(enum.Enum):
    SWAP = "swap"
    DROP = "drop"
    ADD = "add"
    KEY = "key"
    ALL = "all"

    @staticmethod
    def parse(name: str) -> "AttackType":
        try:
            return AttackType(name.lower())
        except ValueError:
            raise DataError(f"unknown attack type {name!r}") from None


SINGLE_TYPES = (AttackType.SWAP, AttackType.DROP, AttackType.ADD, AttackType.KEY)


# ---------------------------------------------------------------------------
# Keyboard adjacency


class KeyboardAdjacency:
    """Directed letter -> substitute-letters map loaded from a data file."""

    def __init__(self, table: dict[str, str]):
        for c, nbrs in table.items():
            for n in nbrs:
                if n not in LETTERS:
                    raise DataError(f"adjacency target {n!r} is not a letter")
        self.table = table

    def neighbors(self, ch: str) -> str:
        return self.table.get(ch, "")

    @staticmethod
    def from_file(path: str | Path) -> "KeyboardAdjacency":
        return KeyboardAdjacency(_parse_adjacency(Path(path).read_text(encoding="utf-8")))

    @staticmethod
    def default() -> "KeyboardAdjacency":
        return KeyboardAdjacency(_parse_adjacency(_data.read_text("qwerty_adjacency.txt")))


def _parse_adjacency(text: str) -> dict[str, str]:
    table = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise DataError(f"adjacency line {n}: expected 'char: neighbors'")
        key, _, nbrs = line.partition(":")
        key = key.strip()
        if len(key) != 1:
            raise DataError(f"adjacency line {n}: key must be one character")
        table[key] = nbrs.strip()
    return table


_DEFAULT_ADJACENCY: KeyboardAdjacency | None = None


def default_adjacency() -> KeyboardAdjacency:
    global _DEFAULT_ADJACENCY
    if _DEFAULT_ADJACENCY is None:
        _DEFAULT_ADJACENCY = KeyboardAdjacency.default()
    return _DEFAULT_ADJACENCY


# ---------------------------------------------------------------------------
# Word-level generators
#
# Each returns unique strings in enumeration order (position, then
# character), excluding the original word.


def _dedup(candidates: list[str], original: str) -> list[str]:
    seen = set()
    out = []
    for c in candidates:
        if c != original and c not in seen:
            seen.add(c)
            out.append(c)
    return out


def swaps(word: str) -> list[str]:
    """Transpose each adjacent pair of internal characters."""
    if len(word) < 4:
        raise DataError("swap needs a word of length >= 4")
    cands = []
    for i in range(1, len(word) - 2):
        cands.append(word[:i] + word[i + 1] + word[i] + word[i + 2:])
    return _dedup(cands, word)


def drops(word: str) -> list[str]:
    """Remove each internal character."""
    if len(word) < 4:
        raise DataError("drop needs a word of length >= 4")
    cands = [word[:i] + word[i + 1:] for i in range(1, len(word) - 1)]
    return _dedup(cands, word)


def adds(word: str, cs: CharSet = DEFAULT_CHARSET) -> list[str]:
    """Insert each lowercase letter at each internal position."""
    if len(word) < 4:
        raise DataError("add needs a word of length >= 4")
    letters = [c for c in LETTERS if c in cs]
    cands = []
    for i in range(1, len(word)):
        for c in letters:
            cands.append(word[:i] + c + word[i:])
    return _dedup(cands, word)


def keyboard_subs(word: str, adj: KeyboardAdjacency | None = None) -> list[str]:
    """Replace each internal letter with its keyboard neighbors."""
    if len(word) < 4:
        raise DataError("keyboard substitution needs a word of length >= 4")
    adj = adj or default_adjacency()
    cands = []
    for i in range(1, len(word) - 1):
        for c in adj.neighbors(word[i]):
            cands.append(word[:i] + c + word[i + 1:])
    return _dedup(cands, word)


def word_perturbations(
    word: str,
    attack: AttackType,
    cs: CharSet = DEFAULT_CHARSET,
    adj: KeyboardAdjacency | None = None,
) -> list[str]:
    """All distinct single-edit variants of ``word`` under ``attack``."""
    if attack is AttackType.SWAP:
        return swaps(word)
    if attack is AttackType.DROP:
        return drops(word)
    if attack is AttackType.ADD:
        return adds(word, cs)
    if attack is AttackType.KEY:
        return keyboard_subs(word, adj)
    merged = []
    for kind in SINGLE_TYPES:
        merged.extend(word_perturbations(word, kind, cs, adj))
    return _dedup(merged, word)


# ---------------------------------------------------------------------------
# Sentence-level perturbation sets


@dataclass(frozen=True)
class Edit:
    """A single-token edit; applying it leaves all other tokens untouched."""

    token_index: int
    kind: AttackType
    result: str

    def apply(self, s: Sentence) -> Sentence:
        return s.replace_token(self.token_index, self.result)


@dataclass(frozen=True)
class PerturbationSet:
    origin: Sentence
    edits: tuple[Edit, ...]

    def realized(self) -> list[Sentence]:
        return [e.apply(self.origin) for e in self.edits]

    def __len__(self) -> int:
        return len(self.edits)


def token_editable(
    token: Token,
    stopwords: frozenset[str] | set[str],
    cs: CharSet = DEFAULT_CHARSET,
) -> bool:
    """Perturbable, and every character is representable in the charset."""
    return is_perturbable(token, stopwords) and cs.encodes_exactly(token.lowercased)


def perturbation_set(
    s: Sentence,
    attack: AttackType,
    stopwords: frozenset[str] | set[str],
    cs: CharSet = DEFAULT_CHARSET,
    adj: KeyboardAdjacency | None = None,
) -> PerturbationSet:
    """Union over perturbable tokens of their single-edit variants.

    Edits are ordered by token index, then attack kind, then the generator's
    own enumeration order; this order is what makes attack search runs
    reproducible.
    """
    edits: list[Edit] = []
    for i, tok in enumerate(s.tokens):
        if not token_editable(tok, stopwords, cs):
            continue
        kinds = SINGLE_TYPES if attack is AttackType.ALL else (attack,)
        seen: set[str] = set()
        for kind in kinds:
            for variant in word_perturbations(tok.lowercased, kind, cs, adj):
                if variant not in seen:
                    seen.add(variant)
                    edits.append(Edit(i, kind, variant))
    return PerturbationSet(s, tuple(edits))


# ---------------------------------------------------------------------------
# Corpus corruption


@dataclass(frozen=True)
class CorruptionRecord:
    sentence_index: int
    token_index: int
    kind: AttackType
    original: str
    corrupted: str


def corrupt_sentence(
    s: Sentence,
    attack: AttackType,
    rng: random.Random,
    stopwords: frozenset[str] | set[str],
    cs: CharSet = DEFAULT_CHARSET,
    adj: KeyboardAdjacency | None = None,
    sentence_index: int = 0,
) -> tuple[Sentence, list[CorruptionRecord]]:
    """Replace every editable word with one sampled perturbation.

    For the mixed attack a type is sampled per word first; if the sampled
    type has no candidates for that word (e.g. swap on 'aaaa'), a type that
    does is sampled instead. Words where no type applies stay unchanged.
    """
    out = s
    records = []
    for i, tok in enumerate(s.tokens):
        if not token_editable(tok, stopwords, cs):
            continue
        word = tok.lowercased
        if attack is AttackType.ALL:
            kind = rng.choice(SINGLE_TYPES)
            cands = word_perturbations(word, kind, cs, adj)
            if not cands:
                usable = [k for k in SINGLE_TYPES if word_perturbations(word, k, cs, adj)]
                if not usable:
                    continue
                kind = rng.choice(usable)
                cands = word_perturbations(word, kind, cs, adj)
        else:
            kind = attack
            cands = word_perturbations(word, kind, cs, adj)
            if not cands:
                continue
        corrupted = rng.choice(cands)
        out = out.replace_token(i, corrupted)
        records.append(CorruptionRecord(sentence_index, i, kind, word, corrupted))
    return out, records


def corrupt_corpus(
    corpus: list[Sentence],
    attack: AttackType,
    seed: int,
    stopwords: frozenset[str] | set[str],
    cs: CharSet = DEFAULT_CHARSET,
    adj: KeyboardAdjacency | None = None,
) -> tuple[list[Sentence], list[CorruptionRecord]]:
    """Corrupt every sentence; deterministic for a given seed."""
    rng = random.Random(seed)
    corrupted = []
    records: list[CorruptionRecord] = []
    for idx, s in enumerate(corpus):
        cs_out, recs = corrupt_sentence(s, attack, rng, stopwords, cs, adj, idx)
        corrupted.append(cs_out)
        records.extend(recs)
    return corrupted, records


def write_alignment_tsv(path: str | Path, records: list[CorruptionRecord]) -> None:
    """One `original<TAB>corrupted` pair per line."""
    lines = [f"{r.original}\t{r.corrupted}" for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
