"""Evaluation metrics: word error rate, recognizer sensitivity, and the
merged evaluation report.

Sensitivity measures how many distinct downstream inputs an attacker can
induce through the recognizer: for each sentence one target word is
sampled, all its single-edit variants are pushed through the recognizer,
and the outputs are keyed by the downstream classifier's input
representation. Fewer unique keys = fewer degrees of freedom for the
attacker.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .perturb import AttackType, KeyboardAdjacency, token_editable, word_perturbations
from .text import DEFAULT_CHARSET, CharSet, DataError, Sentence, Vocabulary, load_stopwords


# ---------------------------------------------------------------------------
# Word error rate


@dataclass
class WerReport:
    total_words: int
    wrong_words: int
    rate: float
    oov_fraction: float | None = None
    breakdown: dict[str, dict] = field(default_factory=dict)
    corpus_hash: str | None = None

    def to_dict(self) -> dict:
        return {
            "total_words": self.total_words,
            "wrong_words": self.wrong_words,
            "rate": self.rate,
            "oov_fraction": self.oov_fraction,
            "breakdown": self.breakdown,
            "corpus_hash": self.corpus_hash,
        }


def wer(
    hyp: list[Sentence],
    ref: list[Sentence],
    vocab: Vocabulary | None = None,
    corruptions=None,
    corpus_hash: str | None = None,
) -> WerReport:
    """Position-wise exact-match error rate over word tokens.

    Corpora must be aligned (equal sentence and per-sentence token counts;
    single-token perturbations preserve both). Non-word tokens are skipped.
    When corruption records are supplied the report also breaks the rate
    down by the edit family that corrupted each position ('clean' for
    untouched words); the bucket rates weight-average to the total.
    """
    if len(hyp) != len(ref):
        raise DataError(f"corpus length mismatch: {len(hyp)} vs {len(ref)}")
    kind_at = {}
    if corruptions:
        kind_at = {(r.sentence_index, r.token_index): r.kind.value for r in corruptions}
    buckets: dict[str, list[int]] = {}
    total = wrong = oov = 0
    for idx, (h, r) in enumerate(zip(hyp, ref)):
        if len(h.tokens) != len(r.tokens):
            raise DataError(f"sentence {idx}: token count mismatch "
                            f"({len(h.tokens)} vs {len(r.tokens)})")
        for t, rtok in enumerate(r.tokens):
            if not rtok.is_word:
                continue
            total += 1
            miss = h.tokens[t].lowercased != rtok.lowercased
            wrong += miss
            if vocab is not None and rtok.lowercased not in vocab:
                oov += 1
            key = kind_at.get((idx, t), "clean")
            cell = buckets.setdefault(key, [0, 0])
            cell[0] += 1
            cell[1] += miss
    if total == 0:
        raise DataError("no word tokens to score")
    return WerReport(
        total_words=total,
        wrong_words=wrong,
        rate=wrong / total,
        oov_fraction=(oov / total) if vocab is not None else None,
        breakdown={
            k: {"total": n, "wrong": w, "rate": w / n}
            for k, (n, w) in sorted(buckets.items())
        } if corruptions else {},
        corpus_hash=corpus_hash,
    )


# ---------------------------------------------------------------------------
# Sensitivity


@dataclass
class SentenceSensitivity:
    index: int
    token_index: int
    n_perturbations: int
    n_unique: int

    @property
    def fraction(self) -> float:
        return self.n_unique / self.n_perturbations


@dataclass
class SensitivityReport:
    mean: float
    attack: AttackType
    repr_name: str
    per_sentence: list[SentenceSensitivity]
    skipped: int = 0
    corpus_hash: str | None = None

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "attack": self.attack.value,
            "repr": self.repr_name,
            "skipped": self.skipped,
            "corpus_hash": self.corpus_hash,
            "per_sentence": [
                {"index": p.index, "token_index": p.token_index,
                 "n": p.n_perturbations, "unique": p.n_unique}
                for p in self.per_sentence
            ],
        }


def sensitivity(
    recognize,
    repr_fn,
    dataset: list[Sentence],
    attack: AttackType,
    seed: int,
    stopwords: frozenset[str] | None = None,
    charset: CharSet = DEFAULT_CHARSET,
    adjacency: KeyboardAdjacency | None = None,
    repr_name: str = "custom",
) -> SensitivityReport:
    """Expected fraction of unique downstream inputs under perturbation.

    Per sentence: pick one editable word uniformly (seeded), enumerate all
    its single-edit variants under ``attack``, run each variant sentence
    through ``recognize`` (None = identity), and key the outputs with
    ``repr_fn``. The per-sentence score is unique/total; the report's mean
    is unweighted over scored sentences. Sentences with no editable word
    (or none with candidates under this attack) are skipped and counted.

    Running with the same seed and dataset samples the same target words
    regardless of the recognizer, so per-sentence scores of two recognizers
    are directly comparable (paired).
    """
    stopwords = stopwords if stopwords is not None else load_stopwords()
    if recognize is None:
        recognize = lambda s: s
    rng = random.Random(seed)
    rows: list[SentenceSensitivity] = []
    skipped = 0
    for idx, s in enumerate(dataset):
        candidates = [
            i for i, tok in enumerate(s.tokens)
            if token_editable(tok, stopwords, charset)
            and word_perturbations(tok.lowercased, attack, charset, adjacency)
        ]
        if not candidates:
            skipped += 1
            continue
        target = rng.choice(candidates)
        variants = word_perturbations(s.tokens[target].lowercased, attack, charset, adjacency)
        outputs = {repr_fn(recognize(s.replace_token(target, v))) for v in variants}
        rows.append(SentenceSensitivity(idx, target, len(variants), len(outputs)))
    if not rows:
        raise DataError("no sentence had an editable word")
    mean = sum(r.fraction for r in rows) / len(rows)
    return SensitivityReport(mean, attack, repr_name, rows, skipped)


# ---------------------------------------------------------------------------
# Merged report


@dataclass
class EvalReport:
    tool_version: str
    command: str
    seed: int | None
    config: dict
    corpus_hashes: dict[str, str]
    sections: dict[str, object] = field(default_factory=dict)

    def add_section(self, name: str, payload: dict) -> None:
        """Attach a metric section, enforcing corpus provenance: a section
        carrying a corpus_hash must match one of the report's corpora."""
        h = payload.get("corpus_hash") if isinstance(payload, dict) else None
        if h is not None and h not in self.corpus_hashes.values():
            raise DataError(
                f"section {name!r} was computed on corpus {h[:12]}..., "
                "which is not part of this report"
            )
        self.sections[name] = payload

    def to_json(self) -> str:
        return json.dumps(
            {
                "tool_version": self.tool_version,
                "command": self.command,
                "seed": self.seed,
                "config": self.config,
                "corpus_hashes": self.corpus_hashes,
                "sections": self.sections,
            },
            sort_keys=True,
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "EvalReport":
        d = json.loads(text)
        return EvalReport(
            tool_version=d["tool_version"],
            command=d["command"],
            seed=d["seed"],
            config=d["config"],
            corpus_hashes=d["corpus_hashes"],
            sections=d["sections"],
        )


def assemble_report(
    tool_version: str,
    command: str,
    seed: int | None,
    config: dict,
    corpus_hashes: dict[str, str],
    **sections,
) -> EvalReport:
    """Merge metric payloads into one provenance-carrying document."""
    report = EvalReport(tool_version, command, seed, config, dict(corpus_hashes))
    for name, payload in sections.items():
        if payload is not None:
            report.add_section(name, payload)
    return report
