"""Downstream text classifiers in three input formats, plus the two
fine-tuning baselines (data augmentation and iterative adversarial
training).

Every format runs a sentence BiLSTM over per-token vectors and feeds the
concatenation of the forward state at the last position and the backward
state at the first position to a softmax head. Formats differ only in the
per-token vector: a word-embedding row, a character-BiLSTM encoding of the
token's spelling, or their concatenation.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

import numpy as np

from . import nn
from .modelio import load_model, save_model
from .perturb import AttackType, SINGLE_TYPES, word_perturbations, token_editable
from .text import (
    DEFAULT_CHARSET,
    CharSet,
    DataError,
    Sentence,
    Vocabulary,
    build_vocab,
    load_stopwords,
)


class InputFormat(enum.Enum):
    WORD = "word"
    CHAR = "char"
    WORD_CHAR = "wordchar"

    @staticmethod
    def parse(name: str) -> "InputFormat":
        try:
            return InputFormat(name.lower())
        except ValueError:
            raise DataError(f"unknown classifier format {name!r}") from None


@dataclass(frozen=True)
class ClassifierConfig:
    epochs: int = 15
    lr: float = 1e-3
    seed: int = 0
    vocab_cap: int = 10_000
    word_dim: int = 64
    char_dim: int = 32  # width of the char-BiLSTM word encoding (split evenly per direction)
    char_emb: int = 16
    hidden: int = 0  # 0 = per-format default (word/char 64, word+char 128)
    optimizer: str = "adam"

    def hidden_for(self, fmt: InputFormat) -> int:
        if self.hidden:
            return self.hidden
        return 128 if fmt is InputFormat.WORD_CHAR else 64

    def as_dict(self) -> dict:
        return {
            "epochs": self.epochs, "lr": self.lr, "seed": self.seed,
            "vocab_cap": self.vocab_cap, "word_dim": self.word_dim,
            "char_dim": self.char_dim, "char_emb": self.char_emb,
            "hidden": self.hidden, "optimizer": self.optimizer,
        }


@dataclass(frozen=True)
class Prediction:
    label: int
    confidence: float  # probability of the predicted label
    prob_true: float | None = None  # probability of the gold label, when given
    probs: tuple[float, ...] = ()


def input_repr_fn(fmt: InputFormat, vocab: Vocabulary | None, charset: CharSet = DEFAULT_CHARSET):
    """Canonical input key for a sentence under a format.

    Word format collapses every OOV word to the UNK id (closed vocabulary);
    char-bearing formats key on per-token character ids, so every distinct
    spelling stays distinct (open vocabulary).
    """

    def chars(tok) -> tuple[int, ...]:
        return tuple(charset.index(c) for c in tok.lowercased)

    if fmt is InputFormat.WORD:
        if vocab is None:
            raise ValueError("word format needs a vocabulary")
        return lambda s: tuple(vocab.id_of(t.lowercased) for t in s.tokens)
    if fmt is InputFormat.CHAR:
        return lambda s: tuple(chars(t) for t in s.tokens)
    if vocab is None:
        raise ValueError("word+char format needs a vocabulary")
    return lambda s: tuple((vocab.id_of(t.lowercased), chars(t)) for t in s.tokens)


class TextClassifier:
    """Sentence classifier; immutable after training, safe for concurrent
    read-only use."""

    def __init__(self, fmt: InputFormat, vocab: Vocabulary, charset: CharSet,
                 n_labels: int, params: dict[str, nn.Tensor],
                 char_hidden: int, train_config: dict | None = None):
        self.format = fmt
        self.vocab = vocab
        self.charset = charset
        self.n_labels = n_labels
        self.p = params
        self.char_hidden = char_hidden
        self.train_config = dict(train_config or {})
        self._repr = input_repr_fn(fmt, vocab, charset)

    # -- representation -----------------------------------------------------

    def input_repr(self, s: Sentence):
        return self._repr(s)

    def _char_lstm_params(self) -> tuple[nn.LstmParams, nn.LstmParams]:
        p = self.p
        return (
            nn.LstmParams(p["char_fwd.wx"], p["char_fwd.wh"], p["char_fwd.b"]),
            nn.LstmParams(p["char_bwd.wx"], p["char_bwd.wh"], p["char_bwd.b"]),
        )

    def _sent_lstm_params(self) -> tuple[nn.LstmParams, nn.LstmParams]:
        p = self.p
        return (
            nn.LstmParams(p["sent_fwd.wx"], p["sent_fwd.wh"], p["sent_fwd.b"]),
            nn.LstmParams(p["sent_bwd.wx"], p["sent_bwd.wh"], p["sent_bwd.b"]),
        )

    # -- training graph -----------------------------------------------------

    def _token_vectors(self, repr_key) -> list[nn.Tensor]:
        fmt = self.format
        if fmt is InputFormat.WORD:
            emb = nn.embedding_lookup(self.p["word_emb"], list(repr_key))
            return [nn.row(emb, t) for t in range(len(repr_key))]
        cf, cb = self._char_lstm_params()

        def encode_word(char_ids) -> nn.Tensor:
            ce = nn.embedding_lookup(self.p["char_emb"], list(char_ids))
            xs = [nn.row(ce, i) for i in range(len(char_ids))]
            hf = nn.lstm_run(xs, cf)
            hb = nn.lstm_run(xs, cb, reverse=True)
            return nn.concat((hf[-1], hb[0]), axis=1)

        if fmt is InputFormat.CHAR:
            return [encode_word(cids) for cids in repr_key]
        word_ids = [w for w, _ in repr_key]
        emb = nn.embedding_lookup(self.p["word_emb"], word_ids)
        return [
            nn.concat((nn.row(emb, t), encode_word(cids)), axis=1)
            for t, (_, cids) in enumerate(repr_key)
        ]

    def logits_graph(self, s: Sentence) -> nn.Tensor:
        xs = self._token_vectors(self.input_repr(s))
        sf, sb = self._sent_lstm_params()
        hf = nn.lstm_run(xs, sf)
        hb = nn.lstm_run(xs, sb, reverse=True)
        feat = nn.concat((hf[-1], hb[0]), axis=1)
        return nn.add(nn.matmul(feat, self.p["head.w"]), self.p["head.b"])

    def loss(self, s: Sentence, label: int) -> nn.Tensor:
        return nn.softmax_xent(self.logits_graph(s), label)

    # -- inference (numpy fast path) -----------------------------------------

    def _token_matrix_np(self, repr_key) -> np.ndarray:
        fmt = self.format
        if fmt is InputFormat.WORD:
            return self.p["word_emb"].data[np.asarray(repr_key, dtype=np.int64)]
        cf, cb = self._char_lstm_params()
        ce = self.p["char_emb"].data

        def encode_word(char_ids) -> np.ndarray:
            c = ce[np.asarray(char_ids, dtype=np.int64)]
            hf = nn.lstm_run_np(c, cf)
            hb = nn.lstm_run_np(c, cb, reverse=True)
            return np.concatenate([hf[-1], hb[0]])

        if fmt is InputFormat.CHAR:
            return np.stack([encode_word(cids) for cids in repr_key])
        word_ids = [w for w, _ in repr_key]
        wemb = self.p["word_emb"].data[np.asarray(word_ids, dtype=np.int64)]
        cenc = np.stack([encode_word(cids) for _, cids in repr_key])
        return np.concatenate([wemb, cenc], axis=1)

    def probs(self, s: Sentence) -> np.ndarray:
        x = self._token_matrix_np(self.input_repr(s))
        sf, sb = self._sent_lstm_params()
        hf = nn.lstm_run_np(x, sf)
        hb = nn.lstm_run_np(x, sb, reverse=True)
        feat = np.concatenate([hf[-1], hb[0]])
        return nn.softmax_np(feat @ self.p["head.w"].data + self.p["head.b"].data)

    def predict(self, s: Sentence, gold: int | None = None) -> Prediction:
        pr = self.probs(s)
        label = int(np.argmax(pr))
        return Prediction(
            label=label,
            confidence=float(pr[label]),
            prob_true=float(pr[gold]) if gold is not None else None,
            probs=tuple(float(v) for v in pr),
        )

    # -- bookkeeping ----------------------------------------------------------

    def params(self) -> list[nn.Tensor]:
        return [self.p[k] for k in sorted(self.p)]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.p.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in self.p.items():
            v.data[...] = snap[k]

    def clone(self) -> "TextClassifier":
        params = {k: nn.parameter(v.data.copy()) for k, v in self.p.items()}
        return TextClassifier(self.format, self.vocab, self.charset, self.n_labels,
                              params, self.char_hidden, self.train_config)

    def save(self, path) -> None:
        meta = {
            "kind": "classifier",
            "format": self.format.value,
            "n_labels": self.n_labels,
            "char_hidden": self.char_hidden,
            "charset": self.charset.chars,
            "placeholder": self.charset.placeholder,
            "vocab_words": list(self.vocab.words[1:]),
            "vocab_cap": self.vocab.cap,
            "train_config": self.train_config,
        }
        save_model(path, meta, {k: v.data for k, v in self.p.items()})

    @staticmethod
    def load(path) -> "TextClassifier":
        meta, tensors = load_model(path)
        if meta.get("kind") != "classifier":
            raise DataError(f"{path}: not a classifier model")
        charset = CharSet(meta["charset"], meta["placeholder"])
        vocab = Vocabulary.from_words(meta["vocab_words"], meta["vocab_cap"])
        params = {k: nn.parameter(v) for k, v in tensors.items()}
        return TextClassifier(InputFormat(meta["format"]), vocab, charset,
                              meta["n_labels"], params, meta["char_hidden"],
                              meta.get("train_config"))


def _init_params(fmt: InputFormat, vocab_size: int, charset_size: int,
                 n_labels: int, cfg: ClassifierConfig,
                 rng: np.random.Generator) -> tuple[dict[str, nn.Tensor], int]:
    params: dict[str, nn.Tensor] = {}
    token_dim = 0
    char_hidden = cfg.char_dim // 2
    if fmt in (InputFormat.WORD, InputFormat.WORD_CHAR):
        params["word_emb"] = nn.parameter(nn.glorot_uniform(rng, (vocab_size, cfg.word_dim)))
        token_dim += cfg.word_dim
    if fmt in (InputFormat.CHAR, InputFormat.WORD_CHAR):
        params["char_emb"] = nn.parameter(nn.glorot_uniform(rng, (charset_size, cfg.char_emb)))
        for name in ("char_fwd", "char_bwd"):
            p = nn.init_lstm(rng, cfg.char_emb, char_hidden)
            params[f"{name}.wx"], params[f"{name}.wh"], params[f"{name}.b"] = p.wx, p.wh, p.b
        token_dim += 2 * char_hidden
    hidden = cfg.hidden_for(fmt)
    for name in ("sent_fwd", "sent_bwd"):
        p = nn.init_lstm(rng, token_dim, hidden)
        params[f"{name}.wx"], params[f"{name}.wh"], params[f"{name}.b"] = p.wx, p.wh, p.b
    params["head.w"] = nn.parameter(nn.glorot_uniform(rng, (2 * hidden, n_labels)))
    params["head.b"] = nn.parameter(np.zeros(n_labels, dtype=nn.DEFAULT_DTYPE))
    return params, char_hidden


def accuracy(model: TextClassifier, dataset: list[Sentence]) -> float:
    correct = sum(1 for s in dataset if model.predict(s).label == s.label)
    return correct / len(dataset)


def _run_epochs(model: TextClassifier, examples: list[Sentence], epochs: int,
                lr: float, seed: int, optimizer: str = "adam") -> None:
    opt = nn.make_optimizer(optimizer, model.params(), lr)
    for epoch in range(epochs):
        order = list(range(len(examples)))
        random.Random(seed * 1_000_003 + epoch + 1).shuffle(order)
        for idx in order:
            s = examples[idx]
            loss = model.loss(s, s.label)
            if not np.isfinite(loss.data):
                raise nn.NumericError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            opt.step()
            opt.zero_grad()


def train_classifier(train: list[Sentence], dev: list[Sentence], fmt: InputFormat,
                     config: ClassifierConfig,
                     charset: CharSet = DEFAULT_CHARSET) -> TextClassifier:
    """Cross-entropy training with best-epoch selection by dev accuracy."""
    if not train or not dev:
        raise DataError("empty train or dev split")
    train_labels = {s.label for s in train}
    if None in train_labels or any(s.label is None for s in dev):
        raise DataError("all examples need labels")
    if not {s.label for s in dev} <= train_labels:
        raise DataError("dev labels not covered by train labels")
    n_labels = max(train_labels) + 1

    vocab = build_vocab(train, config.vocab_cap)
    rng = np.random.default_rng(config.seed)
    params, char_hidden = _init_params(fmt, len(vocab), charset.size, n_labels, config, rng)
    model = TextClassifier(fmt, vocab, charset, n_labels, params, char_hidden, config.as_dict())

    opt = nn.make_optimizer(config.optimizer, model.params(), config.lr)
    best_acc = -1.0
    best_snap = model.snapshot()
    for epoch in range(config.epochs):
        order = list(range(len(train)))
        random.Random(config.seed * 1_000_003 + epoch + 1).shuffle(order)
        for idx in order:
            s = train[idx]
            loss = model.loss(s, s.label)
            if not np.isfinite(loss.data):
                raise nn.NumericError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            opt.step()
            opt.zero_grad()
        acc = accuracy(model, dev)
        if acc > best_acc:
            best_acc = acc
            best_snap = model.snapshot()
    model.restore(best_snap)
    return model


# ---------------------------------------------------------------------------
# Fine-tuning baselines


def _random_one_char_attack(s: Sentence, rng: random.Random,
                            stopwords: frozenset[str], charset: CharSet) -> Sentence:
    """One uniformly chosen single-character edit on one editable word; the
    sentence is returned unchanged when nothing is editable."""
    candidates = [i for i, t in enumerate(s.tokens) if token_editable(t, stopwords, charset)]
    rng.shuffle(candidates)
    for i in candidates:
        kinds = [k for k in SINGLE_TYPES if word_perturbations(s.tokens[i].lowercased, k, charset)]
        if not kinds:
            continue
        kind = rng.choice(kinds)
        variant = rng.choice(word_perturbations(s.tokens[i].lowercased, kind, charset))
        return s.replace_token(i, variant)
    return s


def augment_with_attacks(train: list[Sentence], seed: int,
                         stopwords: frozenset[str] | None = None,
                         charset: CharSet = DEFAULT_CHARSET) -> list[Sentence]:
    """Originals plus one randomly attacked copy per example; the result is
    exactly twice the input."""
    stopwords = stopwords if stopwords is not None else load_stopwords()
    rng = random.Random(seed)
    return train + [_random_one_char_attack(s, rng, stopwords, charset) for s in train]


def finetune_da(model: TextClassifier, train: list[Sentence], seed: int,
                epochs: int = 5, lr: float = 1e-3,
                stopwords: frozenset[str] | None = None) -> TextClassifier:
    """Data augmentation: fine-tune on the attack-augmented training set."""
    tuned = model.clone()
    _run_epochs(tuned, augment_with_attacks(train, seed, stopwords, model.charset),
                epochs, lr, seed)
    return tuned


def finetune_adv(model: TextClassifier, train: list[Sentence], dev: list[Sentence],
                 attacker, seed: int, attack: AttackType = AttackType.ALL,
                 max_rounds: int = 10, epochs_per_round: int = 3, lr: float = 1e-3,
                 stopwords: frozenset[str] | None = None) -> TextClassifier:
    """Iterative adversarial fine-tuning.

    ``attacker(pipeline, sentence, attack)`` must return the successful
    adversarial variants of a sentence against the given pipeline (the
    adversary module's first-order search provides this). Each round adds
    one randomly chosen success per still-vulnerable example, fine-tunes,
    and re-measures dev adversarial accuracy; the loop stops once that stops
    improving and the best round's model is returned.
    """
    from .adversary import AttackBudget, robustness

    stopwords = stopwords if stopwords is not None else load_stopwords()
    budget = AttackBudget(order=1)

    def adv_accuracy(m: TextClassifier) -> float:
        pipeline = lambda s, gold=None: m.predict(s, gold)
        return robustness(pipeline, dev, attack, budget, stopwords=stopwords).value

    rng = random.Random(seed)
    rounds = [(model, adv_accuracy(model))]
    pool: list[Sentence] = []
    current = model
    for rnd in range(max_rounds):
        pipeline = lambda s, gold=None: current.predict(s, gold)
        added = 0
        for s in train:
            flips = attacker(pipeline, s, attack)
            if flips:
                pool.append(rng.choice(flips).with_label(s.label))
                added += 1
        if added == 0:
            break
        current = current.clone()
        _run_epochs(current, train + pool, epochs_per_round, lr,
                    seed=seed * 7_919 + rnd + 1)
        acc = adv_accuracy(current)
        rounds.append((current, acc))
        if acc <= rounds[-2][1]:
            break
    best = max(range(len(rounds)), key=lambda i: (rounds[i][1], -i))
    return rounds[best][0]
