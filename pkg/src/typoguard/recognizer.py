"""Word recognizer: a semi-character BiLSTM trained to reconstruct words
from synthetically corrupted sentences, plus backoff policies for UNK
predictions.

The foreground model is trained on in-domain text with a capped
vocabulary; rare/unseen words therefore come out as UNK and are resolved
by a backoff policy: pass the input through, substitute a fixed neutral
word, or consult a larger-vocabulary background model.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .modelio import load_model, save_model
from .perturb import AttackType, KeyboardAdjacency, corrupt_sentence, default_adjacency
from .text import (
    DEFAULT_CHARSET,
    CharSet,
    DataError,
    Sentence,
    Token,
    Vocabulary,
    build_vocab,
    encode_sentence,
    load_stopwords,
)


@dataclass(frozen=True)
class RecognizerConfig:
    vocab_cap: int = 10_000
    hidden: int = 50
    epochs: int = 25
    lr: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"

    def as_dict(self) -> dict:
        return {
            "vocab_cap": self.vocab_cap,
            "hidden": self.hidden,
            "epochs": self.epochs,
            "lr": self.lr,
            "seed": self.seed,
            "optimizer": self.optimizer,
        }


class RecognizerModel:
    """BiLSTM over semi-character vectors with a per-position vocab softmax."""

    def __init__(self, charset: CharSet, vocab: Vocabulary, fwd: nn.LstmParams,
                 bwd: nn.LstmParams, out_w: nn.Tensor, out_b: nn.Tensor,
                 train_config: dict | None = None):
        if out_w.data.shape != (2 * fwd.hidden_size, len(vocab)):
            raise ValueError("output projection must be (2H, |vocab|)")
        if fwd.input_size != 3 * charset.size:
            raise ValueError("input width must be 3x charset size")
        self.charset = charset
        self.vocab = vocab
        self.fwd = fwd
        self.bwd = bwd
        self.out_w = out_w
        self.out_b = out_b
        self.train_config = dict(train_config or {})

    @property
    def hidden(self) -> int:
        return self.fwd.hidden_size

    def params(self) -> list[nn.Tensor]:
        return [*self.fwd.tensors(), *self.bwd.tensors(), self.out_w, self.out_b]

    # -- training graph ----------------------------------------------------

    def loss(self, x: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> nn.Tensor:
        """Mean cross-entropy of word positions for one encoded sentence."""
        xs = [nn.Tensor(x[t : t + 1]) for t in range(x.shape[0])]
        states = nn.bilstm_forward(xs, self.fwd, self.bwd)
        logits = nn.add(nn.matmul(nn.concat(states, axis=0), self.out_w), self.out_b)
        return nn.softmax_xent_rows(logits, targets, mask)

    # -- inference ----------------------------------------------------------

    def logits(self, sentence: Sentence) -> np.ndarray:
        x = encode_sentence(sentence, self.charset)
        states = nn.bilstm_forward_np(x, self.fwd, self.bwd)
        return states @ self.out_w.data + self.out_b.data

    def recognize(self, sentence: Sentence) -> "RecognizerOutput":
        """Per-position argmax over the vocabulary; UNK argmax -> marker.

        Non-word tokens pass through untouched. Argmax ties resolve to the
        lowest id.
        """
        lg = self.logits(sentence)
        preds: list[str | None] = []
        for t, tok in enumerate(sentence.tokens):
            if not tok.is_word:
                preds.append(tok.surface)
                continue
            pid = int(np.argmax(lg[t]))
            preds.append(None if pid == self.vocab.unk_id else self.vocab.word_of(pid))
        return RecognizerOutput(sentence.tokens, sentence.label, tuple(preds))

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "kind": "recognizer",
            "hidden": self.hidden,
            "charset": self.charset.chars,
            "placeholder": self.charset.placeholder,
            "vocab_words": list(self.vocab.words[1:]),
            "vocab_cap": self.vocab.cap,
            "train_config": self.train_config,
        }
        tensors = {
            "fwd.wx": self.fwd.wx.data, "fwd.wh": self.fwd.wh.data, "fwd.b": self.fwd.b.data,
            "bwd.wx": self.bwd.wx.data, "bwd.wh": self.bwd.wh.data, "bwd.b": self.bwd.b.data,
            "out.w": self.out_w.data, "out.b": self.out_b.data,
        }
        save_model(path, meta, tensors)

    @staticmethod
    def load(path) -> "RecognizerModel":
        meta, t = load_model(path)
        if meta.get("kind") != "recognizer":
            raise DataError(f"{path}: not a recognizer model")
        charset = CharSet(meta["charset"], meta["placeholder"])
        vocab = Vocabulary.from_words(meta["vocab_words"], meta["vocab_cap"])
        fwd = nn.LstmParams(nn.parameter(t["fwd.wx"]), nn.parameter(t["fwd.wh"]), nn.parameter(t["fwd.b"]))
        bwd = nn.LstmParams(nn.parameter(t["bwd.wx"]), nn.parameter(t["bwd.wh"]), nn.parameter(t["bwd.b"]))
        return RecognizerModel(charset, vocab, fwd, bwd,
                               nn.parameter(t["out.w"]), nn.parameter(t["out.b"]),
                               meta.get("train_config"))


def _targets_for(sentence: Sentence, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    ids = np.zeros(len(sentence.tokens), dtype=np.int64)
    mask = np.zeros(len(sentence.tokens), dtype=bool)
    for t, tok in enumerate(sentence.tokens):
        if tok.is_word:
            ids[t] = vocab.id_of(tok.lowercased)
            mask[t] = True
    return ids, mask


def train_recognizer(
    corpus: list[Sentence],
    config: RecognizerConfig,
    stopwords: frozenset[str] | None = None,
    charset: CharSet = DEFAULT_CHARSET,
    adjacency: KeyboardAdjacency | None = None,
) -> RecognizerModel:
    """Train on freshly corrupted copies of the corpus (mixed attack).

    Every epoch resamples the corruption; the training target at each word
    position is the original word's vocabulary id (UNK for words beyond the
    cap), so the model learns both reconstruction and UNK-ing of rare words.
    Deterministic for a given config.
    """
    if not corpus:
        raise DataError("empty training corpus")
    if config.vocab_cap < 1:
        raise DataError("vocab_cap must be >= 1")
    stopwords = stopwords if stopwords is not None else load_stopwords()
    adjacency = adjacency or default_adjacency()

    vocab = build_vocab(corpus, config.vocab_cap)
    rng = np.random.default_rng(config.seed)
    k3 = 3 * charset.size
    fwd = nn.init_lstm(rng, k3, config.hidden)
    bwd = nn.init_lstm(rng, k3, config.hidden)
    out_w = nn.parameter(nn.glorot_uniform(rng, (2 * config.hidden, len(vocab))))
    out_b = nn.parameter(np.zeros(len(vocab), dtype=nn.DEFAULT_DTYPE))
    model = RecognizerModel(charset, vocab, fwd, bwd, out_w, out_b, config.as_dict())

    targets = [_targets_for(s, vocab) for s in corpus]
    opt = nn.make_optimizer(config.optimizer, model.params(), config.lr)

    for epoch in range(config.epochs):
        ep_rng = random.Random(config.seed * 1_000_003 + epoch + 1)
        order = list(range(len(corpus)))
        ep_rng.shuffle(order)
        for idx in order:
            ids, mask = targets[idx]
            if not mask.any():
                continue
            corrupted, _ = corrupt_sentence(corpus[idx], AttackType.ALL, ep_rng,
                                            stopwords, charset, adjacency)
            x = encode_sentence(corrupted, charset)
            loss = model.loss(x, ids, mask)
            if not np.isfinite(loss.data):
                raise nn.NumericError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            opt.step()
            opt.zero_grad()
    return model


# ---------------------------------------------------------------------------
# Backoff


@dataclass(frozen=True)
class RecognizerOutput:
    tokens: tuple[Token, ...]
    label: int | None
    predictions: tuple[str | None, ...]  # None marks an UNK prediction

    def unk_positions(self) -> list[int]:
        return [i for i, p in enumerate(self.predictions) if p is None]


class BackoffPolicy:
    pass


@dataclass(frozen=True)
class PassThrough(BackoffPolicy):
    """Keep the (possibly misspelled) input word at UNK positions."""


@dataclass(frozen=True)
class Neutral(BackoffPolicy):
    """Substitute a fixed neutral word at UNK positions."""

    word: str = "a"


@dataclass(frozen=True)
class Background(BackoffPolicy):
    """Consult a larger-vocabulary model at UNK positions; its own UNK
    falls back to the input word."""

    model: RecognizerModel


def apply_backoff(out: RecognizerOutput, policy: BackoffPolicy) -> Sentence:
    """Resolve UNK markers; the result never contains a marker and has the
    same token count as the input."""
    surfaces = list(out.predictions)
    unks = out.unk_positions()
    if unks:
        if isinstance(policy, PassThrough):
            for i in unks:
                surfaces[i] = out.tokens[i].surface
        elif isinstance(policy, Neutral):
            for i in unks:
                surfaces[i] = policy.word
        elif isinstance(policy, Background):
            bg = policy.model.recognize(Sentence(out.tokens, out.label))
            for i in unks:
                surfaces[i] = bg.predictions[i] if bg.predictions[i] is not None else out.tokens[i].surface
        else:
            raise TypeError(f"unknown backoff policy {policy!r}")
    return Sentence(tuple(Token(s) for s in surfaces), out.label)


@dataclass(frozen=True)
class RecognizerPipeline:
    """Foreground recognizer composed with a backoff policy."""

    foreground: RecognizerModel
    policy: BackoffPolicy = field(default_factory=PassThrough)

    def run(self, sentence: Sentence) -> Sentence:
        return apply_backoff(self.foreground.recognize(sentence), self.policy)

    def __call__(self, sentence: Sentence) -> Sentence:
        return self.run(sentence)


def parse_policy(spec: str, background: RecognizerModel | None = None) -> BackoffPolicy:
    """Parse a policy name: ``pass``, ``neutral:WORD`` (or ``neutral``), or
    ``background`` (requires a background model)."""
    if spec == "pass":
        return PassThrough()
    if spec == "neutral":
        return Neutral()
    if spec.startswith("neutral:"):
        word = spec.split(":", 1)[1]
        if not word:
            raise DataError("neutral policy needs a word, e.g. neutral:a")
        return Neutral(word)
    if spec == "background":
        if background is None:
            raise DataError("background policy requires a background model")
        return Background(background)
    raise DataError(f"unknown backoff policy {spec!r}")
