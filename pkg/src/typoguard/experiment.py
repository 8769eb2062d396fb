"""Experiment configuration, run manifests, and the attack/defense matrix.

Configs are line-oriented ``key = value`` files with ``[section]`` headers
(INI syntax); command-line ``--set section.key=value`` overrides file
values. Every command writes a manifest next to its outputs recording the
config hash, input-file content hashes, and the tool version, so any
output file is attributable and deterministic runs are byte-reproducible.
"""

from __future__ import annotations

import configparser
import functools
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__, adversary, metrics
from .classifier import (
    ClassifierConfig,
    InputFormat,
    TextClassifier,
    accuracy,
    finetune_adv,
    finetune_da,
    train_classifier,
)
from .perturb import AttackType, corrupt_corpus
from .recognizer import (
    Background,
    Neutral,
    PassThrough,
    RecognizerConfig,
    RecognizerModel,
    RecognizerPipeline,
    train_recognizer,
)
from .text import DataError, Sentence, load_stopwords, read_corpus_tsv
from . import data as _data


def sha256_bytes(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Configuration

DEFAULTS: dict[str, dict[str, str]] = {
    "corpus": {
        "train": "builtin:sentiment_train",
        "dev": "builtin:sentiment_dev",
        "test": "builtin:sentiment_test",
        "background": "builtin:background",
    },
    "recognizer": {
        "vocab_cap": "120",
        "hidden": "50",
        "epochs": "25",
        "lr": "0.001",
        "neutral_word": "a",
        "background_epochs": "15",
        "background_vocab_cap": "100000",
        "background_hidden": "50",
    },
    "classifier": {
        "format": "word",
        "epochs": "12",
        "lr": "0.001",
        "vocab_cap": "10000",
        "word_dim": "64",
        "char_dim": "32",
        "char_emb": "16",
        "hidden": "0",
    },
    "attack": {
        "types": "all",
        "orders": "1",
        "strategy": "greedy",
    },
    "finetune": {
        "da_epochs": "5",
        "adv_rounds": "10",
        "adv_epochs": "3",
        "adv_attack": "all",
    },
    "run": {
        "seed": "0",
        "defenses": "none,passthrough,neutral,background,da,adv",
        "limit_train": "0",
        "limit_dev": "0",
        "limit_eval": "0",
        "save_attack_results": "0",
    },
}


@dataclass
class ExperimentConfig:
    values: dict[str, dict[str, str]]
    base_dir: Path

    @staticmethod
    def load(path: str | Path | None, overrides: list[str] | None = None) -> "ExperimentConfig":
        values = {s: dict(kv) for s, kv in DEFAULTS.items()}
        base = Path.cwd()
        if path is not None:
            base = Path(path).resolve().parent
            parser = configparser.ConfigParser()
            try:
                with open(path, encoding="utf-8") as f:
                    parser.read_file(f)
            except (OSError, configparser.Error) as e:
                raise DataError(f"cannot read config {path}: {e}") from e
            for section in parser.sections():
                if section not in values:
                    raise DataError(f"unknown config section [{section}]")
                for key, val in parser.items(section):
                    if key not in values[section]:
                        raise DataError(f"unknown config key {section}.{key}")
                    values[section][key] = val
        for item in overrides or []:
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise DataError(f"override must look like section.key=value: {item!r}")
            dotted, val = item.split("=", 1)
            section, key = dotted.split(".", 1)
            if section not in values or key not in values[section]:
                raise DataError(f"unknown config key {dotted}")
            values[section][key] = val
        return ExperimentConfig(values, base)

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def get_int(self, section: str, key: str) -> int:
        try:
            return int(self.get(section, key))
        except ValueError:
            raise DataError(f"config {section}.{key} must be an integer") from None

    def get_float(self, section: str, key: str) -> float:
        try:
            return float(self.get(section, key))
        except ValueError:
            raise DataError(f"config {section}.{key} must be a number") from None

    def get_list(self, section: str, key: str) -> list[str]:
        return [v.strip() for v in self.get(section, key).split(",") if v.strip()]

    def corpus_file(self, role: str) -> Path:
        return resolve_corpus_path(self.get("corpus", role), self.base_dir)

    def as_dict(self) -> dict:
        return {s: dict(kv) for s, kv in sorted(self.values.items())}

    def hash(self) -> str:
        return sha256_bytes(canonical_json(self.as_dict()).encode())


def resolve_corpus_path(spec: str, base_dir: Path | None = None) -> Path:
    """Resolve a corpus reference; ``builtin:NAME`` points at bundled data."""
    if spec.startswith("builtin:"):
        return _data.corpus_path(spec.split(":", 1)[1])
    p = Path(spec)
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    if not p.exists():
        raise DataError(f"corpus file not found: {p}")
    return p


# ---------------------------------------------------------------------------
# Manifests


def write_manifest(out_dir: Path, *, command: str, config: dict,
                   inputs: dict[str, Path], outputs: dict[str, str],
                   seed: int | None) -> Path:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "seed": seed,
        "config_hash": sha256_bytes(canonical_json(config).encode()),
        "config": config,
        "inputs": {
            role: {"path": str(p), "sha256": sha256_file(p)}
            for role, p in sorted(inputs.items())
        },
        "outputs": dict(sorted(outputs.items())),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Pipelines


def make_pipeline(classifier: TextClassifier, recognizer: RecognizerPipeline | None = None):
    """Classify-fn over sentences; with a recognizer the input is repaired
    first (the composed defended model)."""
    if recognizer is None:
        return lambda s, gold=None: classifier.predict(s, gold)

    def defended(s: Sentence, gold: int | None = None):
        return classifier.predict(recognizer.run(s), gold)

    return defended


def evaluate_clean(pipeline, dataset: list[Sentence]) -> float:
    correct = sum(1 for s in dataset if pipeline(s, s.label).label == s.label)
    return correct / len(dataset)


# ---------------------------------------------------------------------------
# Cached training stages


def _cached(cache_dir: Path, stage: str, key_obj, train_fn, load_fn, save_attr="save"):
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = sha256_bytes(canonical_json(key_obj).encode())[:16]
    path = cache_dir / f"{stage}-{key}.bin"
    if path.exists():
        return load_fn(path), path
    model = train_fn()
    getattr(model, save_attr)(path)
    return model, path


def _limited(corpus: list[Sentence], limit: int) -> list[Sentence]:
    return corpus[:limit] if limit > 0 else corpus


# ---------------------------------------------------------------------------
# The attack/defense matrix

DEFENSE_NAMES = ("none", "passthrough", "neutral", "background", "da", "adv")


def run_matrix(cfg: ExperimentConfig, out_dir: str | Path, command: str = "matrix") -> metrics.EvalReport:
    """Train (or load cached) models, evaluate the full defense-by-attack
    grid, and write report.json / table.txt / manifest.json to out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = out_dir / "models"
    seed = cfg.get_int("run", "seed")
    stopwords = load_stopwords()

    defenses = cfg.get_list("run", "defenses")
    unknown = set(defenses) - set(DEFENSE_NAMES)
    if unknown:
        raise DataError(f"unknown defenses: {sorted(unknown)}")

    paths = {role: cfg.corpus_file(role) for role in ("train", "dev", "test")}
    if "background" in defenses:
        paths["background"] = cfg.corpus_file("background")
    hashes = {role: sha256_file(p) for role, p in paths.items()}

    train = _limited(read_corpus_tsv(paths["train"]), cfg.get_int("run", "limit_train"))
    dev = _limited(read_corpus_tsv(paths["dev"]), cfg.get_int("run", "limit_dev"))
    test = _limited(read_corpus_tsv(paths["test"]), cfg.get_int("run", "limit_eval"))

    # --- classifier ---------------------------------------------------------
    fmt = InputFormat.parse(cfg.get("classifier", "format"))
    clf_config = ClassifierConfig(
        epochs=cfg.get_int("classifier", "epochs"),
        lr=cfg.get_float("classifier", "lr"),
        seed=seed,
        vocab_cap=cfg.get_int("classifier", "vocab_cap"),
        word_dim=cfg.get_int("classifier", "word_dim"),
        char_dim=cfg.get_int("classifier", "char_dim"),
        char_emb=cfg.get_int("classifier", "char_emb"),
        hidden=cfg.get_int("classifier", "hidden"),
    )
    clf_key = {"config": clf_config.as_dict(), "format": fmt.value,
               "train": hashes["train"], "dev": hashes["dev"],
               "limit": cfg.get_int("run", "limit_train")}
    classifier, _ = _cached(cache, "classifier", clf_key,
                            lambda: train_classifier(train, dev, fmt, clf_config),
                            TextClassifier.load)

    # --- recognizers ----------------------------------------------------------
    needs_fg = any(d in defenses for d in ("passthrough", "neutral", "background"))
    fg = bg = None
    if needs_fg:
        fg_config = RecognizerConfig(
            vocab_cap=cfg.get_int("recognizer", "vocab_cap"),
            hidden=cfg.get_int("recognizer", "hidden"),
            epochs=cfg.get_int("recognizer", "epochs"),
            lr=cfg.get_float("recognizer", "lr"),
            seed=seed,
        )
        fg_key = {"config": fg_config.as_dict(), "train": hashes["train"],
                  "limit": cfg.get_int("run", "limit_train")}
        fg, _ = _cached(cache, "recognizer-fg", fg_key,
                        lambda: train_recognizer(train, fg_config, stopwords),
                        RecognizerModel.load)
    if "background" in defenses:
        bg_corpus = read_corpus_tsv(paths["background"])
        bg_config = RecognizerConfig(
            vocab_cap=cfg.get_int("recognizer", "background_vocab_cap"),
            hidden=cfg.get_int("recognizer", "background_hidden"),
            epochs=cfg.get_int("recognizer", "background_epochs"),
            lr=cfg.get_float("recognizer", "lr"),
            seed=seed,
        )
        bg_key = {"config": bg_config.as_dict(), "train": hashes["background"]}
        bg, _ = _cached(cache, "recognizer-bg", bg_key,
                        lambda: train_recognizer(bg_corpus, bg_config, stopwords),
                        RecognizerModel.load)

    # --- fine-tuned baselines -------------------------------------------------
    variants: dict[str, object] = {}
    for name in defenses:
        if name == "none":
            variants[name] = make_pipeline(classifier)
        elif name == "passthrough":
            variants[name] = make_pipeline(classifier, RecognizerPipeline(fg, PassThrough()))
        elif name == "neutral":
            neutral = Neutral(cfg.get("recognizer", "neutral_word"))
            variants[name] = make_pipeline(classifier, RecognizerPipeline(fg, neutral))
        elif name == "background":
            variants[name] = make_pipeline(classifier, RecognizerPipeline(fg, Background(bg)))
        elif name == "da":
            da_key = {"base": clf_key, "epochs": cfg.get_int("finetune", "da_epochs"), "seed": seed}
            da_model, _ = _cached(
                cache, "classifier-da", da_key,
                lambda: finetune_da(classifier, train, seed,
                                    epochs=cfg.get_int("finetune", "da_epochs"),
                                    stopwords=stopwords),
                TextClassifier.load)
            variants[name] = make_pipeline(da_model)
        elif name == "adv":
            adv_attack = AttackType.parse(cfg.get("finetune", "adv_attack"))
            adv_key = {"base": clf_key, "rounds": cfg.get_int("finetune", "adv_rounds"),
                       "epochs": cfg.get_int("finetune", "adv_epochs"),
                       "attack": adv_attack.value, "seed": seed}
            attacker = functools.partial(adversary.successful_flips, stopwords=stopwords)
            adv_model, _ = _cached(
                cache, "classifier-adv", adv_key,
                lambda: finetune_adv(classifier, train, dev, attacker, seed,
                                     attack=adv_attack,
                                     max_rounds=cfg.get_int("finetune", "adv_rounds"),
                                     epochs_per_round=cfg.get_int("finetune", "adv_epochs"),
                                     stopwords=stopwords),
                TextClassifier.load)
            variants[name] = make_pipeline(adv_model)

    # --- evaluation grid --------------------------------------------------------
    attack_types = [AttackType.parse(t) for t in cfg.get_list("attack", "types")]
    orders = [int(o) for o in cfg.get_list("attack", "orders")]
    strategy = cfg.get("attack", "strategy")
    save_results = cfg.get_int("run", "save_attack_results") != 0

    grid: dict[str, dict[str, float]] = {}
    detail: dict[str, dict] = {}
    for name, pipeline in variants.items():
        grid[name] = {"clean": evaluate_clean(pipeline, test)}
        detail[name] = {}
        for atk in attack_types:
            for order in orders:
                budget = adversary.AttackBudget(order=order, strategy=strategy)
                rep = adversary.robustness(pipeline, test, atk, budget,
                                           stopwords=stopwords,
                                           corpus_hash=hashes["test"])
                cell = f"{atk.value}@{order}"
                grid[name][cell] = rep.value
                detail[name][cell] = rep.to_dict(include_results=save_results)

    report = metrics.assemble_report(
        tool_version=__version__,
        command=command,
        seed=seed,
        config=cfg.as_dict(),
        corpus_hashes=hashes,
        accuracy_grid=grid,
        robustness=detail,
    )
    (out_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out_dir / "table.txt").write_text(render_grid("accuracy (clean / under attack)", grid) + "\n",
                                       encoding="utf-8")
    write_manifest(
        out_dir,
        command=command,
        config=cfg.as_dict(),
        inputs=paths,
        outputs={"report": "report.json", "table": "table.txt"},
        seed=seed,
    )
    return report


# ---------------------------------------------------------------------------
# Text rendering


def render_grid(title: str, grid: dict[str, dict[str, float]], scale: float = 100.0) -> str:
    """Fixed-width text table from a dict of rows, each a dict of cells."""
    columns: list[str] = []
    for row in grid.values():
        for col in row:
            if col not in columns:
                columns.append(col)
    name_w = max([len(r) for r in grid] + [len("variant")]) + 2
    col_w = max([len(c) for c in columns] + [6]) + 2
    lines = [title, ""]
    lines.append("variant".ljust(name_w) + "".join(c.rjust(col_w) for c in columns))
    for name, row in grid.items():
        cells = "".join(
            (f"{row[c] * scale:.1f}" if c in row else "-").rjust(col_w) for c in columns
        )
        lines.append(name.ljust(name_w) + cells)
    return "\n".join(lines)


def render_report(report: metrics.EvalReport) -> str:
    """Text tables for every grid-shaped section of a report."""
    blocks = []
    for name, payload in report.sections.items():
        if name == "accuracy_grid":
            blocks.append(render_grid("accuracy (clean / under attack)", payload))
        elif name == "wer":
            blocks.append(render_grid("word error rate (%)", payload))
        elif name == "sensitivity":
            blocks.append(render_grid("sensitivity (% unique outputs)", payload))
    if not blocks:
        blocks.append("(no table-shaped sections in this report)")
    return "\n\n".join(blocks)


# ---------------------------------------------------------------------------
# WER / sensitivity experiment helpers (used by the CLI)


def evaluate_wer(
    pipelines: dict[str, RecognizerPipeline],
    corpus: list[Sentence],
    attacks: list[AttackType],
    seed: int,
    vocab=None,
    corpus_hash: str | None = None,
) -> dict[str, dict[str, float]]:
    """WER of each recognizer pipeline on each attack's corruption of the
    corpus. The same seed corrupts identically for every pipeline."""
    stopwords = load_stopwords()
    grid: dict[str, dict[str, float]] = {name: {} for name in pipelines}
    for atk in attacks:
        corrupted, records = corrupt_corpus(corpus, atk, seed, stopwords)
        for name, pipe in pipelines.items():
            hyp = [pipe.run(s) for s in corrupted]
            rep = metrics.wer(hyp, corpus, vocab=vocab, corruptions=records,
                              corpus_hash=corpus_hash)
            grid[name][atk.value] = rep.rate
    return grid
