"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
Every command writes a manifest beside its outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, adversary, metrics, nn
from .classifier import ClassifierConfig, InputFormat, TextClassifier, finetune_da, finetune_adv, train_classifier
from .experiment import (
    ExperimentConfig,
    evaluate_wer,
    make_pipeline,
    render_report,
    resolve_corpus_path,
    run_matrix,
    sha256_file,
    write_manifest,
)
from .metrics import EvalReport
from .perturb import AttackType, corrupt_corpus, write_alignment_tsv
from .recognizer import (
    RecognizerConfig,
    RecognizerModel,
    RecognizerPipeline,
    parse_policy,
    train_recognizer,
)
from .text import DataError, load_stopwords, read_corpus_tsv, write_corpus_tsv
from .classifier import input_repr_fn


def _manifest_for(out_file: Path, command: str, config: dict, inputs: dict, seed: int | None):
    out_file.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(
        out_file.parent,
        command=command,
        config=config,
        inputs=inputs,
        outputs={"main": out_file.name},
        seed=seed,
    )


def _command_line(args) -> str:
    return "typoguard " + " ".join(args._raw_argv)


def _load_recognizer_pipeline(model_path, policy_spec, background_path):
    model = RecognizerModel.load(model_path)
    background = RecognizerModel.load(background_path) if background_path else None
    return RecognizerPipeline(model, parse_policy(policy_spec, background))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_train_recognizer(args) -> int:
    corpus = read_corpus_tsv(args.corpus)
    config = RecognizerConfig(vocab_cap=args.vocab_cap, hidden=args.hidden,
                              epochs=args.epochs, lr=args.lr, seed=args.seed)
    stopwords = load_stopwords(args.stopwords) if args.stopwords else None
    model = train_recognizer(corpus, config, stopwords)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    _manifest_for(out, _command_line(args), config.as_dict(),
                  {"corpus": Path(args.corpus)}, args.seed)
    print(f"wrote {out} (vocab {len(model.vocab)}, hidden {model.hidden})")
    return 0


def cmd_train_classifier(args) -> int:
    train = read_corpus_tsv(args.train)
    dev = read_corpus_tsv(args.dev)
    config = ClassifierConfig(epochs=args.epochs, lr=args.lr, seed=args.seed,
                              vocab_cap=args.vocab_cap, word_dim=args.word_dim,
                              char_dim=args.char_dim, char_emb=args.char_emb,
                              hidden=args.hidden)
    model = train_classifier(train, dev, InputFormat.parse(args.format), config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    _manifest_for(out, _command_line(args), {**config.as_dict(), "format": args.format},
                  {"train": Path(args.train), "dev": Path(args.dev)}, args.seed)
    print(f"wrote {out} ({args.format}, vocab {len(model.vocab)})")
    return 0


def cmd_finetune(args) -> int:
    model = TextClassifier.load(args.model)
    train = read_corpus_tsv(args.train)
    if args.mode == "da":
        tuned = finetune_da(model, train, args.seed, epochs=args.epochs)
    else:
        if not args.dev:
            raise DataError("adversarial fine-tuning requires --dev")
        dev = read_corpus_tsv(args.dev)
        tuned = finetune_adv(model, train, dev, adversary.successful_flips,
                             args.seed, attack=AttackType.parse(args.attack),
                             max_rounds=args.rounds, epochs_per_round=args.epochs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tuned.save(out)
    inputs = {"model": Path(args.model), "train": Path(args.train)}
    if args.dev:
        inputs["dev"] = Path(args.dev)
    _manifest_for(out, _command_line(args),
                  {"mode": args.mode, "epochs": args.epochs, "rounds": args.rounds,
                   "attack": args.attack, "seed": args.seed},
                  inputs, args.seed)
    print(f"wrote {out}")
    return 0


def cmd_corrupt(args) -> int:
    corpus = read_corpus_tsv(args.infile)
    attack = AttackType.parse(args.attack)
    corrupted, records = corrupt_corpus(corpus, attack, args.seed, load_stopwords())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus_tsv(out, corrupted)
    outputs = {"main": out.name}
    if args.alignment:
        write_alignment_tsv(args.alignment, records)
        outputs["alignment"] = Path(args.alignment).name
    write_manifest(out.parent, command=_command_line(args),
                   config={"attack": attack.value, "seed": args.seed},
                   inputs={"corpus": Path(args.infile)}, outputs=outputs,
                   seed=args.seed)
    print(f"wrote {out} ({len(records)} corrupted words)")
    return 0


def cmd_recognize(args) -> int:
    pipeline = _load_recognizer_pipeline(args.model, args.policy, args.background)
    corpus = read_corpus_tsv(args.infile)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus_tsv(out, [pipeline.run(s) for s in corpus])
    inputs = {"corpus": Path(args.infile), "model": Path(args.model)}
    if args.background:
        inputs["background"] = Path(args.background)
    _manifest_for(out, _command_line(args), {"policy": args.policy}, inputs, None)
    print(f"wrote {out}")
    return 0


def _parse_pipeline_spec(spec: str):
    parts = dict(
        item.split("=", 1) if "=" in item else (_bad_spec(item), "")
        for item in spec.split(",") if item
    )
    if "classifier" not in parts:
        raise DataError("pipeline spec needs classifier=PATH")
    classifier = TextClassifier.load(parts["classifier"])
    recognizer = None
    if "recognizer" in parts:
        recognizer = _load_recognizer_pipeline(
            parts["recognizer"], parts.get("policy", "pass"), parts.get("background"))
    return classifier, recognizer


def _bad_spec(item: str):
    raise DataError(f"bad pipeline spec item {item!r}; expected key=value")


def cmd_attack(args) -> int:
    classifier, recognizer = _parse_pipeline_spec(args.pipeline_spec)
    pipeline = make_pipeline(classifier, recognizer)
    corpus = read_corpus_tsv(args.infile)
    if args.limit:
        corpus = corpus[: args.limit]
    attack = AttackType.parse(args.attack)
    budget = adversary.AttackBudget(order=args.order, strategy=args.strategy)
    rep = adversary.robustness(pipeline, corpus, attack, budget,
                               corpus_hash=sha256_file(args.infile))
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "tool_version": __version__,
        "command": _command_line(args),
        "robustness": rep.to_dict(include_results=True),
    }
    out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _manifest_for(out, _command_line(args),
                  {"attack": attack.value, "order": args.order, "strategy": args.strategy},
                  {"corpus": Path(args.infile)}, None)
    print(f"robustness {rep.value:.3f} (clean {rep.clean_accuracy:.3f}, "
          f"{rep.total_queries} queries); wrote {out}")
    return 0


def cmd_wer(args) -> int:
    model = RecognizerModel.load(args.model)
    background = RecognizerModel.load(args.background) if args.background else None
    pipelines = {
        spec: RecognizerPipeline(model, parse_policy(spec, background))
        for spec in args.policies.split(",")
    }
    corpus = read_corpus_tsv(args.infile)
    if args.limit:
        corpus = corpus[: args.limit]
    attacks = [AttackType.parse(t) for t in args.attacks.split(",")]
    corpus_hash = sha256_file(args.infile)
    grid = evaluate_wer(pipelines, corpus, attacks, args.seed,
                        vocab=model.vocab, corpus_hash=corpus_hash)
    report = metrics.assemble_report(
        tool_version=__version__, command=_command_line(args), seed=args.seed,
        config={"policies": args.policies, "attacks": args.attacks},
        corpus_hashes={"eval": corpus_hash}, wer=grid)
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    _manifest_for(out, _command_line(args), report.config,
                  {"corpus": Path(args.infile)}, args.seed)
    for name, row in grid.items():
        print(name, {k: round(v, 4) for k, v in row.items()})
    return 0


def cmd_sensitivity(args) -> int:
    pipeline = _load_recognizer_pipeline(args.model, args.policy, args.background)
    corpus = read_corpus_tsv(args.infile)
    if args.limit:
        corpus = corpus[: args.limit]
    if args.repr == "word":
        if not args.classifier:
            raise DataError("--repr word needs --classifier for its vocabulary")
        clf = TextClassifier.load(args.classifier)
        repr_fn = input_repr_fn(InputFormat.WORD, clf.vocab, clf.charset)
    else:
        repr_fn = input_repr_fn(InputFormat.CHAR, None, pipeline.foreground.charset)
    attack = AttackType.parse(args.attack)
    rep = metrics.sensitivity(pipeline.run, repr_fn, corpus, attack, args.seed,
                              repr_name=args.repr)
    rep.corpus_hash = sha256_file(args.infile)
    report = metrics.assemble_report(
        tool_version=__version__, command=_command_line(args), seed=args.seed,
        config={"policy": args.policy, "repr": args.repr, "attack": args.attack},
        corpus_hashes={"eval": rep.corpus_hash}, sensitivity=rep.to_dict())
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    _manifest_for(out, _command_line(args), report.config,
                  {"corpus": Path(args.infile)}, args.seed)
    print(f"sensitivity {rep.mean:.4f} over {len(rep.per_sentence)} sentences "
          f"({rep.skipped} skipped); wrote {out}")
    return 0


def cmd_matrix(args) -> int:
    cfg = ExperimentConfig.load(args.config, args.set or [])
    report = run_matrix(cfg, args.out_dir, command=_command_line(args))
    print(render_report(report))
    print(f"\nwrote {Path(args.out_dir) / 'report.json'}")
    return 0


def cmd_report(args) -> int:
    report = EvalReport.from_json(Path(args.infile).read_text(encoding="utf-8"))
    if args.format == "json":
        print(report.to_json())
    else:
        print(render_report(report))
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="typoguard",
                                description="Misspelling attacks, word-recognition "
                                            "defenses, and robustness metrics.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train-recognizer", help="train a word recognizer")
    tr.add_argument("--corpus", required=True)
    tr.add_argument("--vocab-cap", type=int, default=10_000)
    tr.add_argument("--hidden", type=int, default=50)
    tr.add_argument("--epochs", type=int, default=25)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--stopwords", default=None)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train_recognizer)

    tc = sub.add_parser("train-classifier", help="train a text classifier")
    tc.add_argument("--train", required=True)
    tc.add_argument("--dev", required=True)
    tc.add_argument("--format", choices=["word", "char", "wordchar"], default="word")
    tc.add_argument("--epochs", type=int, default=12)
    tc.add_argument("--lr", type=float, default=1e-3)
    tc.add_argument("--seed", type=int, default=0)
    tc.add_argument("--vocab-cap", type=int, default=10_000)
    tc.add_argument("--word-dim", type=int, default=64)
    tc.add_argument("--char-dim", type=int, default=32)
    tc.add_argument("--char-emb", type=int, default=16)
    tc.add_argument("--hidden", type=int, default=0)
    tc.add_argument("--out", required=True)
    tc.set_defaults(func=cmd_train_classifier)

    ft = sub.add_parser("finetune", help="fine-tune a classifier (da or adv)")
    ft.add_argument("--mode", choices=["da", "adv"], required=True)
    ft.add_argument("--model", required=True)
    ft.add_argument("--train", required=True)
    ft.add_argument("--dev", default=None)
    ft.add_argument("--attack", default="all")
    ft.add_argument("--epochs", type=int, default=5)
    ft.add_argument("--rounds", type=int, default=10)
    ft.add_argument("--seed", type=int, default=0)
    ft.add_argument("--out", required=True)
    ft.set_defaults(func=cmd_finetune)

    co = sub.add_parser("corrupt", help="corrupt a corpus with one attack type")
    co.add_argument("--in", dest="infile", required=True)
    co.add_argument("--attack", default="all")
    co.add_argument("--seed", type=int, default=0)
    co.add_argument("--out", required=True)
    co.add_argument("--alignment", default=None)
    co.set_defaults(func=cmd_corrupt)

    rec = sub.add_parser("recognize", help="run a recognizer pipeline over a corpus")
    rec.add_argument("--model", required=True)
    rec.add_argument("--background", default=None)
    rec.add_argument("--policy", default="pass")
    rec.add_argument("--in", dest="infile", required=True)
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=cmd_recognize)

    at = sub.add_parser("attack", help="worst-case attack search on a pipeline")
    at.add_argument("--pipeline-spec", required=True,
                    help="classifier=PATH[,recognizer=PATH][,policy=pass|neutral:W|background]"
                         "[,background=PATH]")
    at.add_argument("--attack", default="all")
    at.add_argument("--order", type=int, default=1)
    at.add_argument("--strategy", choices=["greedy", "exhaustive"], default="greedy")
    at.add_argument("--in", dest="infile", required=True)
    at.add_argument("--limit", type=int, default=0)
    at.add_argument("--report", required=True)
    at.set_defaults(func=cmd_attack)

    we = sub.add_parser("wer", help="word error rate of recognizer pipelines")
    we.add_argument("--model", required=True)
    we.add_argument("--background", default=None)
    we.add_argument("--policies", default="pass",
                    help="comma list: pass, neutral:WORD, background")
    we.add_argument("--attacks", default="all")
    we.add_argument("--in", dest="infile", required=True)
    we.add_argument("--limit", type=int, default=0)
    we.add_argument("--seed", type=int, default=0)
    we.add_argument("--report", required=True)
    we.set_defaults(func=cmd_wer)

    se = sub.add_parser("sensitivity", help="unique-output sensitivity of a pipeline")
    se.add_argument("--model", required=True)
    se.add_argument("--background", default=None)
    se.add_argument("--policy", default="pass")
    se.add_argument("--repr", choices=["char", "word"], default="char")
    se.add_argument("--classifier", default=None)
    se.add_argument("--attack", default="all")
    se.add_argument("--in", dest="infile", required=True)
    se.add_argument("--limit", type=int, default=0)
    se.add_argument("--seed", type=int, default=0)
    se.add_argument("--report", required=True)
    se.set_defaults(func=cmd_sensitivity)

    mx = sub.add_parser("matrix", help="full attack x defense evaluation grid")
    mx.add_argument("--config", default=None)
    mx.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    mx.add_argument("--out-dir", required=True)
    mx.set_defaults(func=cmd_matrix)

    rp = sub.add_parser("report", help="render a report file")
    rp.add_argument("--in", dest="infile", required=True)
    rp.add_argument("--format", choices=["table", "json"], default="table")
    rp.set_defaults(func=cmd_report)

    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args = parser.parse_args(argv)
    args._raw_argv = argv
    try:
        return args.func(args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except nn.NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
