"""Command-line entry points for the corpus, training, and evaluation workflow.

The CLI is a thin shell over the library: every subcommand parses arguments,
wires module operations together, and writes artifacts plus a provenance
file next to them. Outputs contain no wall-clock state, so a rerun with the
same config and seed is byte-identical.
"""

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import Corpus, entity_bias_table, export_bias_table, load_corpus, save_corpus, temporal_split
from .framework import case_report, load_checkpoint, make_endef_model, save_checkpoint
from .metrics import PredictionSet, aggregate_reports, evaluate, format_aggregate_table
from .models import BAG_OF_EMBEDDINGS, EncoderSpec, ScalarModel
from .recognizer import Gazetteer, recognize_corpus
from .synthetic import BiasSpec, generate
from .training import TrainConfig, evaluate_model, grid_search_alpha, train, train_baseline
from .vocab import build_vocabulary


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_provenance(out_dir, command, config, seed):
    _write_json(
        Path(out_dir) / "provenance.json",
        {
            "command": command,
            "config": config,
            "seed": seed,
            "versions": {
                "endef": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        },
    )


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config_file(path):
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


_TRAIN_OVERRIDES = ("lr", "batch_size", "max_epochs", "patience", "seed", "alpha", "beta", "max_len")


def _resolve_train_setup(args):
    """Precedence: CLI flag > config file > defaults."""
    config = _load_config_file(getattr(args, "config", None))
    train_section = dict(config.get("train", {}))
    for key in _TRAIN_OVERRIDES:
        value = getattr(args, key, None)
        if value is not None:
            train_section[key] = value
    if getattr(args, "augment_p", None) is not None:
        train_section.setdefault("augment", {})
        train_section["augment"] = dict(train_section["augment"])
        train_section["augment"]["probability"] = args.augment_p
    if getattr(args, "no_augment", False):
        train_section["augment"] = dict(train_section.get("augment", {}))
        train_section["augment"]["enabled"] = False
    cfg = TrainConfig.from_dict(train_section)
    detector_spec = EncoderSpec.from_payload(config.get("detector", {"kind": BAG_OF_EMBEDDINGS}))
    entity_spec = EncoderSpec.from_payload(
        config.get("entity_model", {"kind": BAG_OF_EMBEDDINGS, "embed_dim": 16, "hidden_dim": 32})
    )
    inference = dict(config.get("inference", {}))
    scale_by_alpha = bool(inference.get("scale_by_alpha", False))
    resolved = {
        "train": cfg.to_dict(),
        "detector": detector_spec.to_payload(),
        "entity_model": entity_spec.to_payload(),
        "inference": {"scale_by_alpha": scale_by_alpha},
    }
    return cfg, detector_spec, entity_spec, scale_by_alpha, resolved


def cmd_synthesize(args):
    spec = BiasSpec.from_file(args.spec)
    if args.seed is not None:
        spec = BiasSpec.from_payload({**spec.to_payload(), "seed": args.seed})
    out = _out_dir(args)
    corpus, ledger = generate(spec)
    save_corpus(corpus, out / "corpus.jsonl")
    export_bias_table(ledger, out / "ledger.tsv")
    _write_json(out / "bias_spec.json", spec.to_payload())
    _write_provenance(out, "synthesize", spec.to_payload(), spec.seed)
    print(f"wrote {len(corpus)} pieces to {out / 'corpus.jsonl'}")
    return 0


def cmd_split(args):
    corpus = load_corpus(args.corpus)
    result = temporal_split(corpus, args.train_ratio, args.val_ratio, args.seed)
    out = _out_dir(args)
    save_corpus(result.train, out / "train.jsonl")
    save_corpus(result.validation, out / "val.jsonl")
    save_corpus(result.test, out / "test.jsonl")
    config = {"corpus": str(args.corpus), "train_ratio": args.train_ratio, "val_ratio": args.val_ratio}
    _write_provenance(out, "split", config, args.seed)
    print(f"split sizes: train={len(result.train)} val={len(result.validation)} test={len(result.test)}")
    return 0


def cmd_recognize(args):
    corpus = load_corpus(args.corpus)
    gazetteer = Gazetteer.from_file(args.gazetteer, case_sensitive=not args.case_insensitive)
    recognized = recognize_corpus(corpus, gazetteer, dedupe=args.dedupe)
    out = _out_dir(args)
    save_corpus(recognized, out / "recognized.jsonl")
    config = {
        "corpus": str(args.corpus),
        "gazetteer": str(args.gazetteer),
        "case_sensitive": not args.case_insensitive,
        "dedupe": args.dedupe,
    }
    _write_provenance(out, "recognize", config, None)
    print(f"recognized entities for {len(recognized)} pieces")
    return 0


def _write_history(path, history):
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in history:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _train_single(mode, split_parts, cfg, detector_spec, entity_spec, out, scale_by_alpha):
    train_part, val_part, test_part = split_parts
    vocab = build_vocabulary(train_part, cfg.min_token_freq)
    from .corpus import SplitResult

    split = SplitResult(train_part, val_part, test_part if test_part is not None else Corpus((), name="unused"))
    if mode == "endef":
        model = make_endef_model(detector_spec, entity_spec, vocab, seed=cfg.seed, alpha=cfg.alpha, beta=cfg.beta)
        result = train(model, split, cfg)
    elif mode == "baseline":
        model = ScalarModel(detector_spec, vocab, seed=cfg.seed)
        result = train_baseline(model, split, cfg)
    elif mode == "entity-only":
        model = ScalarModel(entity_spec, vocab, seed=cfg.seed)
        result = train_baseline(model, split, cfg, input_mode="entities")
    else:
        raise ValueError(f"unknown training mode {mode!r}")
    save_checkpoint(result.model, out / "checkpoint.json")
    _write_history(out / "history.jsonl", result.history)
    report = None
    if test_part is not None:
        input_mode = "entities" if mode == "entity-only" else "tokens"
        report = evaluate_model(result.model, test_part, cfg.max_len, input_mode=input_mode, scale_by_alpha=scale_by_alpha)
        _write_json(out / "report.json", report.to_dict())
        (out / "report.txt").write_text(report.format_table() + "\n", encoding="utf-8")
    return result, report


def cmd_train(args):
    cfg, detector_spec, entity_spec, scale_by_alpha, resolved = _resolve_train_setup(args)
    train_part = load_corpus(args.train)
    val_part = load_corpus(args.val)
    test_part = load_corpus(args.test) if args.test else None
    out = _out_dir(args)
    split_parts = (train_part, val_part, test_part)
    if args.runs <= 1:
        result, report = _train_single(args.mode, split_parts, cfg, detector_spec, entity_spec, out, scale_by_alpha)
        if report is not None:
            print(report.format_table())
    else:
        from dataclasses import replace

        reports = []
        for r in range(args.runs):
            run_cfg = replace(cfg, seed=cfg.seed + r)
            run_dir = out / f"run-{r:02d}"
            run_dir.mkdir(parents=True, exist_ok=True)
            _, report = _train_single(args.mode, split_parts, run_cfg, detector_spec, entity_spec, run_dir, scale_by_alpha)
            if report is not None:
                reports.append(report)
        if reports:
            agg = aggregate_reports(reports)
            _write_json(out / "aggregate.json", agg)
            print(format_aggregate_table(agg))
    _write_provenance(out, "train", {**resolved, "mode": args.mode, "runs": args.runs}, cfg.seed)
    return 0


def _load_predictions(path):
    scores, labels = [], []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                scores.append(float(row["score"]))
                labels.append(int(row["label"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: bad prediction record: {exc}") from None
    return PredictionSet(np.array(scores), np.array(labels))


def cmd_evaluate(args):
    if args.predictions:
        pred = _load_predictions(args.predictions)
        report = evaluate(pred, maxfpr=args.maxfpr)
        config = {"predictions": str(args.predictions), "maxfpr": args.maxfpr}
    else:
        if not (args.checkpoint and args.corpus):
            raise ValueError("evaluate needs either --predictions or both --checkpoint and --corpus")
        model = load_checkpoint(args.checkpoint)
        corpus = load_corpus(args.corpus)
        report = evaluate_model(model, corpus, maxfpr=args.maxfpr)
        config = {"checkpoint": str(args.checkpoint), "corpus": str(args.corpus), "maxfpr": args.maxfpr}
    out = _out_dir(args)
    _write_json(out / "report.json", report.to_dict())
    (out / "report.txt").write_text(report.format_table() + "\n", encoding="utf-8")
    _write_provenance(out, "evaluate", config, None)
    print(report.format_table())
    return 0


def cmd_bias_report(args):
    corpus = load_corpus(args.corpus)
    rows = entity_bias_table(corpus, args.boundary)
    out = _out_dir(args)
    export_bias_table(rows, out / "bias_table.tsv")
    _write_provenance(out, "bias-report", {"corpus": str(args.corpus), "boundary": args.boundary}, None)
    print(f"wrote {len(rows)} audit rows to {out / 'bias_table.tsv'}")
    return 0


def cmd_case_report(args):
    model = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    rows = case_report(model, corpus, scale_by_alpha=args.scale_by_alpha)
    out = _out_dir(args)
    with (out / "cases.jsonl").open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    config = {"checkpoint": str(args.checkpoint), "corpus": str(args.corpus), "scale_by_alpha": args.scale_by_alpha}
    _write_provenance(out, "case-report", config, None)
    print(f"wrote {len(rows)} case rows to {out / 'cases.jsonl'}")
    return 0


def cmd_grid_alpha(args):
    cfg, detector_spec, entity_spec, _, resolved = _resolve_train_setup(args)
    train_part = load_corpus(args.train)
    val_part = load_corpus(args.val)
    from .corpus import SplitResult

    split = SplitResult(train_part, val_part, Corpus((), name="unused"))
    best_alpha, rows = grid_search_alpha(split, cfg, detector_spec, entity_spec)
    out = _out_dir(args)
    with (out / "alpha_grid.tsv").open("w", encoding="utf-8") as fh:
        fh.write("alpha\tval_macf1\tbest_epoch\n")
        for row in rows:
            fh.write(f"{row['alpha']:.1f}\t{row['val_macf1']:.6f}\t{row['best_epoch']}\n")
    _write_json(out / "best_alpha.json", {"alpha": best_alpha})
    _write_provenance(out, "grid-alpha", resolved, cfg.seed)
    print(f"best alpha: {best_alpha:.1f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="endef", description="Entity-debiasing training and evaluation toolkit.")
    parser.add_argument("--version", action="version", version=f"endef {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="generate a synthetic bias-injection corpus")
    p.add_argument("--spec", required=True, help="BiasSpec JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the seed in the recipe file")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("split", help="temporal train/validation/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--train-ratio", type=float, default=0.6)
    p.add_argument("--val-ratio", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("recognize", help="fill entity lists via gazetteer matching")
    p.add_argument("--corpus", required=True)
    p.add_argument("--gazetteer", required=True)
    p.add_argument("--case-insensitive", action="store_true")
    p.add_argument("--dedupe", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("train", help="train a detector (fused, baseline, or entity-only)")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--mode", choices=("endef", "baseline", "entity-only"), default="endef")
    p.add_argument("--runs", type=int, default=1, help="sequential seeded runs to aggregate")
    for key, typ in (
        ("lr", float),
        ("batch-size", int),
        ("max-epochs", int),
        ("patience", int),
        ("seed", int),
        ("alpha", float),
        ("beta", float),
        ("max-len", int),
    ):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=typ, default=None)
    p.add_argument("--augment-p", type=float, default=None)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metric report from a checkpoint+corpus or a predictions file")
    p.add_argument("--predictions", default=None, help="JSONL with per-line {score, label}")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--maxfpr", type=float, default=0.1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bias-report", help="entity bias audit table (TSV)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--boundary", type=int, required=True, help="period boundary timestamp")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bias_report)

    p = sub.add_parser("case-report", help="per-sample diagnostic probabilities")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--scale-by-alpha", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_case_report)

    p = sub.add_parser("grid-alpha", help="grid search the fusion weight over {0.0, ..., 1.0}")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--config", default=None)
    for key, typ in (("lr", float), ("batch-size", int), ("max-epochs", int), ("patience", int), ("seed", int), ("beta", float)):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=typ, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_grid_alpha)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: report and exit nonzero
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
