"""``spanlab`` command line: corpus statistics, conversion, evaluation,
training, prediction, sweeps, error reports and the synthetic corpus."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import checkpoint
from .config import TrainConfig, load_config, with_env_seed
from .corpus import (
    Dataset,
    Sentence,
    export_distribution_csv,
    read_conll,
    read_token_sentences,
    render_distribution,
    serialize_conll,
    tag_distribution,
    write_conll,
)
from .harness import (
    error_report,
    evaluate_all,
    predict_dataset,
    record_to_dict,
    render_errors,
    sweep,
    train_with_early_stopping,
)
from .metrics import evaluate, render_per_type, render_table
from .scheme import get_scheme
from .seq2seq_tagger import MalformedStats
from .synth import SynthConfig, SyntheticCorpus, separable_config

log = logging.getLogger("spanlab")


def _emit(text: str, csv_text: str | None, csv_path: str | None) -> None:
    sys.stdout.write(text)
    if csv_path and csv_text is not None:
        Path(csv_path).write_text(csv_text, encoding="utf-8")
        log.info("wrote %s", csv_path)


def _read(path: str, scheme: str, lenient: bool = False, name: str | None = None) -> Dataset:
    return read_conll(path, get_scheme(scheme), name=name, lenient=lenient)


# ---------------------------------------------------------------- subcommands


def cmd_stats(args) -> int:
    data = [_read(p, args.scheme, args.lenient) for p in args.files]
    dist = tag_distribution(data)
    csv_text = export_distribution_csv(dist)
    _emit(csv_text if args.format == "csv" else render_distribution(dist), csv_text, args.csv)
    return 0


def cmd_convert(args) -> int:
    data = _read(args.input, args.source, args.lenient)
    write_conll(args.output, data.converted(get_scheme(args.target)))
    return 0


def cmd_eval(args) -> int:
    gold = _read(args.gold, args.scheme, args.lenient, name="gold")
    pred = _read(args.pred, args.scheme, args.lenient, name="pred")
    if [s.tokens for s in gold] != [s.tokens for s in pred]:
        raise ValueError("gold and prediction files must contain the same tokens")
    report = evaluate(gold, [s.tags for s in pred], args.policy)
    cols = {"Value": report}
    text = render_table(cols)
    csv_text = render_table(cols, "csv")
    if args.per_type:
        text += "\n" + render_per_type(cols, gold.scheme.entity_types)
        csv_text += render_per_type(cols, gold.scheme.entity_types, "csv")
    if args.format == "json":
        text = json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = csv_text
    _emit(text, csv_text, args.csv)
    return 0


TRAIN_FLAGS = {
    "lr": "learning_rate",
    "batch": "batch_size",
    "epochs": "max_epochs",
    "patience": "patience",
    "alpha": "alpha",
    "weight_decay": "weight_decay",
    "seed": "seed",
    "dim": "dim",
    "max_len": "max_len",
    "min_count": "min_count",
    "template": "template",
    "beam": "beam",
    "strategy": "strategy",
}


def resolve_config(args) -> TrainConfig:
    """Defaults, then the config file, then ``SPANLAB_SEED``, then explicit flags."""
    config = load_config(args.config) if getattr(args, "config", None) else with_env_seed(TrainConfig())
    changes = {}
    for flag, name in TRAIN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "few_shot", None) is not None:
        changes["few_shot"] = args.few_shot == "on"
    # a short --epochs run should not trip over the inherited patience
    if "max_epochs" in changes and "patience" not in changes:
        changes["patience"] = min(config.patience, changes["max_epochs"])
    return config.replace(**changes) if changes else config


def _train(args, kind: str) -> int:
    config = resolve_config(args)
    train = _read(args.train, args.scheme, args.lenient, name="train")
    dev = _read(args.dev, args.scheme, args.lenient, name="dev")
    record, _ = train_with_early_stopping(kind, config, train, dev, args.policy, out=args.out, csv_out=args.log_csv)
    best = record.best_row
    print(f"best epoch {record.best_epoch} of {len(record.epochs)}; dev P {best.dev_precision:.4f} "
          f"R {best.dev_recall:.4f} F1 {best.dev_f1:.4f}; stopped early: {record.stopped_early}")
    if args.record:
        Path(args.record).write_text(json.dumps(record_to_dict(record), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_train_encoder(args) -> int:
    return _train(args, "encoder")


def cmd_train_seq2seq(args) -> int:
    return _train(args, "seq2seq")


def cmd_predict(args) -> int:
    model, config = checkpoint.load(args.model)
    text = Path(args.input).read_text(encoding="utf-8")
    strategy = args.strategy or config.get("strategy", "beam")
    beam = args.beam or config.get("beam", 3)
    stats = MalformedStats()
    if strategy == "likelihood":
        data = read_conll(args.input, model.scheme, name="input", lenient=args.lenient)
        tokens = [list(s.tokens) for s in data]
        tags = predict_dataset(model, data, strategy, beam, stats)
    else:
        tokens = read_token_sentences(text)
        tags = predict_dataset(model, tokens, strategy, beam, stats)
    Path(args.output).write_text(serialize_conll(Sentence(t, g) for t, g in zip(tokens, tags)), encoding="utf-8")
    if model.kind == "seq2seq":
        log.info("aligned output: %d unknown, %d padded, %d truncated", stats.unknown, stats.padded, stats.truncated)
    return 0


def cmd_evaluate_all(args) -> int:
    model, config = checkpoint.load(args.model)
    data = [_read(p, args.scheme or model.scheme.kind.value, args.lenient, name=n)
            for n, p in zip(args.names or [Path(p).stem for p in args.files], args.files)]
    strategy = args.strategy or config.get("strategy", "beam")
    bundle = evaluate_all(model, data, args.schemes.split(","), args.policy, strategy, config.get("beam", 3))
    text = bundle.render_overall()
    csv_text = bundle.render_overall("csv")
    for s in bundle.schemes:
        text += "\n" + bundle.render_per_type(s)
        csv_text += "\n" + bundle.render_per_type(s, "csv")
    _emit(csv_text if args.format == "csv" else text, csv_text, args.csv)
    return 0


def _parse_values(axis: str, raw: str):
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if axis in ("lr", "learning_rate", "alpha"):
        return [float(v) for v in items]
    if axis == "template":
        return [int(v) for v in items]
    return items


def cmd_sweep(args) -> int:
    config = resolve_config(args)
    train = _read(args.train, args.scheme, args.lenient, name="train")
    dev = _read(args.dev, args.scheme, args.lenient, name="dev")
    result = sweep(args.axis, _parse_values(args.axis, args.values), config, args.kind, train, dev,
                   args.policy, args.workers)
    csv_text = result.render("csv")
    _emit(csv_text if args.format == "csv" else result.render(), csv_text, args.csv)
    return 0


def cmd_error_report(args) -> int:
    gold = _read(args.gold, args.scheme, args.lenient, name="gold")
    pred = _read(args.pred, args.scheme, args.lenient, name="pred")
    examples = error_report(gold, [s.tags for s in pred], args.k, args.policy)
    csv_text = render_errors(examples, "csv")
    _emit(csv_text if args.format == "csv" else render_errors(examples), csv_text, args.csv)
    return 0


def cmd_synth(args) -> int:
    overrides = {k: v for k, v in (("n_train", args.n_train), ("n_dev", args.n_dev), ("n_test", args.n_test),
                                   ("n_ood", args.n_ood), ("seed", args.seed)) if v is not None}
    config = separable_config(**overrides) if args.separable else SynthConfig(**overrides)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    splits = SyntheticCorpus(config).splits()
    scheme = get_scheme(args.scheme)
    for name, data in splits.items():
        write_conll(out / f"{name}.conll", data.converted(scheme))
    dist = tag_distribution([d.converted(scheme) for d in splits.values()])
    (out / "distribution.csv").write_text(export_distribution_csv(dist), encoding="utf-8")
    print(render_distribution(dist), end="")
    return 0


# ---------------------------------------------------------------- parser


def _common(p, scheme=True):
    if scheme:
        p.add_argument("--scheme", choices=("full", "simple"), default="full")
    p.add_argument("--lenient", action="store_true", help="ignore columns beyond the second")
    p.add_argument("--policy", choices=("repair", "strict"), default="repair",
                   help="handling of I- tags that do not continue a span")


def _report_opts(p, formats=("text", "csv")):
    p.add_argument("--format", choices=formats, default="text", help="stdout format")
    p.add_argument("--csv", metavar="PATH", help="also write the report as CSV")


def _train_opts(p, seq2seq: bool):
    p.add_argument("--config", help="[spanlab] key-value config file")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)
    if seq2seq:
        p.add_argument("--template", type=int, choices=(1, 2, 3, 4))
        p.add_argument("--few-shot", dest="few_shot", choices=("on", "off"))
        p.add_argument("--beam", type=int)
        p.add_argument("--strategy", choices=("beam", "likelihood"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spanlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="tag distribution of one or more files")
    _common(p)
    _report_opts(p)
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("convert", help="rewrite a file under another tag scheme")
    p.add_argument("--from", dest="source", choices=("full", "simple"), default="full")
    p.add_argument("--to", dest="target", choices=("full", "simple"), default="simple")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("eval", help="score a prediction file against gold")
    _common(p)
    _report_opts(p, ("text", "csv", "json"))
    p.add_argument("--per-type", action="store_true")
    p.add_argument("gold")
    p.add_argument("pred")
    p.set_defaults(func=cmd_eval)

    for name, seq2seq, func in (("train-encoder", False, cmd_train_encoder), ("train-seq2seq", True, cmd_train_seq2seq)):
        p = sub.add_parser(name, help=f"train the {'seq2seq' if seq2seq else 'encoder'} tagger with early stopping")
        _common(p)
        _train_opts(p, seq2seq)
        p.add_argument("--log-csv", help="per-epoch training log")
        p.add_argument("--record", help="run record as JSON")
        p.add_argument("train")
        p.add_argument("dev")
        p.add_argument("out", help="checkpoint path")
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="tag a file with a trained checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", choices=("beam", "likelihood"))
    p.add_argument("--beam", type=int)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("input", help="token-per-line file (tags needed only for likelihood decoding)")
    p.add_argument("output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate-all", help="score a checkpoint on several datasets and schemes")
    p.add_argument("--model", required=True)
    p.add_argument("--scheme", choices=("full", "simple"), help="tag scheme of the input files")
    p.add_argument("--schemes", default="full,simple")
    p.add_argument("--names", nargs="*", help="column labels (default: file stems)")
    p.add_argument("--strategy", choices=("beam", "likelihood"))
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--policy", choices=("repair", "strict"), default="repair")
    _report_opts(p)
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_evaluate_all)

    p = sub.add_parser("sweep", help="one run per hyperparameter value")
    _common(p)
    _train_opts(p, True)
    _report_opts(p)
    p.add_argument("--kind", choices=("encoder", "seq2seq"), default="encoder")
    p.add_argument("--axis", choices=("lr", "learning_rate", "alpha", "template", "strategy"), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("train")
    p.add_argument("dev")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("error-report", help="top-k sentences by token errors, with span mismatch categories")
    _common(p)
    _report_opts(p)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("gold")
    p.add_argument("pred")
    p.set_defaults(func=cmd_error_report)

    p = sub.add_parser("synth", help="write the synthetic train/dev/test/ood corpus")
    p.add_argument("--scheme", choices=("full", "simple"), default="full")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-dev", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--n-ood", type=int)
    p.add_argument("--separable", action="store_true", help="no ambiguous or overlapping entity words")
    p.add_argument("outdir")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"spanlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
