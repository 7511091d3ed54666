"""Experiment orchestration: early-stopped training, sweeps, four-way
evaluation and top-error reports."""
from __future__ import annotations

import copy
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checkpoint
from . import encoder_tagger as enc
from . import seq2seq_tagger as s2s
from .config import TrainConfig, rng_stream
from .corpus import Dataset
from .errors import SchemeMismatch
from .metrics import EvalReport, evaluate, format_grid, pct, render_per_type, render_table
from .scheme import FULL, SIMPLE, TagScheme, get_scheme
from .spans import Policy, Span, extract_spans, full_to_simple

log = logging.getLogger(__name__)

MODEL_KINDS = ("encoder", "seq2seq")


class EarlyStopper:
    """Tracks the best F1; an epoch that does not strictly improve it uses up patience."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, f1: float) -> bool:
        """Record ``f1`` for ``epoch``; True means stop now."""
        if f1 > self.best:
            self.best, self.best_epoch, self.bad_epochs = f1, epoch, 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    dev_loss: float | None
    dev_precision: float
    dev_recall: float
    dev_f1: float
    dev_accuracy: float


@dataclass
class RunRecord:
    kind: str
    config: dict
    epochs: list[EpochRow] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def best_row(self) -> EpochRow:
        return self.epochs[self.best_epoch - 1]

    def to_csv(self) -> str:
        header = ["epoch", "train_loss", "dev_loss", "dev_precision", "dev_recall", "dev_f1", "dev_accuracy"]
        rows = [
            [r.epoch, repr(r.train_loss), "" if r.dev_loss is None else repr(r.dev_loss),
             repr(r.dev_precision), repr(r.dev_recall), repr(r.dev_f1), repr(r.dev_accuracy)]
            for r in self.epochs
        ]
        return format_grid(header, rows, "csv")


def new_model(kind: str, train: Dataset, config: TrainConfig):
    if kind == "encoder":
        return enc.EncoderModel.from_sentences(train.sentences, train.scheme, config)
    if kind == "seq2seq":
        return s2s.Seq2SeqModel.from_sentences(train.sentences, train.scheme, config)
    raise ValueError(f"unknown model kind {kind!r}")


def predict_dataset(model, data: Dataset | Sequence[Sequence[str]], strategy: str = "beam", beam: int = 3,
                    stats: s2s.MalformedStats | None = None) -> list[list[str]]:
    """Tag every sentence. Seq2seq outputs are aligned to sentence length;
    the likelihood strategy needs gold tags, so ``data`` must be a Dataset."""
    if isinstance(data, Dataset):
        token_lists = [s.tokens for s in data.sentences]
    else:
        token_lists = [list(t) for t in data]
    if model.kind == "encoder":
        return enc.predict_batch(model, token_lists)
    if strategy == "likelihood" and not isinstance(data, Dataset):
        raise ValueError("likelihood decoding needs a gold-tagged dataset")
    gold = [s.tags for s in data.sentences] if strategy == "likelihood" else [None] * len(token_lists)
    return [s2s.predict(model, toks, strategy, beam, g, stats) for toks, g in zip(token_lists, gold)]


def _train_epoch(kind, model, train: Dataset, config: TrainConfig, epoch: int) -> float:
    order = rng_stream(config.seed, "shuffle", epoch).permutation(len(train.sentences))
    losses = []
    for i in range(0, len(order), config.batch_size):
        batch = [train.sentences[j] for j in order[i : i + config.batch_size]]
        if kind == "encoder":
            losses.append(enc.backward_and_step(model, batch, config))
        else:
            losses.append(s2s.train_step(model, [model.example(s) for s in batch], config))
    return float(np.mean(losses))


def _dev_loss(kind, model, dev: Dataset, config: TrainConfig) -> float:
    if kind == "encoder":
        return enc.dataset_loss(model, dev.sentences, config.alpha)
    return s2s.dataset_loss(model, dev.sentences)


def train_with_early_stopping(kind: str, config: TrainConfig, train: Dataset, dev: Dataset,
                              policy: Policy | str = Policy.REPAIR, out: str | Path | None = None,
                              csv_out: str | Path | None = None):
    """Train for up to ``max_epochs``, select the epoch with the best dev
    labelled span F1, and stop after ``patience`` epochs without a strict
    improvement. Returns ``(record, best_model)``."""
    if train.scheme != dev.scheme:
        raise SchemeMismatch("train and dev must share a tag scheme")
    model = new_model(kind, train, config)
    record = RunRecord(kind, config.as_dict())
    stopper = EarlyStopper(config.patience)
    best_params = copy.deepcopy(model.params)
    for epoch in range(1, config.max_epochs + 1):
        train_loss = _train_epoch(kind, model, train, config, epoch)
        pred = predict_dataset(model, dev, config.strategy, config.beam)
        rep = evaluate(dev, pred, policy)
        lab = rep.labelled
        row = EpochRow(epoch, train_loss, _dev_loss(kind, model, dev, config),
                       lab.precision, lab.recall, lab.f1, lab.accuracy)
        record.epochs.append(row)
        log.info("%s epoch %d loss %.4f dev P %.4f R %.4f F1 %.4f", kind, epoch, train_loss, lab.precision,
                 lab.recall, lab.f1)
        stop = stopper.update(epoch, lab.f1)
        if stopper.best_epoch == epoch:
            best_params = copy.deepcopy(model.params)
        if stop:
            record.stopped_early = epoch < config.max_epochs
            break
    record.best_epoch = stopper.best_epoch
    model.params = best_params
    model.optimizer = None
    model.meta = {
        "best_epoch": record.best_epoch,
        "best_dev_f1": record.best_row.dev_f1 if record.epochs else None,
        "loss_normalization": "mean over non-pad tokens",
        "beam_length_normalization": "cumulative log-prob / emitted length" if kind == "seq2seq" else None,
        "policy": Policy(policy).value,
    }
    if out is not None:
        checkpoint.save(model, out, config.as_dict())
    if csv_out is not None:
        Path(csv_out).write_text(record.to_csv(), encoding="utf-8")
    return record, model


SWEEP_AXES = {"learning_rate": "learning_rate", "lr": "learning_rate", "alpha": "alpha",
              "template": "template", "strategy": "strategy"}


def _sweep_point(args):
    kind, config, train, dev, policy = args
    record, _ = train_with_early_stopping(kind, config, train, dev, policy)
    return record


@dataclass
class SweepResult:
    axis: str
    labels: list[str]
    records: list[RunRecord]

    def rows(self):
        best = [r.best_row for r in self.records]
        return [
            ["Best-model Epoch"] + [str(r.best_epoch) for r in self.records],
            ["Precision"] + [pct(b.dev_precision) for b in best],
            ["Recall"] + [pct(b.dev_recall) for b in best],
            ["F1 Score"] + [pct(b.dev_f1) for b in best],
            ["Accuracy"] + [pct(b.dev_accuracy) for b in best],
        ]

    def render(self, fmt: str = "text") -> str:
        return format_grid([self.axis, *self.labels], self.rows(), fmt)


def sweep(axis: str, values: Sequence, base: TrainConfig, kind: str, train: Dataset, dev: Dataset,
          policy: Policy | str = Policy.REPAIR, workers: int = 1) -> SweepResult:
    """One independent run per value, all with ``base.seed``; results keep value order."""
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    field_name = SWEEP_AXES[axis]
    jobs = [(kind, base.replace(**{field_name: v}), train, dev, Policy(policy)) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_point, jobs))
    else:
        records = [_sweep_point(j) for j in jobs]
    return SweepResult(field_name, [str(v) for v in values], records)


DATASET_LABELS = {"train": "Train", "dev": "Dev", "test": "Test", "ood": "OOD"}


@dataclass
class EvalBundle:
    reports: dict[tuple[str, str], EvalReport]
    datasets: list[str]
    schemes: list[str]
    types: dict[str, tuple[str, ...]]

    def columns(self, scheme: str) -> dict[str, EvalReport]:
        return {DATASET_LABELS.get(d, d): self.reports[d, scheme] for d in self.datasets}

    def render_overall(self, fmt: str = "text", accuracy: bool = True) -> str:
        cols = {f"{s.capitalize()} {DATASET_LABELS.get(d, d)}": self.reports[d, s]
                for s in self.schemes for d in self.datasets}
        return render_table(cols, fmt, accuracy)

    def render_per_type(self, scheme: str, fmt: str = "text") -> str:
        return render_per_type(self.columns(scheme), self.types[scheme], fmt)

    @property
    def per_type_tables(self) -> dict[str, str]:
        return {s: self.render_per_type(s) for s in self.schemes}


def evaluate_all(model, datasets: Sequence[Dataset], schemes: Sequence[str | TagScheme] = ("full", "simple"),
                 policy: Policy | str = Policy.REPAIR, strategy: str = "beam", beam: int = 3) -> EvalBundle:
    """Score ``model`` on each dataset under each scheme.

    Typed predictions can be scored under the Simple scheme by conversion,
    never the reverse.
    """
    schemes = [get_scheme(s) for s in schemes]
    for s in schemes:
        if s != model.scheme and not (model.scheme == FULL and s == SIMPLE):
            raise SchemeMismatch(f"a {model.scheme} model cannot be scored under the {s} scheme")
    reports = {}
    for data in datasets:
        if data.scheme != model.scheme:
            if data.scheme == FULL and model.scheme == SIMPLE:
                data = data.converted(SIMPLE)
            else:
                raise SchemeMismatch(f"{data.name} is tagged {data.scheme}, model is {model.scheme}")
        pred = predict_dataset(model, data, strategy, beam)
        for s in schemes:
            gold = data.converted(s)
            pred_s = pred if s == model.scheme else [full_to_simple(p) for p in pred]
            reports[data.name, s.kind.value] = evaluate(gold, pred_s, policy)
    return EvalBundle(reports, [d.name for d in datasets], [s.kind.value for s in schemes],
                      {s.kind.value: s.entity_types for s in schemes})


@dataclass(frozen=True)
class Mismatch:
    category: str  # missed | spurious | type_confusion | boundary
    gold: Span | None
    pred: Span | None


@dataclass
class ErrorExample:
    index: int
    tokens: tuple[str, ...]
    gold: tuple[str, ...]
    pred: tuple[str, ...]
    errors: int
    mismatches: list[Mismatch]


def categorize(gold: Sequence[Span], pred: Sequence[Span]) -> list[Mismatch]:
    """Pair up disagreeing spans: same extent and different type is a type
    confusion; overlapping spans of one type with different extents form a
    boundary error; whatever is left over is missed (gold) or spurious (pred)."""
    g_left = [g for g in gold if g not in set(pred)]
    p_left = [p for p in pred if p not in set(gold)]
    out: list[Mismatch] = []
    for g in list(g_left):
        for p in p_left:
            if (p.start, p.end) == (g.start, g.end):
                out.append(Mismatch("type_confusion", g, p))
                g_left.remove(g)
                p_left.remove(p)
                break
    for g in list(g_left):
        for p in p_left:
            if p.etype == g.etype and p.start <= g.end and g.start <= p.end:
                out.append(Mismatch("boundary", g, p))
                g_left.remove(g)
                p_left.remove(p)
                break
    out += [Mismatch("missed", g, None) for g in g_left]
    out += [Mismatch("spurious", None, p) for p in p_left]
    return sorted(out, key=lambda m: ((m.gold or m.pred).start, m.category))


def error_report(gold: Dataset, pred: Sequence[Sequence[str]], k: int,
                 policy: Policy | str = Policy.REPAIR) -> list[ErrorExample]:
    """Top-``k`` sentences by token-level error count (ties by index)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = []
    for i, (sent, p) in enumerate(zip(gold.sentences, pred)):
        errors = sum(a != b for a, b in zip(sent.tags, p))
        if errors:
            scored.append((-errors, i))
    out = []
    for neg, i in sorted(scored)[:k]:
        sent = gold.sentences[i]
        g_spans = extract_spans(sent.tags, gold.scheme, policy)
        p_spans = extract_spans(pred[i], gold.scheme, policy)
        out.append(ErrorExample(i, sent.tokens, sent.tags, tuple(pred[i]), -neg, categorize(g_spans, p_spans)))
    return out


def render_errors(examples: Sequence[ErrorExample], fmt: str = "text") -> str:
    if fmt == "csv":
        rows = []
        for rank, ex in enumerate(examples):
            for m in ex.mismatches or [None]:
                rows.append([rank, ex.index, ex.errors, " ".join(ex.tokens), " ".join(ex.gold), " ".join(ex.pred),
                             m.category if m else "", _span_str(m.gold) if m else "", _span_str(m.pred) if m else ""])
        header = ["rank", "sentence", "errors", "tokens", "gold", "pred", "category", "gold_span", "pred_span"]
        return format_grid(header, rows, "csv")
    blocks = []
    for rank, ex in enumerate(examples):
        lines = [f"No.{ex.index} (rank {rank}, {ex.errors} token errors)"]
        grid = [["token", "gold", "pred"]] + [[t, g, p + ("  *" if g != p else "")]
                                               for t, g, p in zip(ex.tokens, ex.gold, ex.pred)]
        lines.append(format_grid(grid[0], grid[1:]).rstrip("\n"))
        for m in ex.mismatches:
            lines.append(f"  {m.category}: gold {_span_str(m.gold) or '-'} pred {_span_str(m.pred) or '-'}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def _span_str(span: Span | None) -> str:
    return "" if span is None else f"{span.start}-{span.end}:{span.etype}"


def record_to_dict(record: RunRecord) -> dict:
    return {"kind": record.kind, "config": record.config, "best_epoch": record.best_epoch,
            "stopped_early": record.stopped_early, "epochs": [asdict(r) for r in record.epochs]}
