"""Span-level evaluation: labelled/unlabelled matching, micro/macro P/R/F1,
per-type scores and token accuracy, plus table rendering."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .corpus import Dataset
from .errors import IllegalTransition, LengthMismatch, UnknownTag
from .scheme import TagScheme
from .spans import Policy


@dataclass
class SpanConfusion:
    types: tuple[str, ...]
    gold_count: dict[str, int]
    pred_count: dict[str, int]
    labelled_match: dict[str, int]
    unlabelled_match: int = 0
    token_correct: int = 0
    token_total: int = 0

    @classmethod
    def empty(cls, types: Sequence[str]) -> "SpanConfusion":
        types = tuple(types)
        return cls(types, dict.fromkeys(types, 0), dict.fromkeys(types, 0), dict.fromkeys(types, 0))

    def __add__(self, other: "SpanConfusion") -> "SpanConfusion":
        if self.types != other.types:
            raise ValueError("cannot merge confusions over different entity types")
        return SpanConfusion(
            self.types,
            {t: self.gold_count[t] + other.gold_count[t] for t in self.types},
            {t: self.pred_count[t] + other.pred_count[t] for t in self.types},
            {t: self.labelled_match[t] + other.labelled_match[t] for t in self.types},
            self.unlabelled_match + other.unlabelled_match,
            self.token_correct + other.token_correct,
            self.token_total + other.token_total,
        )


def encode_corpus(tag_seqs: Sequence[Sequence[str]], scheme: TagScheme):
    """Flatten tag sequences into (codes, offsets) inventory-index arrays."""
    lookup = {t: i for i, t in enumerate(scheme.inventory)}
    lengths = np.fromiter((len(t) for t in tag_seqs), np.int64, len(tag_seqs))
    offsets = np.zeros(len(tag_seqs) + 1, np.int64)
    np.cumsum(lengths, out=offsets[1:])
    try:
        codes = np.fromiter((lookup[t] for seq in tag_seqs for t in seq), np.int64, int(offsets[-1]))
    except KeyError as exc:
        raise UnknownTag(exc.args[0]) from None
    return codes, offsets


def scheme_tables(scheme: TagScheme):
    """Per-inventory-index BIO kind (0/1/2) and entity-type index (-1 for O)."""
    types = scheme.entity_types
    kind = np.zeros(len(scheme.inventory), np.int64)
    etype = np.full(len(scheme.inventory), -1, np.int64)
    for i, tag in enumerate(scheme.inventory):
        prefix, et = scheme.split(tag)
        kind[i] = {"O": 0, "B": 1, "I": 2}[prefix]
        if et is not None:
            etype[i] = types.index(et)
    return kind, etype


def _decode(codes, offsets, kind, etype, policy: Policy):
    sent, start, end, typ, bad = _kernels.decode_spans(codes, offsets, kind, etype, policy is Policy.STRICT)
    if bad >= 0:
        s = int(np.searchsorted(offsets, bad, side="right")) - 1
        err = IllegalTransition(int(bad - offsets[s]))
        err.sentence = s
        raise err
    return sent, start, end, typ


def confuse(gold: Dataset, pred: Sequence[Sequence[str]], policy: Policy | str = Policy.REPAIR) -> SpanConfusion:
    """Count gold/predicted/matching spans for a whole corpus.

    A labelled match is an exact (start, end, type) identity; an unlabelled
    match only requires equal (start, end).
    """
    policy = Policy(policy)
    scheme = gold.scheme
    if len(pred) != len(gold.sentences):
        raise LengthMismatch(len(pred), len(gold.sentences), len(pred))
    gold_tags = [s.tags for s in gold.sentences]
    for i, (g, p) in enumerate(zip(gold_tags, pred)):
        if len(g) != len(p):
            raise LengthMismatch(i, len(g), len(p))
    kind, etype = scheme_tables(scheme)
    g_codes, offsets = encode_corpus(gold_tags, scheme)
    p_codes, _ = encode_corpus(pred, scheme)
    g = _decode(g_codes, offsets, kind, etype, policy)
    p = _decode(p_codes, offsets, kind, etype, policy)
    types = scheme.entity_types
    n = len(types)
    labelled, unlabelled = _kernels.count_matches(*g, *p, n)
    g_count = np.bincount(g[3], minlength=n)
    p_count = np.bincount(p[3], minlength=n)
    return SpanConfusion(
        types,
        {t: int(g_count[i]) for i, t in enumerate(types)},
        {t: int(p_count[i]) for i, t in enumerate(types)},
        {t: int(labelled[i]) for i, t in enumerate(types)},
        int(unlabelled),
        int(np.count_nonzero(g_codes == p_codes)),
        int(g_codes.size),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class TypeScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class LabelledScores:
    matching_score: float
    precision: float
    recall: float
    f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float


@dataclass(frozen=True)
class UnlabelledScores:
    matching_score: float


@dataclass(frozen=True)
class EvalReport:
    labelled: LabelledScores
    unlabelled: UnlabelledScores
    per_type: dict[str, TypeScores] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {f"labelled_{k}": v for k, v in vars(self.labelled).items()}
        out["unlabelled_matching_score"] = self.unlabelled.matching_score
        for t, s in self.per_type.items():
            out.update({f"{t}_{k}": v for k, v in vars(s).items()})
        return out


def report(conf: SpanConfusion) -> EvalReport:
    gold = sum(conf.gold_count.values())
    pred = sum(conf.pred_count.values())
    match = sum(conf.labelled_match.values())
    precision = _ratio(match, pred)
    recall = _ratio(match, gold)
    per_type = {}
    for t in conf.types:
        tp = _ratio(conf.labelled_match[t], conf.pred_count[t])
        tr = _ratio(conf.labelled_match[t], conf.gold_count[t])
        per_type[t] = TypeScores(tp, tr, _f1(tp, tr))
    supported = [per_type[t] for t in conf.types if conf.gold_count[t] > 0]
    k = len(supported)
    labelled = LabelledScores(
        matching_score=recall,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        macro_precision=_ratio(sum(s.precision for s in supported), k),
        macro_recall=_ratio(sum(s.recall for s in supported), k),
        macro_f1=_ratio(sum(s.f1 for s in supported), k),
        accuracy=_ratio(conf.token_correct, conf.token_total),
    )
    return EvalReport(labelled, UnlabelledScores(_ratio(conf.unlabelled_match, gold)), per_type)


def evaluate(gold: Dataset, pred: Sequence[Sequence[str]], policy: Policy | str = Policy.REPAIR) -> EvalReport:
    return report(confuse(gold, pred, policy))


def pct(value: float) -> str:
    """Format a [0, 1] score as a percentage with one decimal, rounding half up."""
    return str((Decimal(repr(float(value))) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


TABLE_ROWS = (
    ("Matching Score", lambda r: r.labelled.matching_score),
    ("Precision", lambda r: r.labelled.precision),
    ("Recall", lambda r: r.labelled.recall),
    ("F1 Score", lambda r: r.labelled.f1),
    ("Macro Precision", lambda r: r.labelled.macro_precision),
    ("Macro Recall", lambda r: r.labelled.macro_recall),
    ("Macro F1 Score", lambda r: r.labelled.macro_f1),
    ("Accuracy", lambda r: r.labelled.accuracy),
    ("Unlabelled Matching Score", lambda r: r.unlabelled.matching_score),
)


def format_grid(header: Sequence[str], rows: Sequence[Sequence[str]], fmt: str = "text") -> str:
    """Render a header plus rows as aligned text or CSV."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for row in [header, *rows]:
        cells = [str(row[0]).ljust(widths[0])] + [str(c).rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def render_table(
    report: EvalReport | Mapping[str, EvalReport],
    fmt: str = "text",
    accuracy: bool = True,
    title: str = "Metric",
) -> str:
    """Render one report (or several as columns) in the labelled/unlabelled
    table layout. Values are percentages with one decimal."""
    columns = {"Value": report} if isinstance(report, EvalReport) else dict(report)
    rows = []
    for name, get in TABLE_ROWS:
        if name == "Accuracy" and not accuracy:
            continue
        rows.append([name] + [pct(get(r)) for r in columns.values()])
    return format_grid([title, *columns], rows, fmt)


def render_per_type(
    columns: Mapping[str, EvalReport],
    types: Sequence[str],
    fmt: str = "text",
    title: str = "Metric",
) -> str:
    """Per-type precision/recall/F1, one column per (type, column label) pair."""
    header = [title] + [f"{t} {label}" for t in types for label in columns]
    rows = []
    for name, attr in (("Precision", "precision"), ("Recall", "recall"), ("F1 Score", "f1")):
        rows.append([name] + [pct(getattr(r.per_type[t], attr)) for t in types for r in columns.values()])
    return format_grid(header, rows, fmt)
