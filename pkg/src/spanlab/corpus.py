"""Reading, writing and summarising two-column CoNLL-style NER files."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyDataset, MalformedLine, MixedSchemes, UnknownTag
from .scheme import TagScheme
from .spans import convert_tags


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if not self.tokens or len(self.tokens) != len(self.tags):
            raise ValueError("a sentence needs at least one token and one tag per token")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"invalid token {tok!r}")

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Dataset:
    name: str
    sentences: tuple[Sentence, ...]
    scheme: TagScheme

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        inv = set(self.scheme.inventory)
        for sent in self.sentences:
            for tag in sent.tags:
                if tag not in inv:
                    raise UnknownTag(tag)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def converted(self, scheme: TagScheme) -> "Dataset":
        sents = [Sentence(s.tokens, convert_tags(s.tags, self.scheme, scheme)) for s in self.sentences]
        return Dataset(self.name, sents, scheme)


def _split_line(line: str, line_no: int, lenient: bool) -> tuple[str, str]:
    cols = line.split("\t")
    if len(cols) < 2 or (len(cols) > 2 and not lenient):
        raise MalformedLine(line_no, f"expected 2 tab-separated columns, got {len(cols)}")
    token, tag = cols[0], cols[1]
    if not token or any(c.isspace() for c in token):
        raise MalformedLine(line_no, f"invalid token {token!r}")
    return token, tag


def parse_conll(text: str, scheme: TagScheme, name: str = "data", lenient: bool = False) -> Dataset:
    """Parse ``token<TAB>tag`` lines into a :class:`Dataset`.

    Blank lines separate sentences. Lines starting with ``#`` are comments,
    except when the line is itself a well-formed ``token<TAB>tag`` row, so
    tokens such as ``#tag`` survive a round trip. With ``lenient`` set,
    columns beyond the second are ignored instead of rejected.
    """
    inventory = set(scheme.inventory)
    sentences: list[Sentence] = []
    tokens: list[str] = []
    tags: list[str] = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            if tokens:
                sentences.append(Sentence(tokens, tags))
                tokens, tags = [], []
            continue
        if line.startswith("#"):
            cols = line.split("\t")
            if not (len(cols) == 2 and cols[1] in inventory):
                continue
        token, tag = _split_line(line, line_no, lenient)
        if tag not in inventory:
            raise UnknownTag(tag, line_no)
        tokens.append(token)
        tags.append(tag)
    if tokens:
        sentences.append(Sentence(tokens, tags))
    if not sentences:
        raise EmptyDataset(f"{name}: no sentences found")
    return Dataset(name, sentences, scheme)


def read_conll(path: str | Path, scheme: TagScheme, name: str | None = None, lenient: bool = False) -> Dataset:
    path = Path(path)
    return parse_conll(path.read_text(encoding="utf-8"), scheme, name or path.stem, lenient)


def serialize_conll(sentences: Iterable[Sentence]) -> str:
    blocks = ["".join(f"{tok}\t{tag}\n" for tok, tag in zip(s.tokens, s.tags)) for s in sentences]
    return "\n".join(blocks)


def write_conll(path: str | Path, sentences: Iterable[Sentence]) -> None:
    Path(path).write_text(serialize_conll(sentences), encoding="utf-8")


def read_token_sentences(text: str) -> list[list[str]]:
    """Read sentences for prediction; only the first column is used."""
    out: list[list[str]] = []
    cur: list[str] = []
    for line in text.split("\n"):
        line = line.rstrip("\r")
        if not line.strip():
            if cur:
                out.append(cur)
                cur = []
            continue
        cols = line.split("\t")
        if line.startswith("#") and len(cols) == 1:
            continue
        cur.append(cols[0])
    if cur:
        out.append(cur)
    return out


@dataclass
class TagDistribution:
    datasets: tuple[str, ...]
    inventory: tuple[str, ...]
    counts: dict[tuple[str, str], int] = field(default_factory=dict)
    proportions: dict[tuple[str, str], float] = field(default_factory=dict)


def tag_distribution(datasets: Sequence[Dataset]) -> TagDistribution:
    if not datasets:
        raise EmptyDataset("no datasets given")
    scheme = datasets[0].scheme
    if any(d.scheme != scheme for d in datasets):
        raise MixedSchemes("all datasets must share one tag scheme")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate dataset names: {names}")
    dist = TagDistribution(tuple(names), scheme.inventory)
    for d in datasets:
        total = d.n_tokens
        if total == 0:
            raise EmptyDataset(f"{d.name}: no tokens")
        tally = dict.fromkeys(scheme.inventory, 0)
        for sent in d.sentences:
            for tag in sent.tags:
                tally[tag] += 1
        for tag, n in tally.items():
            dist.counts[d.name, tag] = n
            dist.proportions[d.name, tag] = n / total
    return dist


def export_distribution_csv(dist: TagDistribution) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "tag", "count", "proportion"])
    for name in dist.datasets:
        for tag in dist.inventory:
            writer.writerow([name, tag, dist.counts[name, tag], f"{dist.proportions[name, tag]:.6f}"])
    return buf.getvalue()


def render_distribution(dist: TagDistribution) -> str:
    """Aligned text heatmap table: one row per tag, one column per dataset (percent)."""
    width = max([8] + [len(n) for n in dist.datasets]) + 2
    lines = ["tag".ljust(8) + "".join(n.rjust(width) for n in dist.datasets)]
    for tag in dist.inventory:
        cells = "".join(f"{100 * dist.proportions[n, tag]:.2f}".rjust(width) for n in dist.datasets)
        lines.append(tag.ljust(8) + cells)
    return "\n".join(lines) + "\n"
