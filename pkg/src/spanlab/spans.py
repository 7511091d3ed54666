"""Conversion between BIO tag sequences and typed spans."""
from __future__ import annotations

from enum import Enum
from typing import NamedTuple, Sequence

from .errors import IllegalTransition, OutOfRange, OverlapError, UnknownTag
from .scheme import FULL, SIMPLE, TagScheme


class Span(NamedTuple):
    start: int  # inclusive
    end: int  # inclusive
    etype: str


class Policy(str, Enum):
    STRICT = "strict"
    REPAIR = "repair"


def extract_spans(tags: Sequence[str], scheme: TagScheme, policy: Policy | str = Policy.REPAIR) -> list[Span]:
    """Decode BIO tags into spans.

    An ``I-X`` that does not continue an open ``X`` span is illegal. Under
    ``repair`` it opens a new span (conlleval behaviour); under ``strict`` it
    raises :class:`IllegalTransition`.
    """
    policy = Policy(policy)
    spans: list[Span] = []
    start = -1
    cur = None
    for i, tag in enumerate(tags):
        prefix, etype = scheme.split(tag)
        if prefix == "I" and cur == etype:
            continue
        if cur is not None:
            spans.append(Span(start, i - 1, cur))
            cur = None
        if prefix == "O":
            continue
        if prefix == "I" and policy is Policy.STRICT:
            raise IllegalTransition(i, tag)
        start, cur = i, etype
    if cur is not None:
        spans.append(Span(start, len(tags) - 1, cur))
    return spans


def spans_to_tags(spans: Sequence[Span], length: int, scheme: TagScheme) -> list[str]:
    tags = ["O"] * length
    prev_end = -1
    for span in spans:
        start, end, etype = span
        if start < 0 or end < start or end >= length:
            raise OutOfRange(f"span {tuple(span)} outside sentence of length {length}")
        if start <= prev_end:
            raise OverlapError(f"span {tuple(span)} overlaps or is out of order")
        tags[start] = scheme.join("B", etype)
        inside = scheme.join("I", etype)
        for i in range(start + 1, end + 1):
            tags[i] = inside
        prev_end = end
    return tags


def full_to_simple(tags: Sequence[str]) -> list[str]:
    out = []
    for tag in tags:
        if tag not in FULL.inventory:
            raise UnknownTag(tag)
        out.append(tag[0])
    return out


def convert_tags(tags: Sequence[str], source: TagScheme, target: TagScheme) -> list[str]:
    if source == target:
        return list(tags)
    if source == FULL and target == SIMPLE:
        return full_to_simple(tags)
    raise ValueError(f"cannot convert {source} tags to {target}")
