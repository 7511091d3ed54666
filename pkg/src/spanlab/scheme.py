"""Tag inventories for the Full (typed) and Simple (untyped) BIO schemes."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import UnknownTag

FULL_INVENTORY = ("O", "B-LOC", "I-LOC", "B-PER", "I-PER", "B-ORG", "I-ORG")
SIMPLE_INVENTORY = ("O", "B", "I")
SIMPLE_TYPE = "ENT"


class SchemeKind(str, Enum):
    FULL = "full"
    SIMPLE = "simple"


@dataclass(frozen=True)
class TagScheme:
    kind: SchemeKind
    inventory: tuple[str, ...]

    @property
    def entity_types(self) -> tuple[str, ...]:
        """Entity types in report order (LOC, ORG, PER for Full; ENT for Simple)."""
        if self.kind is SchemeKind.SIMPLE:
            return (SIMPLE_TYPE,)
        return tuple(sorted({t[2:] for t in self.inventory if t != "O"}))

    def index(self, tag: str) -> int:
        try:
            return self.inventory.index(tag)
        except ValueError:
            raise UnknownTag(tag) from None

    def split(self, tag: str) -> tuple[str, str | None]:
        """Split a tag into its BIO prefix and entity type."""
        if tag not in self.inventory:
            raise UnknownTag(tag)
        if tag == "O":
            return "O", None
        if self.kind is SchemeKind.SIMPLE:
            return tag, SIMPLE_TYPE
        return tag[0], tag[2:]

    def join(self, prefix: str, etype: str | None) -> str:
        if prefix == "O":
            return "O"
        tag = prefix if self.kind is SchemeKind.SIMPLE else f"{prefix}-{etype}"
        if tag not in self.inventory or (self.kind is SchemeKind.SIMPLE and etype != SIMPLE_TYPE):
            raise UnknownTag(f"{prefix}-{etype}")
        return tag

    def __str__(self) -> str:
        return self.kind.value


FULL = TagScheme(SchemeKind.FULL, FULL_INVENTORY)
SIMPLE = TagScheme(SchemeKind.SIMPLE, SIMPLE_INVENTORY)


def get_scheme(name: str | SchemeKind | TagScheme) -> TagScheme:
    if isinstance(name, TagScheme):
        return name
    kind = SchemeKind(name.value if isinstance(name, SchemeKind) else name.lower())
    return FULL if kind is SchemeKind.FULL else SIMPLE
