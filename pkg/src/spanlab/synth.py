"""Synthetic Full-scheme NER corpus shaped like a skewed real one: mostly
"O" tokens, PER more frequent than LOC, ORG rarest, plus an out-of-domain
split with longer sentences and unseen words."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import rng_stream
from .corpus import Dataset, Sentence
from .scheme import FULL

_SYLLABLES = (
    "ba be bi bo bu da de di do du fa fe fi fo ga ge go ka ke ki ko ku la le li lo lu "
    "ma me mi mo mu na ne ni no nu pa pe pi po ra re ri ro ru sa se si so su ta te ti to tu "
    "va ve vi vo za ze zi zo"
).split()
ORG_SUFFIXES = ("Club", "Corp", "Bank", "Institute", "Group", "Union", "Council", "Press")
LOC_PREFIXES = ("New", "San", "Port", "North", "Lake")
PER_CUES = ("Mr", "Mrs", "Dr", "President")
LOC_CUES = ("in", "at", "near")


@dataclass(frozen=True)
class SynthConfig:
    n_train: int = 5000
    n_dev: int = 500
    n_test: int = 500
    n_ood: int = 500
    seed: int = 13
    # entity mix (span-level probabilities)
    p_per: float = 0.50
    p_loc: float = 0.34
    p_org: float = 0.15
    # share of entities drawn from words whose type is random (irreducible for typed tags)
    ambiguity: float = 0.03
    # share of ORG heads borrowed from the location pool ("Kalo Club" vs "Kalo")
    org_loc_overlap: float = 0.2
    # in-domain shape
    min_context: int = 12
    max_context: int = 20
    entity_counts: tuple[int, ...] = (0, 0, 1, 1, 1, 2)
    # out-of-domain shift
    ood_min_context: int = 18
    ood_max_context: int = 30
    ood_entity_counts: tuple[int, ...] = (0, 1, 1, 2, 2, 3)
    ood_unseen_entity: float = 0.35
    ood_unseen_word: float = 0.15
    ood_p_org: float = 0.18
    # one-off words (singletons, hence <unk> once rare words are pruned from the vocabulary)
    rare_word: float = 0.03
    rare_entity: float = 0.01
    # probability that a PER / LOC span is introduced by a cue word ("Dr", "in", ...)
    cue: float = 0.3


class _Lexicon:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used: set[str] = set()

    def word(self, capital: bool) -> str:
        while True:
            n = int(self.rng.integers(2, 4))
            w = "".join(self.rng.choice(_SYLLABLES, size=n))
            if w not in self.used:
                self.used.add(w)
                return w.capitalize() if capital else w

    def pool(self, n: int, capital: bool = True) -> list[str]:
        return [self.word(capital) for _ in range(n)]


class SyntheticCorpus:
    """Deterministic generator; every split draws from its own RNG stream."""

    def __init__(self, config: SynthConfig = SynthConfig()):
        self.config = config
        lex = _Lexicon(rng_stream(config.seed, "lexicon"))
        self.context = lex.pool(400, capital=False)
        self.first = lex.pool(120)
        self.last = lex.pool(120)
        self.loc = lex.pool(100)
        self.loc_tail = lex.pool(30)
        self.org_head = lex.pool(50)
        self.org_mid = lex.pool(20)
        self.ambiguous = lex.pool(20)
        # never seen in training: out-of-domain only
        self.ood_context = lex.pool(200, capital=False)
        self.ood_first = lex.pool(60)
        self.ood_last = lex.pool(60)
        self.ood_loc = lex.pool(60)
        self.ood_org_head = lex.pool(40)
        self.lex = lex

    def _pick(self, rng, pool):
        return pool[int(rng.integers(len(pool)))]

    def _rare(self, rng, capital: bool) -> str:
        # four syllables: outside every pool and almost surely a singleton
        while True:
            w = "".join(rng.choice(_SYLLABLES, size=4))
            if w not in self.lex.used and w.capitalize() not in self.lex.used:
                return w.capitalize() if capital else w

    def _entity(self, rng, etype: str, unseen: float) -> list[str]:
        words = self._entity_words(rng, etype, unseen)
        if rng.random() < self.config.rare_entity:
            words[0] = self._rare(rng, True)
        return words

    def _entity_words(self, rng, etype: str, unseen: float) -> list[str]:
        c = self.config
        fresh = rng.random() < unseen
        if etype == "PER":
            first = self._pick(rng, self.ood_first if fresh else self.first)
            if rng.random() < 0.6:
                return [first, self._pick(rng, self.ood_last if rng.random() < unseen else self.last)]
            return [first]
        if etype == "LOC":
            name = self._pick(rng, self.ood_loc if fresh else self.loc)
            if rng.random() < 0.2:
                return [self._pick(rng, LOC_PREFIXES), self._pick(rng, self.loc_tail)]
            return [name]
        if fresh:
            head = self._pick(rng, self.ood_org_head)
        elif rng.random() < c.org_loc_overlap:
            head = self._pick(rng, self.loc)
        else:
            head = self._pick(rng, self.org_head)
        words = [head, self._pick(rng, ORG_SUFFIXES)]
        if rng.random() < 0.15:
            words.insert(1, self._pick(rng, self.org_mid))
        return words

    def sentence(self, rng, ood: bool = False) -> Sentence:
        c = self.config
        lo, hi = (c.ood_min_context, c.ood_max_context) if ood else (c.min_context, c.max_context)
        n_ctx = int(rng.integers(lo, hi + 1))
        k = int(self._pick(rng, c.ood_entity_counts if ood else c.entity_counts))
        p_org = c.ood_p_org if ood else c.p_org
        probs = np.array([c.p_per, c.p_loc, p_org])
        probs /= probs.sum()
        unseen_word = c.ood_unseen_word if ood else 0.0
        words = []
        for _ in range(n_ctx):
            if rng.random() < c.rare_word:
                words.append(self._rare(rng, False))
            else:
                words.append(self._pick(rng, self.ood_context if rng.random() < unseen_word else self.context))
        tags = ["O"] * n_ctx
        # insertion slots are distinct gaps between context words, so entities never touch
        slots = np.sort(rng.choice(np.arange(1, n_ctx), size=min(k, n_ctx - 1), replace=False))[::-1]
        for slot in slots:
            if rng.random() < c.ambiguity:
                etype = ("PER", "LOC", "ORG")[int(rng.integers(3))]
                ent = [self._pick(rng, self.ambiguous)]
            else:
                etype = ("PER", "LOC", "ORG")[int(rng.choice(3, p=probs))]
                ent = self._entity(rng, etype, c.ood_unseen_entity if ood else 0.0)
            ent_tags = [f"B-{etype}"] + [f"I-{etype}"] * (len(ent) - 1)
            if etype != "ORG" and rng.random() < c.cue:
                ent = [self._pick(rng, PER_CUES if etype == "PER" else LOC_CUES)] + ent
                ent_tags = ["O"] + ent_tags
            words[slot:slot] = ent
            tags[slot:slot] = ent_tags
        return Sentence(words, tags)

    def split(self, name: str) -> Dataset:
        c = self.config
        n = {"train": c.n_train, "dev": c.n_dev, "test": c.n_test, "ood": c.n_ood}[name]
        rng = rng_stream(c.seed, "split", name)
        return Dataset(name, [self.sentence(rng, ood=name == "ood") for _ in range(n)], FULL)

    def splits(self) -> dict[str, Dataset]:
        return {name: self.split(name) for name in ("train", "dev", "test", "ood")}


def separable_config(**overrides) -> SynthConfig:
    """Corpus where every token maps to exactly one tag (no ambiguity or overlap)."""
    base = dict(ambiguity=0.0, org_loc_overlap=0.0)
    base.update(overrides)
    return SynthConfig(**base)
