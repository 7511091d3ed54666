"""Encoder-decoder tagger that generates the tag sequence autoregressively
from a templated prompt, with beam and teacher-forced decoding."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TrainConfig, rng_stream
from .corpus import Sentence
from .errors import TooLong
from .nn import (
    PAD,
    UNK,
    AdamW,
    attention_backward,
    attention_forward,
    attention_shapes,
    build_vocab,
    check_finite,
    embed_backward,
    embed_forward,
    encoder_block,
    encoder_block_backward,
    init_params,
    log_softmax,
    pad_batch,
    sinusoid_table,
)
from .scheme import SIMPLE, TagScheme
from .spans import full_to_simple

BOS, EOS, OUT_PAD = "<bos>", "</s>", "<pad>"

TEMPLATES = {
    1: lambda words: f"Sentence: {words} [SEP] label each token with its entity type:",
    2: lambda words: f"ner: {words}",
    3: lambda words: f"Sentence: {words}\nLabel tokens:",
    4: lambda words: "Sentence:\n" + words + "\n" + "Tags:",
}


@dataclass(frozen=True)
class PromptTemplate:
    id: int = 4

    def __post_init__(self):
        if self.id not in TEMPLATES:
            raise ValueError(f"unknown template {self.id}")

    def render(self, words: str) -> str:
        return TEMPLATES[self.id](words)


DEFAULT_EXAMPLES = (
    ("Dmitry went to Moscow .", "B-PER O O B-LOC O"),
    ("Colin has a dog .", "B-PER O O O O"),
)


@dataclass(frozen=True)
class FewShotPrefix:
    examples: tuple[tuple[str, str], ...] = DEFAULT_EXAMPLES

    def render(self) -> str:
        return "".join(f"Sentence: {s}\nTag: {t}\n" for s, t in self.examples)

    def for_scheme(self, scheme: TagScheme) -> "FewShotPrefix":
        if scheme != SIMPLE:
            return self
        return FewShotPrefix(tuple((s, " ".join(full_to_simple(t.split()))) for s, t in self.examples))


def render_prompt(template: PromptTemplate, prefix: FewShotPrefix | None, tokens: Sequence[str]) -> list[str]:
    """Whitespace token stream of the few-shot block followed by the template."""
    if not tokens:
        raise ValueError("cannot render an empty sentence")
    text = (prefix.render() if prefix else "") + template.render(" ".join(tokens))
    return text.split()


@dataclass
class MalformedStats:
    unknown: int = 0
    padded: int = 0
    truncated: int = 0

    @property
    def repairs(self) -> int:
        return self.unknown + self.padded + self.truncated

    def __iadd__(self, other: "MalformedStats"):
        self.unknown += other.unknown
        self.padded += other.padded
        self.truncated += other.truncated
        return self


def align_output(generated: Sequence[str], n_tokens: int, scheme: TagScheme, stats: MalformedStats | None = None):
    """Force generated tags onto exactly ``n_tokens`` scheme tags.

    Unknown tokens become "O"; the sequence is then truncated or right-padded
    with "O". Returns ``(tags, stats)``.
    """
    stats = stats if stats is not None else MalformedStats()
    inv = set(scheme.inventory)
    tags = []
    for tok in generated[:n_tokens]:
        if tok in inv:
            tags.append(tok)
        else:
            tags.append("O")
            stats.unknown += 1
    stats.truncated += max(0, len(generated) - n_tokens)
    stats.padded += n_tokens - len(tags)
    tags.extend(["O"] * (n_tokens - len(tags)))
    return tags, stats


@dataclass
class Seq2SeqModel:
    vocab: list[str]
    out_vocab: list[str]
    scheme: TagScheme
    params: dict[str, np.ndarray]
    dim: int
    max_len: int
    template: PromptTemplate = PromptTemplate(4)
    prefix: FewShotPrefix | None = FewShotPrefix()
    meta: dict = field(default_factory=dict)
    optimizer: AdamW | None = field(default=None, repr=False, compare=False)

    kind = "seq2seq"

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.vocab)}
        self.out_index = {t: i for i, t in enumerate(self.out_vocab)}
        self.bos = self.out_index[BOS]
        self.eos = self.out_index[EOS]
        self.pad = self.out_index[OUT_PAD]
        # tags and EOS are generable; BOS and PAD never are
        self.generable = np.array([i for i, t in enumerate(self.out_vocab) if t not in (BOS, OUT_PAD)])

    @classmethod
    def create(cls, vocab, scheme: TagScheme, dim=64, max_len=128, seed=0, template=4, few_shot=True):
        out_vocab = list(scheme.inventory) + [BOS, EOS, OUT_PAD]
        shapes = {"E": (len(vocab), dim), "Pos": (max_len, dim)}
        shapes.update(attention_shapes("enc_", dim))
        shapes.update({"D": (len(out_vocab), dim), "DPos": (max_len, dim)})
        shapes.update(attention_shapes("self_", dim))
        shapes.update(attention_shapes("cross_", dim))
        shapes.update({"Wout": (len(out_vocab), dim), "bout": (len(out_vocab),)})
        params = init_params(rng_stream(seed, "init"), shapes, zero={"bout"})
        # both position tables start as sinusoids (then train freely): source and
        # output positions must be matched up by cross-attention, which random
        # tables make slow to learn
        params["Pos"] = sinusoid_table(max_len, dim)
        params["DPos"] = sinusoid_table(max_len, dim)
        prefix = FewShotPrefix().for_scheme(scheme) if few_shot else None
        return cls(list(vocab), out_vocab, scheme, params, dim, max_len, PromptTemplate(template), prefix)

    @classmethod
    def from_sentences(cls, sentences: Sequence[Sentence], scheme: TagScheme, config: TrainConfig):
        template = PromptTemplate(config.template)
        prefix = FewShotPrefix().for_scheme(scheme) if config.few_shot else None
        vocab = build_vocab((render_prompt(template, prefix, s.tokens) for s in sentences), config.min_count)
        return cls.create(vocab, scheme, config.dim, config.max_len, config.seed, config.template, config.few_shot)

    def prompt(self, tokens: Sequence[str]) -> list[str]:
        return render_prompt(self.template, self.prefix, tokens)

    def source_ids(self, stream: Sequence[str]) -> list[int]:
        if len(stream) > self.max_len:
            raise TooLong(f"prompt of {len(stream)} tokens exceeds max_len {self.max_len}")
        unk = self.index[UNK]
        return [self.index.get(t, unk) for t in stream]

    def target_ids(self, tags: Sequence[str]) -> list[int]:
        return [self.out_index[t] for t in tags]

    def example(self, sentence: Sentence) -> tuple[list[str], list[str]]:
        """(prompt stream, gold tags + EOS) training pair."""
        return self.prompt(sentence.tokens), list(sentence.tags) + [EOS]


def _encode(model: Seq2SeqModel, src_ids, src_mask):
    return encoder_block(model.params, src_ids, src_mask, "E", "Pos", "enc_")


def _decode(model: Seq2SeqModel, H, src_mask, dec_in, dec_mask):
    if dec_in.shape[1] > model.max_len:
        raise TooLong(f"decoder length {dec_in.shape[1]} exceeds max_len {model.max_len}")
    p = model.params
    u = embed_forward(p, "D", "DPos", dec_in)
    sa, scache = attention_forward(u, u, p, "self_", dec_mask, causal=True)
    g = u + sa
    ca, ccache = attention_forward(g, H, p, "cross_", src_mask)
    r = g + ca
    logits = r @ p["Wout"].T + p["bout"]
    return logits, (dec_in, dec_mask, scache, ccache, r)


def _prepare(model: Seq2SeqModel, batch):
    src_ids, src_mask = pad_batch([model.source_ids(s) for s, _ in batch], model.index[PAD])
    tgts = [model.target_ids(t) for _, t in batch]
    dec_in, dec_mask = pad_batch([[model.bos] + t[:-1] for t in tgts], model.pad)
    tgt, _ = pad_batch(tgts, model.pad)
    return src_ids, src_mask, dec_in, dec_mask, tgt


def loss_and_grads(model: Seq2SeqModel, batch):
    """Teacher-forced mean negative log-likelihood over output positions, with gradients."""
    for _, tags in batch:
        if not tags or tags[-1] != EOS:
            raise ValueError("gold output sequences must end with EOS")
    p = model.params
    src_ids, src_mask, dec_in, dec_mask, tgt = _prepare(model, batch)
    H, ecache = _encode(model, src_ids, src_mask)
    logits, (_, _, scache, ccache, r) = _decode(model, H, src_mask, dec_in, dec_mask)
    logp = log_softmax(logits)
    n = dec_mask.sum()
    picked = np.take_along_axis(logp, tgt[..., None], axis=-1)[..., 0]
    loss = float(-(picked * dec_mask).sum() / n)

    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dlog = np.exp(logp)
    np.put_along_axis(dlog, tgt[..., None], np.take_along_axis(dlog, tgt[..., None], -1) - 1.0, axis=-1)
    dlog *= (dec_mask / n)[..., None]
    grads["Wout"] += dlog.reshape(-1, dlog.shape[-1]).T @ r.reshape(-1, r.shape[-1])
    grads["bout"] += dlog.sum(axis=(0, 1))
    dr = dlog @ p["Wout"]
    dg_q, dH = attention_backward(dr, ccache, p, "cross_", grads)
    dg = dr + dg_q
    du_q, du_kv = attention_backward(dg, scache, p, "self_", grads)
    embed_backward(dg + du_q + du_kv, dec_in, dec_mask, "D", "DPos", grads)
    encoder_block_backward(dH, ecache, p, grads, "E", "Pos", "enc_")
    return loss, grads


def train_step(model: Seq2SeqModel, batch, config: TrainConfig) -> float:
    """One AdamW step on (prompt stream, tags + EOS) pairs; returns the batch loss."""
    if not batch:
        raise ValueError("empty batch")
    loss, grads = loss_and_grads(model, batch)
    check_finite(grads)
    if model.optimizer is None:
        model.optimizer = AdamW(config.weight_decay)
    model.optimizer.step(model.params, grads, config.learning_rate)
    return loss


def teacher_forced_logprobs(model: Seq2SeqModel, stream: Sequence[str], out_ids: Sequence[int]) -> np.ndarray:
    """Log-distributions at every output position given gold prefix ``out_ids``."""
    src_ids, src_mask = pad_batch([model.source_ids(stream)], model.index[PAD])
    H, _ = _encode(model, src_ids, src_mask)
    dec_in = np.array([[model.bos] + list(out_ids)], dtype=np.int64)
    logits, _ = _decode(model, H, src_mask, dec_in, np.ones_like(dec_in, dtype=bool))
    return log_softmax(logits[0])


def sequence_logprob(model: Seq2SeqModel, stream: Sequence[str], out_ids: Sequence[int]) -> float:
    """log P(out_ids | stream) under the autoregressive factorization."""
    if not len(out_ids):
        return 0.0
    logp = teacher_forced_logprobs(model, stream, out_ids[:-1])
    return float(logp[np.arange(len(out_ids)), np.asarray(out_ids)].sum())


def beam_search_ids(model: Seq2SeqModel, stream: Sequence[str], beam_width: int, max_len: int):
    """Length-normalised beam search; returns (ids incl. EOS if emitted, normalised score).

    At each step every live hypothesis is extended by every generable token
    and the best ``beam_width`` extensions (by cumulative log-prob) survive;
    those ending in EOS are finished. Hypotheses still live after
    ``max_len`` tokens finish truncated. The winner maximises
    log-prob / emitted length.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    src_ids, src_mask = pad_batch([model.source_ids(stream)], model.index[PAD])
    H, _ = _encode(model, src_ids, src_mask)
    gen = model.generable
    alive: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[list[int], float]] = []
    for step in range(max_len):
        k = len(alive)
        dec_in = np.array([[model.bos] + ids for ids, _ in alive], dtype=np.int64)
        logits, _ = _decode(model, np.repeat(H, k, 0), np.repeat(src_mask, k, 0), dec_in, np.ones_like(dec_in, dtype=bool))
        logp = log_softmax(logits[:, -1])[:, gen]
        scores = (np.array([s for _, s in alive])[:, None] + logp).ravel()
        # stable sort keeps (hypothesis, token) order on ties
        order = np.argsort(-scores, kind="stable")[:beam_width]
        nxt = []
        for flat in order:
            h, t = divmod(int(flat), len(gen))
            ids = alive[h][0] + [int(gen[t])]
            if gen[t] == model.eos:
                finished.append((ids, float(scores[flat])))
            else:
                nxt.append((ids, float(scores[flat])))
        alive = nxt
        if not alive:
            break
    finished.extend(alive)
    best_ids, best = [], -np.inf
    for ids, s in finished:
        norm = s / len(ids) if ids else 0.0
        if norm > best:
            best_ids, best = ids, norm
    return best_ids, best


def decode_beam(model: Seq2SeqModel, stream: Sequence[str], beam_width: int, max_len: int) -> list[str]:
    """Generated tag tokens with EOS stripped."""
    ids, _ = beam_search_ids(model, stream, beam_width, max_len)
    return [model.out_vocab[i] for i in ids if i != model.eos]


def decode_greedy(model: Seq2SeqModel, stream: Sequence[str], max_len: int) -> list[str]:
    src_ids, src_mask = pad_batch([model.source_ids(stream)], model.index[PAD])
    H, _ = _encode(model, src_ids, src_mask)
    out: list[int] = []
    for _ in range(max_len):
        dec_in = np.array([[model.bos] + out], dtype=np.int64)
        logits, _ = _decode(model, H, src_mask, dec_in, np.ones_like(dec_in, dtype=bool))
        logp = log_softmax(logits[0, -1])[model.generable]
        tok = int(model.generable[int(np.argmax(logp))])
        if tok == model.eos:
            break
        out.append(tok)
    return [model.out_vocab[i] for i in out]


def decode_likelihood(model: Seq2SeqModel, stream: Sequence[str], gold_tags: Sequence[str]) -> list[str]:
    """Per-position argmax of a teacher-forced pass over the gold tags.

    Needs the gold sequence (validation only). The result has exactly
    ``len(gold_tags)`` entries and may contain non-tag tokens.
    """
    logp = teacher_forced_logprobs(model, stream, model.target_ids(gold_tags)[:-1] if gold_tags else [])
    return [model.out_vocab[i] for i in logp[: len(gold_tags)].argmax(axis=1)]


def predict(model: Seq2SeqModel, tokens: Sequence[str], strategy: str = "beam", beam_width: int = 3,
            gold_tags: Sequence[str] | None = None, stats: MalformedStats | None = None) -> list[str]:
    stream = model.prompt(tokens)
    if strategy == "beam":
        raw = decode_beam(model, stream, beam_width, len(tokens) + 5)
    elif strategy == "likelihood":
        if gold_tags is None:
            raise ValueError("likelihood decoding needs gold tags")
        raw = decode_likelihood(model, stream, gold_tags)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return align_output(raw, len(tokens), model.scheme, stats)[0]


def dataset_loss(model: Seq2SeqModel, sentences: Sequence[Sentence], batch_size: int = 64) -> float:
    total, count = 0.0, 0
    for i in range(0, len(sentences), batch_size):
        batch = [model.example(s) for s in sentences[i : i + batch_size]]
        src_ids, src_mask, dec_in, dec_mask, tgt = _prepare(model, batch)
        H, _ = _encode(model, src_ids, src_mask)
        logits, _ = _decode(model, H, src_mask, dec_in, dec_mask)
        picked = np.take_along_axis(log_softmax(logits), tgt[..., None], axis=-1)[..., 0]
        total += float(-(picked * dec_mask).sum())
        count += int(dec_mask.sum())
    return total / count if count else 0.0
