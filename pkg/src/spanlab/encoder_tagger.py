"""Token classifier: one bidirectional self-attention layer over token and
position embeddings, a linear head with softmax, trained with an
"O"-down-weighted cross-entropy and AdamW."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TrainConfig, rng_stream
from .corpus import Sentence
from .errors import BadAlpha, TooLong
from .nn import (
    PAD,
    UNK,
    AdamW,
    attention_shapes,
    build_vocab,
    check_finite,
    encoder_block,
    encoder_block_backward,
    init_params,
    log_softmax,
    pad_batch,
    softmax,
)
from .scheme import TagScheme

O_INDEX = 0  # "O" is first in both inventories


@dataclass
class EncoderModel:
    vocab: list[str]
    scheme: TagScheme
    params: dict[str, np.ndarray]
    dim: int
    max_len: int
    meta: dict = field(default_factory=dict)
    optimizer: AdamW | None = field(default=None, repr=False, compare=False)

    kind = "encoder"

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.vocab)}

    @classmethod
    def create(cls, vocab: Sequence[str], scheme: TagScheme, dim: int = 64, max_len: int = 128, seed: int = 0):
        shapes = {"E": (len(vocab), dim), "Pos": (max_len, dim)}
        shapes.update(attention_shapes("", dim))
        shapes.update({"W": (len(scheme.inventory), dim), "b": (len(scheme.inventory),)})
        params = init_params(rng_stream(seed, "init"), shapes, zero={"b"})
        return cls(list(vocab), scheme, params, dim, max_len)

    @classmethod
    def from_sentences(cls, sentences: Sequence[Sentence], scheme: TagScheme, config: TrainConfig):
        vocab = build_vocab((s.tokens for s in sentences), config.min_count)
        return cls.create(vocab, scheme, config.dim, config.max_len, config.seed)

    def token_ids(self, tokens: Sequence[str]) -> list[int]:
        if len(tokens) > self.max_len:
            raise TooLong(f"{len(tokens)} tokens exceeds max_len {self.max_len}")
        unk = self.index[UNK]
        return [self.index.get(t, unk) for t in tokens]

    def tag_ids(self, tags: Sequence[str]) -> list[int]:
        return [self.scheme.index(t) for t in tags]

    def batch(self, token_lists, tag_lists=None):
        ids, mask = pad_batch([self.token_ids(t) for t in token_lists], self.index[PAD])
        if tag_lists is None:
            return ids, mask, None
        gold, _ = pad_batch([self.tag_ids(t) for t in tag_lists], O_INDEX)
        return ids, mask, gold


def _logits(model: EncoderModel, ids, mask):
    h, cache = encoder_block(model.params, ids, mask)
    return h @ model.params["W"].T + model.params["b"], h, cache


def forward(model: EncoderModel, tokens: Sequence[str]) -> np.ndarray:
    """Per-token tag distributions, shape (len(tokens), len(inventory))."""
    ids, mask, _ = model.batch([tokens])
    z, _, _ = _logits(model, ids, mask)
    return softmax(z[0])


def forward_batch(model: EncoderModel, token_lists, batch_size: int = 256) -> list[np.ndarray]:
    out = []
    for i in range(0, len(token_lists), batch_size):
        chunk = token_lists[i : i + batch_size]
        ids, mask, _ = model.batch(chunk)
        probs = softmax(_logits(model, ids, mask)[0])
        out.extend(probs[j, : len(t)] for j, t in enumerate(chunk))
    return out


@dataclass(frozen=True)
class LossValue:
    total: float
    per_token: tuple[float, ...]


def _check_alpha(alpha: float) -> None:
    if not (0 < alpha <= 1):
        raise BadAlpha(f"alpha must lie in (0, 1], got {alpha}")


def tag_weights(alpha: float, n_tags: int) -> np.ndarray:
    w = np.ones(n_tags)
    w[O_INDEX] = alpha
    return w


def weighted_ce(probs: np.ndarray, gold: Sequence[int], alpha: float) -> LossValue:
    """Sum over tokens of w[gold] * -log p(gold), with w = alpha for "O" and 1 otherwise."""
    _check_alpha(alpha)
    probs = np.asarray(probs, dtype=float)
    gold = np.asarray(gold, dtype=np.int64)
    nll = -np.log(probs[np.arange(len(gold)), gold])
    per_token = tag_weights(alpha, probs.shape[1])[gold] * nll
    return LossValue(float(per_token.sum()), tuple(float(x) for x in per_token))


def cross_entropy(probs: np.ndarray, gold: Sequence[int]) -> LossValue:
    probs = np.asarray(probs, dtype=float)
    gold = np.asarray(gold, dtype=np.int64)
    per_token = -np.log(probs[np.arange(len(gold)), gold])
    return LossValue(float(per_token.sum()), tuple(float(x) for x in per_token))


def loss_and_grads(model: EncoderModel, ids, mask, gold, alpha: float):
    """Weighted CE averaged over real tokens, and its gradient for every parameter."""
    _check_alpha(alpha)
    p = model.params
    z, h, cache = _logits(model, ids, mask)
    logp = log_softmax(z)
    w = tag_weights(alpha, z.shape[-1])[gold] * mask
    n = mask.sum()
    picked = np.take_along_axis(logp, gold[..., None], axis=-1)[..., 0]
    loss = float(-(w * picked).sum() / n)

    dz = np.exp(logp)
    np.put_along_axis(dz, gold[..., None], np.take_along_axis(dz, gold[..., None], -1) - 1.0, axis=-1)
    dz *= (w / n)[..., None]
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    grads["W"] += dz.reshape(-1, dz.shape[-1]).T @ h.reshape(-1, h.shape[-1])
    grads["b"] += dz.sum(axis=(0, 1))
    encoder_block_backward(dz @ p["W"], cache, p, grads)
    return loss, grads


def backward_and_step(model: EncoderModel, batch: Sequence[Sentence], config: TrainConfig) -> float:
    """One AdamW step on ``batch``; updates ``model`` in place and returns the batch loss."""
    if not batch:
        raise ValueError("empty batch")
    ids, mask, gold = model.batch([s.tokens for s in batch], [s.tags for s in batch])
    loss, grads = loss_and_grads(model, ids, mask, gold, config.alpha)
    check_finite(grads)
    if model.optimizer is None:
        model.optimizer = AdamW(config.weight_decay)
    model.optimizer.step(model.params, grads, config.learning_rate)
    return loss


def dataset_loss(model: EncoderModel, sentences: Sequence[Sentence], alpha: float, batch_size: int = 256) -> float:
    """Mean weighted CE over all real tokens of ``sentences``."""
    total, count = 0.0, 0
    w = tag_weights(alpha, len(model.scheme.inventory))
    for i in range(0, len(sentences), batch_size):
        chunk = sentences[i : i + batch_size]
        ids, mask, gold = model.batch([s.tokens for s in chunk], [s.tags for s in chunk])
        logp = log_softmax(_logits(model, ids, mask)[0])
        picked = np.take_along_axis(logp, gold[..., None], axis=-1)[..., 0]
        total += float(-(w[gold] * picked * mask).sum())
        count += int(mask.sum())
    return total / count if count else 0.0


def predict_tags(model: EncoderModel, tokens: Sequence[str]) -> list[str]:
    probs = forward(model, tokens)
    return [model.scheme.inventory[i] for i in probs.argmax(axis=1)]


def predict_batch(model: EncoderModel, token_lists, batch_size: int = 256) -> list[list[str]]:
    inv = model.scheme.inventory
    return [[inv[i] for i in probs.argmax(axis=1)] for probs in forward_batch(model, token_lists, batch_size)]
