"""Numpy building blocks shared by both taggers: parameter init, masked
single-head attention with its backward pass, softmax helpers and AdamW."""
from __future__ import annotations

import math

import numpy as np

from .errors import NonFiniteGradient

NEG_INF = -1e30
PAD, UNK = "<pad>", "<unk>"


def init_params(rng: np.random.Generator, shapes: dict[str, tuple[int, ...]], zero=()) -> dict[str, np.ndarray]:
    # uniform(-0.1, 0.1) for matrices, zeros for biases; insertion order fixes the draw order
    params = {}
    for name, shape in shapes.items():
        if name in zero:
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-0.1, 0.1, size=shape)
    return params


def sinusoid_table(n: int, d: int) -> np.ndarray:
    """Fixed sin/cos position codes; row i is the encoding of position i."""
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None]
    angle = pos / 10000.0 ** (2 * (i // 2) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def _mm_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sum over batch and positions of a^T b, for (..., i) and (..., j) inputs."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def attention_forward(xq, xkv, params, prefix, key_mask, causal=False):
    """Single-head scaled dot-product attention with output projection.

    ``xq`` is (B, n, d), ``xkv`` is (B, m, d) and ``key_mask`` (B, m) marks
    real key positions. Returns the (B, n, d) output and a backward cache.
    """
    Wq, Wk, Wv, Wo = (params[prefix + k] for k in ("Wq", "Wk", "Wv", "Wo"))
    scale = 1.0 / math.sqrt(Wq.shape[1])
    Q = xq @ Wq
    K = xkv @ Wk
    V = xkv @ Wv
    S = (Q @ K.transpose(0, 2, 1)) * scale
    allowed = key_mask[:, None, :]
    if causal:
        n, m = S.shape[1:]
        allowed = allowed & np.tri(n, m, dtype=bool)[None]
    A = softmax(np.where(allowed, S, NEG_INF))
    C = A @ V
    return C @ Wo, (xq, xkv, Q, K, V, A, C, scale)


def attention_backward(dout, cache, params, prefix, grads):
    """Accumulate parameter grads into ``grads``; return (d xq, d xkv)."""
    xq, xkv, Q, K, V, A, C, scale = cache
    Wq, Wk, Wv, Wo = (params[prefix + k] for k in ("Wq", "Wk", "Wv", "Wo"))
    grads[prefix + "Wo"] += _mm_sum(C, dout)
    dC = dout @ Wo.T
    dA = dC @ V.transpose(0, 2, 1)
    dV = A.transpose(0, 2, 1) @ dC
    dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True)) * scale
    dQ = dS @ K
    dK = dS.transpose(0, 2, 1) @ Q
    grads[prefix + "Wq"] += _mm_sum(xq, dQ)
    grads[prefix + "Wk"] += _mm_sum(xkv, dK)
    grads[prefix + "Wv"] += _mm_sum(xkv, dV)
    return dQ @ Wq.T, dK @ Wk.T + dV @ Wv.T


def embed_forward(params, table, pos, ids):
    n = ids.shape[1]
    return params[table][ids] + params[pos][:n][None]


def embed_backward(dx, ids, mask, table, pos, grads):
    dx = dx * mask[..., None]
    np.add.at(grads[table], ids.ravel(), dx.reshape(-1, dx.shape[-1]))
    grads[pos][: ids.shape[1]] += dx.sum(axis=0)


def encoder_block(params, ids, mask, table="E", pos="Pos", prefix=""):
    """Embeddings plus one bidirectional self-attention layer with residual."""
    x = embed_forward(params, table, pos, ids)
    a, cache = attention_forward(x, x, params, prefix, mask)
    return x + a, (ids, mask, cache)


def encoder_block_backward(dh, cache, params, grads, table="E", pos="Pos", prefix=""):
    ids, mask, acache = cache
    dq, dkv = attention_backward(dh, acache, params, prefix, grads)
    embed_backward(dh + dq + dkv, ids, mask, table, pos, grads)


def attention_shapes(prefix: str, d: int) -> dict[str, tuple[int, int]]:
    return {prefix + k: (d, d) for k in ("Wq", "Wk", "Wv", "Wo")}


def build_vocab(token_lists, min_count: int = 1, specials=(PAD, UNK)) -> list[str]:
    """Specials first, then tokens by descending frequency, ties alphabetical."""
    counts: dict[str, int] = {}
    for toks in token_lists:
        for t in toks:
            counts[t] = counts.get(t, 0) + 1
    kept = sorted((t for t, c in counts.items() if c >= min_count and t not in specials), key=lambda t: (-counts[t], t))
    return list(specials) + kept


def pad_batch(seqs, pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    n = max(len(s) for s in seqs)
    ids = np.full((len(seqs), n), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), n), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask


def check_finite(grads: dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in {name}")


class AdamW:
    """Adam with decoupled weight decay; moment state lives across steps."""

    def __init__(self, weight_decay: float = 0.01, betas=(0.9, 0.999), eps: float = 1e-8):
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if lr == 0.0:
                continue
            p -= lr * (self.weight_decay * p + (m / c1) / (np.sqrt(v / c2) + self.eps))
