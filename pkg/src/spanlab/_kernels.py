"""Hot loops of the metric engine: span decoding and span matching over a
flattened, integer-coded corpus.

Each kernel has a numba implementation and a vectorised numpy one. The numba
path is used when numba imports and ``SPANLAB_DISABLE_NUMBA`` is unset.

Corpus encoding: ``codes`` holds inventory indices for every token of every
sentence back to back, ``offsets[s]:offsets[s+1]`` delimits sentence ``s``.
``kind[c]`` is 0/1/2 for O/B/I and ``etype[c]`` is the entity-type index
(-1 for O). Spans come back as four parallel int64 arrays
``(sentence, start, end, type)`` ordered by sentence then start, with
``start``/``end`` relative to the sentence.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SPANLAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
except ImportError:  # pragma: no cover - depends on environment
    njit = None

USE_NUMBA = njit is not None


def _decode_spans_loop(codes, offsets, kind, etype, strict):
    n = codes.shape[0]
    sent = np.empty(n, np.int64)
    start = np.empty(n, np.int64)
    end = np.empty(n, np.int64)
    typ = np.empty(n, np.int64)
    k = 0
    for s in range(offsets.shape[0] - 1):
        base = offsets[s]
        cur = -1
        st = 0
        for i in range(offsets[s], offsets[s + 1]):
            kd = kind[codes[i]]
            et = etype[codes[i]]
            if kd == 2 and cur == et:
                continue
            if cur != -1:
                sent[k] = s
                start[k] = st - base
                end[k] = i - 1 - base
                typ[k] = cur
                k += 1
                cur = -1
            if kd == 0:
                continue
            if kd == 2 and strict:
                return sent[:0], start[:0], end[:0], typ[:0], i
            st = i
            cur = et
        if cur != -1:
            sent[k] = s
            start[k] = st - base
            end[k] = offsets[s + 1] - 1 - base
            typ[k] = cur
            k += 1
    return sent[:k], start[:k], end[:k], typ[:k], -1


def _count_matches_loop(gs, gst, ge, gt, ps, pst, pe, pt, n_types):
    labelled = np.zeros(n_types, np.int64)
    unlabelled = 0
    i = 0
    j = 0
    while i < gs.shape[0] and j < ps.shape[0]:
        if gs[i] < ps[j] or (gs[i] == ps[j] and gst[i] < pst[j]):
            i += 1
        elif ps[j] < gs[i] or (ps[j] == gs[i] and pst[j] < gst[i]):
            j += 1
        else:
            if ge[i] == pe[j]:
                unlabelled += 1
                if gt[i] == pt[j]:
                    labelled[gt[i]] += 1
            i += 1
            j += 1
    return labelled, unlabelled


def decode_spans_numpy(codes, offsets, kind, etype, strict):
    codes = np.asarray(codes, np.int64)
    offsets = np.asarray(offsets, np.int64)
    n = codes.shape[0]
    empty = np.empty(0, np.int64)
    if n == 0:
        return empty, empty, empty, empty, -1
    kd = kind[codes]
    et = etype[codes]
    sent_id = np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))
    first = np.zeros(n, bool)
    first[offsets[:-1][offsets[:-1] < n]] = True
    prev_et = np.empty(n, np.int64)
    prev_et[0] = -1
    prev_et[1:] = et[:-1]
    prev_et[first] = -1
    cont = (kd == 2) & (prev_et == et)
    if strict:
        bad = np.flatnonzero((kd == 2) & ~cont)
        if bad.size:
            return empty, empty, empty, empty, int(bad[0])
    starts = np.flatnonzero((kd != 0) & ~cont)
    ends = np.flatnonzero((kd != 0) & ~np.append(cont[1:], False))
    s = sent_id[starts]
    return s, starts - offsets[s], ends - offsets[s], et[starts].astype(np.int64), -1


def count_matches_numpy(gs, gst, ge, gt, ps, pst, pe, pt, n_types):
    if gs.size == 0 or ps.size == 0:
        return np.zeros(n_types, np.int64), 0
    width = int(max(ge.max(), pe.max())) + 2
    g_ext = (gs * width + gst) * width + ge
    p_ext = (ps * width + pst) * width + pe
    unl = np.intersect1d(g_ext, p_ext, assume_unique=True)
    lab = np.intersect1d(g_ext * n_types + gt, p_ext * n_types + pt, assume_unique=True)
    return np.bincount(lab % n_types, minlength=n_types).astype(np.int64), int(unl.size)


if USE_NUMBA:
    decode_spans_numba = njit(cache=True)(_decode_spans_loop)
    count_matches_numba = njit(cache=True)(_count_matches_loop)
    decode_spans = decode_spans_numba
    count_matches = count_matches_numba
else:
    decode_spans_numba = count_matches_numba = None
    decode_spans = decode_spans_numpy
    count_matches = count_matches_numpy

# uncompiled reference of the loop kernels, usable with or without numba
decode_spans_python = _decode_spans_loop
count_matches_python = _count_matches_loop
