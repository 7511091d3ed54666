"""Time the span-decoding and span-matching kernels: numba, vectorised numpy
and the plain Python loop, on one synthetic corpus.

    python benchmarks/bench_kernels.py [--sentences N] [--repeat R]
"""
import argparse
import random
import timeit

from spanlab import _kernels
from spanlab.metrics import encode_corpus, scheme_tables
from spanlab.scheme import FULL

TAGS = list(FULL.inventory)


def make_corpus(n, seed=0):
    rng = random.Random(seed)
    gold, pred = [], []
    for _ in range(n):
        g = [rng.choice(TAGS[1:]) if rng.random() < 0.2 else "O" for _ in range(rng.randint(5, 40))]
        gold.append(g)
        pred.append([t if rng.random() < 0.9 else rng.choice(TAGS) for t in g])
    return gold, pred


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sentences", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    gold, pred = make_corpus(args.sentences)
    kind, etype = scheme_tables(FULL)
    g_codes, offsets = encode_corpus(gold, FULL)
    p_codes, _ = encode_corpus(pred, FULL)
    n_types = len(FULL.entity_types)
    print(f"{args.sentences} sentences, {g_codes.size} tokens; numba available: {_kernels.USE_NUMBA}")

    impls = {"numpy": (_kernels.decode_spans_numpy, _kernels.count_matches_numpy),
             "python": (_kernels.decode_spans_python, _kernels.count_matches_python)}
    if _kernels.USE_NUMBA:
        impls = {"numba": (_kernels.decode_spans_numba, _kernels.count_matches_numba), **impls}

    print(f"{'impl':8} {'decode ms':>10} {'match ms':>10}")
    for name, (decode, count) in impls.items():
        g = decode(g_codes, offsets, kind, etype, False)[:4]
        p = decode(p_codes, offsets, kind, etype, False)[:4]
        count(*g, *p, n_types)  # warm-up (numba compiles or loads its cache here)
        reps = 1 if name == "python" else args.repeat
        t_dec = min(timeit.repeat(lambda: decode(g_codes, offsets, kind, etype, False), number=1, repeat=reps))
        t_cnt = min(timeit.repeat(lambda: count(*g, *p, n_types), number=1, repeat=reps))
        print(f"{name:8} {t_dec * 1e3:10.2f} {t_cnt * 1e3:10.2f}")


if __name__ == "__main__":
    main()
