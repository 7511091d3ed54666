"""Acceptance criteria. Each test records one PASS/FAIL line (shown in the
pytest terminal summary) before asserting.

Pinned tolerances: metric fields 1e-12, gradient relative error 1e-4,
beam/enumeration score 1e-9; runtime budgets as listed per test.
"""
import math
import random
import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import FULL_TAGS, SIMPLE_TAGS, all_sequences, enumerate_best, finite_difference, oracle_report
from oracles import oracle_strict_ok, random_corpus, relative_error
from spanlab import checkpoint
from spanlab import encoder_tagger as enc
from spanlab import seq2seq_tagger as s2s
from spanlab.config import TrainConfig, rng_stream
from spanlab.corpus import Dataset, Sentence, export_distribution_csv, tag_distribution
from spanlab.errors import IllegalTransition
from spanlab.harness import evaluate_all, sweep, train_with_early_stopping
from spanlab.metrics import evaluate
from spanlab.scheme import FULL, SIMPLE
from spanlab.spans import extract_spans, full_to_simple, spans_to_tags
from spanlab.synth import SyntheticCorpus, SynthConfig

METRIC_TOL = 1e-12
GRAD_TOL = 1e-4
SCORE_TOL = 1e-9


def _dataset(tag_seqs, scheme):
    return Dataset("d", [Sentence([f"w{i}" for i in range(len(t))], t) for t in tag_seqs], scheme)


def _fuzz_corpora(n=1000, seed=2024):
    rng = random.Random(seed)
    for i in range(n):
        simple = i % 2 == 1
        gold, pred = random_corpus(rng, SIMPLE_TAGS if simple else FULL_TAGS, max_sents=20, max_len=12)
        yield simple, gold, pred


# 1 ------------------------------------------------------------------------


def test_metric_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for simple, gold, pred in _fuzz_corpora():
        scheme = SIMPLE if simple else FULL
        rep = evaluate(_dataset(gold, scheme), pred)
        want = oracle_report(gold, pred, scheme.entity_types, simple)
        diffs = [abs(v - want[k]) for k, v in vars(rep.labelled).items()]
        diffs.append(abs(rep.unlabelled.matching_score - want["unlabelled_matching_score"]))
        for t, (p, r, f) in want["per_type"].items():
            s = rep.per_type[t]
            diffs += [abs(s.precision - p), abs(s.recall - r), abs(s.f1 - f)]
        worst = max(worst, *diffs)
    elapsed = time.perf_counter() - t0
    ok = worst <= METRIC_TOL and elapsed < 10
    record("1 metric oracle", ok, f"1000 corpora, max |diff| {worst:.2e} (tol {METRIC_TOL}), {elapsed:.2f}s (< 10s)")
    assert ok


# 2 ------------------------------------------------------------------------


def test_span_codec_exhaustive():
    t0 = time.perf_counter()
    checked = bad = 0
    for seq in all_sequences(FULL_TAGS, 5):
        seq = list(seq)
        if not oracle_strict_ok(seq):
            try:
                extract_spans(seq, FULL, "strict")
                bad += 1
            except IllegalTransition:
                pass
            continue
        checked += 1
        spans = extract_spans(seq, FULL, "strict")
        if spans_to_tags(spans, len(seq), FULL) != seq:
            bad += 1
        simple_spans = extract_spans(full_to_simple(seq), SIMPLE, "strict")
        if [(s.start, s.end) for s in spans] != [(s.start, s.end) for s in simple_spans]:
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 5
    record("2 span codec", ok, f"{checked} strict-valid of 19607 sequences (len <= 5), {bad} failures, "
           f"{elapsed:.2f}s (< 5s)")
    assert ok


# 3 ------------------------------------------------------------------------


def test_matching_score_identity():
    violations = 0
    for simple, gold, pred in _fuzz_corpora():
        rep = evaluate(_dataset(gold, SIMPLE if simple else FULL), pred)
        lab = rep.labelled
        if lab.matching_score != lab.recall or rep.unlabelled.matching_score < lab.matching_score:
            violations += 1
    ok = violations == 0
    record("3 matching identity", ok, f"matching == recall and unlabelled >= labelled on 1000 corpora, "
           f"{violations} violations")
    assert ok


# 4 ------------------------------------------------------------------------

GRAD_SENTS = [
    Sentence(["Dmitry", "went", "to", "Moscow", "."], ["B-PER", "O", "O", "B-LOC", "O"]),
    Sentence(["the", "Kalo", "Club", "won"], ["O", "B-ORG", "I-ORG", "O"]),
    Sentence(["Ana", "Lee"], ["B-PER", "I-PER"]),
]


def _redraw(model, seed, scale):
    # away from the tiny default init so every tensor has gradients well above
    # finite-difference noise
    for name, p in model.params.items():
        p[:] = rng_stream(seed, "gradcheck", name).uniform(-scale, scale, p.shape)


def test_gradient_checks():
    t0 = time.perf_counter()
    worst = {}
    for scheme in (FULL, SIMPLE):
        sents = GRAD_SENTS if scheme is FULL else [Sentence(s.tokens, full_to_simple(s.tags)) for s in GRAD_SENTS]
        model = enc.EncoderModel.from_sentences(sents, scheme, TrainConfig(dim=8, max_len=8))
        _redraw(model, 1, 1.0)
        ids, mask, gold = model.batch([s.tokens for s in sents], [s.tags for s in sents])
        _, grads = enc.loss_and_grads(model, ids, mask, gold, 0.8)
        num = finite_difference(lambda: enc.loss_and_grads(model, ids, mask, gold, 0.8)[0], model.params)
        worst[f"encoder/{scheme}"] = max(relative_error(grads[k], num[k]) for k in grads)

        model = s2s.Seq2SeqModel.from_sentences(sents, scheme, TrainConfig(dim=8, max_len=40))
        _redraw(model, 2, 0.5)
        batch = [model.example(s) for s in sents]
        _, grads = s2s.loss_and_grads(model, batch)
        num = finite_difference(lambda: s2s.loss_and_grads(model, batch)[0], model.params)
        worst[f"seq2seq/{scheme}"] = max(relative_error(grads[k], num[k]) for k in grads)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < GRAD_TOL and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record("4 gradient checks", ok, f"d=8, max rel. error per model {detail} (tol {GRAD_TOL}), {elapsed:.1f}s (< 60s)")
    assert ok


# 5 ------------------------------------------------------------------------


def test_weighted_ce_contract():
    rng = np.random.default_rng(5)
    identical = increasing = True
    for _ in range(200):
        n = int(rng.integers(1, 12))
        probs = rng.dirichlet(np.ones(7), size=n)
        gold = rng.integers(0, 7, size=n)
        if enc.weighted_ce(probs, gold, 1.0) != enc.cross_entropy(probs, gold):
            identical = False
        gold[int(rng.integers(n))] = 0
        values = [enc.weighted_ce(probs, gold, a).total for a in np.linspace(0.01, 1.0, 25)]
        if not all(a < b for a, b in zip(values, values[1:])):
            increasing = False
    ok = identical and increasing
    record("5 weighted CE", ok, f"alpha=1 bit-identical to CE: {identical}; strictly increasing in alpha "
           f"with an O token: {increasing} (200 random cases)")
    assert ok


# 6 ------------------------------------------------------------------------


def test_beam_search_oracle():
    t0 = time.perf_counter()
    mismatches = 0
    worst = 0.0
    sents = [Sentence(s.tokens, full_to_simple(s.tags)) for s in GRAD_SENTS]
    for i in range(100):
        model = s2s.Seq2SeqModel.from_sentences(sents, SIMPLE, TrainConfig(dim=8, seed=i, few_shot=False, max_len=16))
        _redraw(model, 100 + i, 2.0)
        gen = [int(g) for g in model.generable]
        assert len(gen) <= 4
        max_len = 1 + i % 3
        stream = model.prompt(sents[i % 3].tokens)
        ids, score = s2s.beam_search_ids(model, stream, len(gen) ** max_len, max_len)
        want, best = enumerate_best(lambda seq: s2s.sequence_logprob(model, stream, seq), gen, model.eos, max_len)
        worst = max(worst, abs(score - best))
        if ids != want or abs(score - best) > SCORE_TOL:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    record("6 beam oracle", ok, f"100 tiny models (vocab 4, max_len 1-3), {mismatches} mismatches, "
           f"max score diff {worst:.1e}, {elapsed:.1f}s (< 30s)")
    assert ok


# 7 ------------------------------------------------------------------------

ENCODER_CFG = TrainConfig(learning_rate=3e-3, dim=64, min_count=2, max_epochs=20, patience=5, alpha=0.8)
SEQ2SEQ_CFG = TrainConfig(learning_rate=3e-3, dim=64, min_count=2, max_epochs=20, patience=5)


@pytest.fixture(scope="module")
def directional():
    t0 = time.perf_counter()
    splits = SyntheticCorpus(SynthConfig()).splits()
    results = {"splits": splits}
    for scheme in (FULL, SIMPLE):
        data = {k: v.converted(scheme) for k, v in splits.items()}
        for kind, cfg in (("encoder", ENCODER_CFG), ("seq2seq", SEQ2SEQ_CFG)):
            rec, model = train_with_early_stopping(kind, cfg, data["train"], data["dev"])
            bundle = evaluate_all(model, [data["test"], data["ood"]], [scheme])
            results[kind, scheme.kind.value] = (rec, bundle)
    results["elapsed"] = time.perf_counter() - t0
    return results


def _f1(results, kind, scheme, split):
    return results[kind, scheme][1].reports[split, scheme].labelled.f1


def test_synthetic_corpus_shape(directional):
    splits = directional["splits"]
    sizes = {k: len(v) for k, v in splits.items()}
    dist = tag_distribution([splits["train"]])
    o_share = dist.proportions["train", "O"]
    b = {t: dist.counts["train", f"B-{t}"] for t in ("PER", "LOC", "ORG")}
    ok = sizes == {"train": 5000, "dev": 500, "test": 500, "ood": 500} and o_share > 0.9 and b["PER"] > b["LOC"] > b["ORG"]
    record("7 corpus shape", ok, f"sizes {sizes}, O share {o_share:.3f} (> 0.9), entity spans PER {b['PER']} > "
           f"LOC {b['LOC']} > ORG {b['ORG']}")
    assert ok


def test_encoder_reaches_dev_f1(directional):
    rec = directional["encoder", "full"][0]
    ok = rec.best_row.dev_f1 >= 0.95 and len(rec.epochs) <= 20
    record("7a encoder dev F1", ok, f"best dev F1 {rec.best_row.dev_f1:.4f} (>= 0.95) at epoch {rec.best_epoch}, "
           f"{len(rec.epochs)} epochs run (<= 20)")
    assert ok


def test_encoder_beats_seq2seq(directional):
    pairs = {(s, d): (_f1(directional, "encoder", s, d), _f1(directional, "seq2seq", s, d))
             for s in ("full", "simple") for d in ("test", "ood")}
    ok = all(e >= q for e, q in pairs.values())
    detail = ", ".join(f"{s}/{d} {e:.3f} >= {q:.3f}" for (s, d), (e, q) in pairs.items())
    record("7b encoder >= seq2seq", ok, detail)
    assert ok


def test_simple_scheme_scores_higher(directional):
    pairs = {(k, d): (_f1(directional, k, "simple", d), _f1(directional, k, "full", d))
             for k in ("encoder", "seq2seq") for d in ("test", "ood")}
    ok = all(s > f for s, f in pairs.values())
    detail = ", ".join(f"{k}/{d} simple {s:.3f} > full {f:.3f}" for (k, d), (s, f) in pairs.items())
    record("7c simple > full", ok, detail)
    assert ok


def test_ood_drop(directional):
    pairs = {(k, s): (_f1(directional, k, s, "test"), _f1(directional, k, s, "ood"))
             for k in ("encoder", "seq2seq") for s in ("full", "simple")}
    ok = all(t > o for t, o in pairs.values())
    detail = ", ".join(f"{k}/{s} test {t:.3f} > ood {o:.3f}" for (k, s), (t, o) in pairs.items())
    record("7d OOD drop", ok, detail)
    assert ok


def test_org_hardest_type(directional):
    pairs = {}
    for kind in ("encoder", "seq2seq"):
        per_type = directional[kind, "full"][1].reports["test", "full"].per_type
        pairs[kind] = (per_type["ORG"].f1, per_type["PER"].f1)
    ok = all(o <= p for o, p in pairs.values())
    detail = ", ".join(f"{k} test ORG {o:.3f} <= PER {p:.3f}" for k, (o, p) in pairs.items())
    record("7e ORG <= PER", ok, detail)
    assert ok


def test_directional_runtime(directional):
    elapsed = directional["elapsed"]
    ok = elapsed < 15 * 60
    record("7 runtime", ok, f"4 trainings + evaluation in {elapsed:.0f}s (< 900s)")
    assert ok


# 8 ------------------------------------------------------------------------


def test_determinism(tmp_path):
    corpus = SyntheticCorpus(SynthConfig(n_train=200, n_dev=40, n_test=1, n_ood=1, seed=3))
    train, dev = corpus.split("train"), corpus.split("dev")
    same = []
    for kind, cfg in (("encoder", TrainConfig(learning_rate=1e-2, dim=16, max_epochs=3, patience=3, seed=7)),
                      ("seq2seq", TrainConfig(learning_rate=1e-2, dim=8, max_epochs=2, patience=2, seed=7))):
        files = []
        for run in ("a", "b"):
            ck, log = tmp_path / f"{kind}{run}.ckpt", tmp_path / f"{kind}{run}.csv"
            train_with_early_stopping(kind, cfg, train, dev, out=ck, csv_out=log)
            files.append((ck.read_bytes(), log.read_bytes()))
        same.append(files[0] == files[1])
    cfg = TrainConfig(learning_rate=1e-2, dim=8, max_epochs=1, patience=1)
    sweeps = [sweep("alpha", [0.7, 1.0], cfg, "encoder", train, dev).render("csv") for _ in range(2)]
    dists = [export_distribution_csv(tag_distribution([SyntheticCorpus(SynthConfig(n_train=50, n_dev=5, n_test=5,
                                                                                   n_ood=5)).split("train")]))
             for _ in range(2)]
    ok = all(same) and sweeps[0] == sweeps[1] and dists[0] == dists[1]
    record("8 determinism", ok, f"checkpoints + epoch CSVs identical (encoder {same[0]}, seq2seq {same[1]}), "
           f"sweep CSV {sweeps[0] == sweeps[1]}, distribution CSV {dists[0] == dists[1]}")
    assert ok


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
