import random

import pytest

from oracles import FULL_TAGS, SIMPLE_TAGS, oracle_report, random_corpus
from spanlab.corpus import Dataset, Sentence
from spanlab.errors import IllegalTransition, LengthMismatch
from spanlab.metrics import SpanConfusion, confuse, evaluate, pct, render_per_type, render_table, report
from spanlab.scheme import FULL, SIMPLE


def _dataset(tag_seqs, scheme=FULL):
    return Dataset("d", [Sentence([f"w{i}" for i in range(len(t))], t) for t in tag_seqs], scheme)


def test_one_type_confusion():
    gold = _dataset([["B-PER", "O", "O", "B-LOC", "O"]])
    r = evaluate(gold, [["B-PER", "O", "O", "B-PER", "O"]])
    assert r.labelled.matching_score == 0.5
    assert r.labelled.precision == 0.5
    assert r.labelled.recall == 0.5
    assert r.unlabelled.matching_score == 1.0
    assert r.per_type["LOC"].recall == 0.0
    assert r.per_type["PER"].precision == 0.5
    assert r.labelled.macro_precision == pytest.approx(0.25)
    assert r.labelled.accuracy == pytest.approx(0.8)


def test_perfect_and_empty_predictions():
    gold = _dataset([["B-ORG", "I-ORG", "O"]])
    assert evaluate(gold, [["B-ORG", "I-ORG", "O"]]).labelled.f1 == 1.0
    r = evaluate(gold, [["O", "O", "O"]])
    assert r.labelled.precision == 0.0 and r.labelled.recall == 0.0 and r.labelled.f1 == 0.0


def test_no_gold_spans_gives_zero_not_nan():
    r = evaluate(_dataset([["O", "O"]]), [["B-PER", "O"]])
    assert r.labelled.recall == 0.0 and r.labelled.macro_f1 == 0.0 and r.unlabelled.matching_score == 0.0


def test_boundary_error_is_neither_labelled_nor_unlabelled():
    r = evaluate(_dataset([["B-LOC", "I-LOC"]]), [["B-LOC", "O"]])
    assert r.labelled.matching_score == 0.0 and r.unlabelled.matching_score == 0.0


def test_macro_averages_only_supported_types():
    gold = _dataset([["B-PER", "O"]])
    r = evaluate(gold, [["B-PER", "B-ORG"]])
    assert r.labelled.macro_recall == 1.0
    assert r.labelled.macro_precision == 1.0


def test_length_mismatch():
    gold = _dataset([["O", "O"], ["O"]])
    with pytest.raises(LengthMismatch) as exc:
        evaluate(gold, [["O", "O"], ["O", "O"]])
    assert exc.value.index == 1
    with pytest.raises(LengthMismatch):
        evaluate(gold, [["O", "O"]])


def test_strict_policy_reports_sentence():
    gold = _dataset([["O"], ["O", "B-PER"]])
    with pytest.raises(IllegalTransition) as exc:
        evaluate(gold, [["O"], ["O", "I-PER"]], policy="strict")
    assert exc.value.index == 1 and exc.value.sentence == 1
    evaluate(gold, [["O"], ["O", "I-PER"]], policy="repair")


@pytest.mark.parametrize("simple", [False, True])
def test_fuzz_against_set_oracle(simple):
    rng = random.Random(11)
    tags, scheme = (SIMPLE_TAGS, SIMPLE) if simple else (FULL_TAGS, FULL)
    for _ in range(200):
        gold, pred = random_corpus(rng, tags)
        r = evaluate(_dataset(gold, scheme), pred)
        want = oracle_report(gold, pred, scheme.entity_types, simple)
        for k, v in vars(r.labelled).items():
            assert abs(v - want[k]) <= 1e-12, k
        assert abs(r.unlabelled.matching_score - want["unlabelled_matching_score"]) <= 1e-12
        for t, (p, rc, f) in want["per_type"].items():
            assert (r.per_type[t].precision, r.per_type[t].recall) == pytest.approx((p, rc), abs=1e-12)
            assert abs(r.per_type[t].f1 - f) <= 1e-12


def test_confusion_is_additive():
    rng = random.Random(3)
    g1, p1 = random_corpus(rng, FULL_TAGS)
    g2, p2 = random_corpus(rng, FULL_TAGS)
    whole = confuse(_dataset(g1 + g2), p1 + p2)
    assert whole == confuse(_dataset(g1), p1) + confuse(_dataset(g2), p2)
    assert report(whole) == evaluate(_dataset(g1 + g2), p1 + p2)


def test_empty_confusion():
    r = report(SpanConfusion.empty(FULL.entity_types))
    assert all(v == 0.0 for v in vars(r.labelled).values())


@pytest.mark.parametrize(
    "value,text",
    [(0.84749, "84.7"), (0.8475, "84.8"), (1.0, "100.0"), (0.0, "0.0"), (0.8765, "87.7"), (0.0005, "0.1")],
)
def test_percentage_rounding(value, text):
    assert pct(value) == text


def test_table_layout():
    gold = _dataset([["B-PER", "O", "O", "B-LOC", "O"]])
    r = evaluate(gold, [["B-PER", "O", "O", "B-PER", "O"]])
    text = render_table({"Test": r}).splitlines()
    assert text[0].split() == ["Metric", "Test"]
    assert [line.rsplit(None, 1)[0].strip() for line in text[1:]] == [
        "Matching Score",
        "Precision",
        "Recall",
        "F1 Score",
        "Macro Precision",
        "Macro Recall",
        "Macro F1 Score",
        "Accuracy",
        "Unlabelled Matching Score",
    ]
    assert text[1].endswith("50.0")
    csv = render_table({"Test": r}, fmt="csv", accuracy=False).splitlines()
    assert csv[0] == "Metric,Test"
    assert "Accuracy,80.0" not in csv and "Unlabelled Matching Score,100.0" in csv


def test_per_type_layout():
    gold = _dataset([["B-PER", "O", "O", "B-LOC", "O"]])
    r = evaluate(gold, [["B-PER", "O", "O", "B-PER", "O"]])
    csv = render_per_type({"Test": r, "OOD": r}, FULL.entity_types, fmt="csv").splitlines()
    assert csv[0] == "Metric,LOC Test,LOC OOD,ORG Test,ORG OOD,PER Test,PER OOD"
    assert csv[3] == "F1 Score,0.0,0.0,0.0,0.0,66.7,66.7"


# reported encoder results (Full Test, Full OOD, Simple Test, Simple OOD)
REPORTED = {
    "matching": (84.8, 72.8, 87.6, 79.7),
    "precision": (84.6, 80.7, 86.4, 85.0),
    "recall": (84.8, 72.8, 87.6, 79.7),
    "f1": (84.7, 76.6, 87.0, 82.3),
    "unlabelled": (87.7, 79.3, 87.6, 79.7),
}


def test_reported_table_has_the_same_identities():
    assert REPORTED["matching"] == REPORTED["recall"]
    assert all(u >= m for u, m in zip(REPORTED["unlabelled"], REPORTED["matching"]))
    # a single entity type makes unlabelled and labelled matching coincide
    assert REPORTED["unlabelled"][2:] == REPORTED["matching"][2:]
    for p, r, f in zip(REPORTED["precision"], REPORTED["recall"], REPORTED["f1"]):
        assert abs(2 * p * r / (p + r) - f) < 0.1


@pytest.mark.parametrize("seed", range(50))
def test_simple_scheme_unlabelled_equals_labelled(seed):
    gold, pred = random_corpus(random.Random(seed), SIMPLE_TAGS)
    r = evaluate(_dataset(gold, SIMPLE), pred)
    assert r.unlabelled.matching_score == r.labelled.matching_score
