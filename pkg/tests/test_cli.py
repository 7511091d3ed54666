import json

import pytest

from spanlab.cli import main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--n-train", "120", "--n-dev", "30", "--n-test", "30", "--n-ood", "30", str(out)]) == 0
    return out


def test_synth_writes_splits(corpus):
    for name in ("train", "dev", "test", "ood"):
        assert (corpus / f"{name}.conll").exists()
    assert (corpus / "distribution.csv").read_text().startswith("dataset,tag,count,proportion\n")


def test_stats(corpus, tmp_path, capsys):
    assert main(["stats", "--format", "csv", "--csv", str(tmp_path / "d.csv"), str(corpus / "train.conll")]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "dataset,tag,count,proportion"
    assert (tmp_path / "d.csv").read_text() == out


def test_convert_and_eval(corpus, tmp_path, capsys):
    simple = tmp_path / "simple.conll"
    assert main(["convert", "--from", "full", "--to", "simple", str(corpus / "dev.conll"), str(simple)]) == 0
    assert main(["eval", "--scheme", "simple", str(simple), str(simple)]) == 0
    text = capsys.readouterr().out
    assert "F1 Score" in text and "100.0" in text
    assert main(["eval", "--format", "json", "--per-type", str(corpus / "dev.conll"), str(corpus / "dev.conll")]) == 0
    assert json.loads(capsys.readouterr().out)["labelled_f1"] == 1.0


def test_eval_rejects_token_mismatch(corpus, capsys):
    assert main(["eval", str(corpus / "dev.conll"), str(corpus / "test.conll")]) == 2
    assert "error" in capsys.readouterr().err


def test_train_predict_evaluate_error_report(corpus, tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SPANLAB_SEED", raising=False)
    ckpt = tmp_path / "enc.ckpt"
    args = ["train-encoder", "--lr", "1e-2", "--epochs", "2", "--patience", "1", "--dim", "16",
            "--log-csv", str(tmp_path / "log.csv"), "--record", str(tmp_path / "rec.json"),
            str(corpus / "train.conll"), str(corpus / "dev.conll"), str(ckpt)]
    assert main(args) == 0
    assert "best epoch" in capsys.readouterr().out
    assert json.loads((tmp_path / "rec.json").read_text())["config"]["learning_rate"] == 1e-2
    pred = tmp_path / "pred.conll"
    assert main(["predict", "--model", str(ckpt), str(corpus / "test.conll"), str(pred)]) == 0
    assert main(["eval", str(corpus / "test.conll"), str(pred)]) == 0
    assert main(["error-report", "-k", "2", str(corpus / "test.conll"), str(pred)]) == 0
    assert main(["evaluate-all", "--model", str(ckpt), "--format", "csv",
                 str(corpus / "test.conll"), str(corpus / "ood.conll")]) == 0
    out = capsys.readouterr().out
    assert "Metric,Full Test,Full OOD,Simple Test,Simple OOD" in out


def test_seed_flag_env_and_config(corpus, tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[spanlab]\nversion = 1\nlearning_rate = 0.01\ndim = 8\nmax_epochs = 1\npatience = 1\nseed = 5\n")
    data = [str(corpus / "train.conll"), str(corpus / "dev.conll")]

    def seed_of(extra, env=None):
        if env is None:
            monkeypatch.delenv("SPANLAB_SEED", raising=False)
        else:
            monkeypatch.setenv("SPANLAB_SEED", env)
        rec = tmp_path / "r.json"
        assert main(["train-encoder", "--config", str(cfg), "--record", str(rec), *extra, *data,
                     str(tmp_path / "m.ckpt")]) == 0
        return json.loads(rec.read_text())["config"]["seed"]

    assert seed_of([]) == 5
    assert seed_of([], env="9") == 9
    assert seed_of(["--seed", "2"], env="9") == 2


def test_train_seq2seq_and_sweep(corpus, tmp_path, capsys):
    ckpt = tmp_path / "s2s.ckpt"
    assert main(["train-seq2seq", "--lr", "1e-2", "--epochs", "1", "--patience", "1", "--dim", "8",
                 "--template", "2", "--few-shot", "off", str(corpus / "dev.conll"), str(corpus / "dev.conll"),
                 str(ckpt)]) == 0
    pred = tmp_path / "p.conll"
    assert main(["predict", "--model", str(ckpt), "--strategy", "likelihood", str(corpus / "dev.conll"), str(pred)]) == 0
    assert main(["sweep", "--axis", "alpha", "--values", "0.7,1", "--epochs", "1", "--patience", "1", "--dim", "8",
                 "--format", "csv", str(corpus / "dev.conll"), str(corpus / "dev.conll")]) == 0
    assert capsys.readouterr().out.splitlines()[-5].startswith("Best-model Epoch,")


def test_short_epochs_flag_clamps_default_patience(monkeypatch):
    from spanlab.cli import build_parser, resolve_config

    monkeypatch.delenv("SPANLAB_SEED", raising=False)
    args = build_parser().parse_args(["train-encoder", "--epochs", "2", "t", "d", "m"])
    config = resolve_config(args)
    assert (config.max_epochs, config.patience) == (2, 2)
    args = build_parser().parse_args(["train-encoder", "--epochs", "2", "--patience", "3", "t", "d", "m"])
    with pytest.raises(ValueError):
        resolve_config(args)
