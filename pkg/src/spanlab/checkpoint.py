"""Versioned JSON checkpoints for both model kinds."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoder_tagger import EncoderModel
from .scheme import get_scheme
from .seq2seq_tagger import FewShotPrefix, PromptTemplate, Seq2SeqModel

FORMAT = "spanlab-checkpoint"
VERSION = 1


def model_to_dict(model, config: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "scheme": model.scheme.kind.value,
        "dim": model.dim,
        "max_len": model.max_len,
        "vocab": list(model.vocab),
        "config": config or {},
        "meta": model.meta,
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in model.params.items()},
    }
    if model.kind == "seq2seq":
        doc["out_vocab"] = list(model.out_vocab)
        doc["template"] = model.template.id
        doc["few_shot"] = [list(e) for e in model.prefix.examples] if model.prefix else None
    return doc


def dumps(model, config: dict | None = None) -> str:
    # sorted keys and repr floats keep the file byte-stable and lossless
    return json.dumps(model_to_dict(model, config), sort_keys=True, separators=(",", ":")) + "\n"


def save(model, path: str | Path, config: dict | None = None) -> None:
    Path(path).write_text(dumps(model, config), encoding="utf-8")


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise ValueError("not a spanlab checkpoint")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["params"].items()}
    scheme = get_scheme(doc["scheme"])
    if doc["kind"] == "encoder":
        return EncoderModel(doc["vocab"], scheme, params, doc["dim"], doc["max_len"], doc.get("meta", {}))
    if doc["kind"] == "seq2seq":
        few = doc.get("few_shot")
        prefix = FewShotPrefix(tuple(tuple(e) for e in few)) if few else None
        return Seq2SeqModel(
            doc["vocab"], doc["out_vocab"], scheme, params, doc["dim"], doc["max_len"],
            PromptTemplate(doc["template"]), prefix, doc.get("meta", {}),
        )
    raise ValueError(f"unknown model kind {doc['kind']!r}")


def load(path: str | Path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    model = model_from_dict(doc)
    return model, doc.get("config", {})
