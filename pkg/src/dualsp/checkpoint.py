"""Deterministic checkpoint container for models.

Plain pickled dict of vocabularies, hyperparameters and float64-exact numpy
tensors; identical model state always serializes to identical bytes, and
load(save(m)) reproduces bit-identical inference outputs.
"""

from __future__ import annotations

import pickle
from pathlib import Path
from typing import Union

from .lexicon import EntityLexicon
from .lm import LanguageModel
from .seq2seq import Seq2SeqModel
from .vocab import Vocabulary

import torch

FORMAT_VERSION = 1


def _state_arrays(model) -> dict:
    return {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}


def save_model(model: Union[Seq2SeqModel, LanguageModel], path) -> None:
    if isinstance(model, Seq2SeqModel):
        payload = {
            "format": FORMAT_VERSION,
            "kind": "seq2seq",
            "src_vocab": model.src_vocab.tokens,
            "tgt_vocab": model.tgt_vocab.tokens,
            "d_w": model.d_w,
            "n_hidden": model.n_hidden,
            "use_copy": model.use_copy,
            "lexicon": model.lexicon.to_text() if model.lexicon else None,
            "state": _state_arrays(model),
        }
    else:
        payload = {
            "format": FORMAT_VERSION,
            "kind": "lm",
            "vocab": model.vocab.tokens,
            "d_w": model.d_w,
            "n_hidden": model.n_hidden,
            "state": _state_arrays(model),
        }
    Path(path).write_bytes(pickle.dumps(payload, protocol=4))


def load_model(path) -> Union[Seq2SeqModel, LanguageModel]:
    payload = pickle.loads(Path(path).read_bytes())
    if payload["format"] != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {payload['format']}")
    if payload["kind"] == "seq2seq":
        lex = (
            EntityLexicon.from_text(payload["lexicon"])
            if payload["lexicon"] is not None
            else None
        )
        model = Seq2SeqModel(
            Vocabulary(payload["src_vocab"]),
            Vocabulary(payload["tgt_vocab"]),
            d_w=payload["d_w"],
            n_hidden=payload["n_hidden"],
            use_copy=payload["use_copy"],
            lexicon=lex,
        )
    elif payload["kind"] == "lm":
        model = LanguageModel(
            Vocabulary(payload["vocab"]),
            d_w=payload["d_w"],
            n_hidden=payload["n_hidden"],
        )
    else:
        raise ValueError(f"unknown checkpoint kind {payload['kind']!r}")
    model.load_state_dict(
        {k: torch.as_tensor(v) for k, v in payload["state"].items()}
    )
    return model
