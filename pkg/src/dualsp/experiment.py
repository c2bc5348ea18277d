"""Desk-scale semi-supervised experiment on the toy domain.

Mirrors the semi-supervised comparison grid: keep a fraction of the training
set labeled, break the rest into unpaired queries and logical forms, pre-train
supervised baselines, then run the dual-learning game on top and compare test
accuracy of the semantic parser.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .data import semi_split, toy_domain
from .duallearn import DualConfig, dual_train, evaluate_q2lf
from .training import pretrain_all, train_lf_language_model


@dataclass
class ExperimentResult:
    seed: int
    baseline_valid_acc: float
    baseline_test_acc: float
    dual_valid_acc: float
    dual_test_acc: float
    log_rows: list


def run_semi_supervised_experiment(
    seed: int = 0,
    labeled_ratio: float = 0.5,
    d_w: int = 32,
    n_hidden: int = 64,
    use_copy: bool = False,
    use_queries: bool = True,
    use_lfs: bool = True,
    validity_mode: str = "grammar",
    pretrain_epochs: int = 120,
    pretrain_lr: float = 2e-3,
    dual_iters: int = 200,
    beam_k: int = 3,
    eval_every: int = 25,
    max_decode_len: int = 40,
) -> ExperimentResult:
    torch.set_num_threads(1)
    domain = toy_domain(seed=0)
    bundle = semi_split(domain.train, labeled_ratio, seed)
    queries = bundle.queries if use_queries else []
    lfs = bundle.lfs if use_lfs else []

    q2lf, lf2q, lm_q = pretrain_all(
        bundle.labeled,
        domain.valid,
        unlabeled_queries=queries,
        lexicon=domain.lexicon,
        d_w=d_w,
        n_hidden=n_hidden,
        use_copy=use_copy,
        seed=seed,
        epochs=pretrain_epochs,
        lr=pretrain_lr,
        batch_size=32,
        max_decode_len=max_decode_len,
        lm_epochs=8,
    )
    baseline_valid = evaluate_q2lf(q2lf, domain.valid, max_decode_len)
    baseline_test = evaluate_q2lf(q2lf, domain.test, max_decode_len)

    lm_lf = None
    if validity_mode == "lflm":
        lm_lf = train_lf_language_model(
            [ex.lf for ex in bundle.labeled] + list(lfs),
            d_w=d_w, n_hidden=n_hidden, seed=seed,
        )

    cfg = DualConfig(
        beam_k=beam_k,
        max_iters=dual_iters,
        validity_mode=validity_mode,
        rng_seed=seed,
        max_decode_len=max_decode_len,
        eval_every=eval_every,
    )
    log = dual_train(
        bundle.labeled, queries, lfs, q2lf, lf2q, lm_q, domain.spec, cfg,
        valid_set=domain.valid, lex=domain.lexicon, lm_lf=lm_lf,
    )
    dual_valid = evaluate_q2lf(q2lf, domain.valid, max_decode_len)
    dual_test = evaluate_q2lf(q2lf, domain.test, max_decode_len)
    return ExperimentResult(
        seed=seed,
        baseline_valid_acc=baseline_valid,
        baseline_test_acc=baseline_test,
        dual_valid_acc=dual_valid,
        dual_test_acc=dual_test,
        log_rows=log,
    )
