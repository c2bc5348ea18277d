"""Model construction and MLE pre-training with early stopping."""

from __future__ import annotations

import random
from typing import Callable, Optional, Sequence

import torch

from .data import ParallelExample
from .duallearn import evaluate_q2lf, lf_to_dual_input
from .lexicon import EntityLexicon
from .lm import LanguageModel, lm_perplexity, lm_train
from .seq2seq import Seq2SeqModel, make_adam, mle_train_step
from .vocab import EOS, UNK_COPY, Vocabulary


def make_q2lf(
    train: Sequence[ParallelExample],
    lexicon: Optional[EntityLexicon],
    d_w: int = 100,
    n_hidden: int = 200,
    use_copy: bool = False,
    seed: int = 0,
) -> Seq2SeqModel:
    src_vocab = Vocabulary.from_corpus([ex.query for ex in train])
    tgt_vocab = Vocabulary.from_corpus(
        [ex.lf.split() for ex in train], extra=(UNK_COPY,)
    )
    return Seq2SeqModel(
        src_vocab, tgt_vocab, d_w, n_hidden, use_copy=use_copy,
        lexicon=lexicon, seed=seed,
    )


def make_lf2q(
    train: Sequence[ParallelExample],
    lexicon: Optional[EntityLexicon],
    d_w: int = 100,
    n_hidden: int = 200,
    seed: int = 0,
) -> Seq2SeqModel:
    sources = [
        lf_to_dual_input(ex.lf.split(), lexicon, query=ex.query) for ex in train
    ]
    src_vocab = Vocabulary.from_corpus(sources)
    tgt_vocab = Vocabulary.from_corpus([ex.query for ex in train])
    return Seq2SeqModel(
        src_vocab, tgt_vocab, d_w, n_hidden, use_copy=False,
        lexicon=None, seed=seed + 1,
    )


def mle_pretrain(
    model: Seq2SeqModel,
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    eval_fn: Optional[Callable[[Seq2SeqModel], float]] = None,
    epochs: int = 30,
    lr: float = 1e-3,
    batch_size: int = 10,
    seed: int = 0,
    patience: int = 5,
) -> list[tuple[int, float, float]]:
    """Adam MLE over (source, target) pairs; targets get EOS appended here.
    Early-stops on the eval metric (higher is better) and restores the best
    state.  Returns (epoch, mean loss, metric) rows."""
    import copy as _copy

    if not pairs:
        raise ValueError("empty training set")
    opt = make_adam(model, lr)
    rng = random.Random(seed)
    order = list(range(len(pairs)))
    best_metric = float("-inf")
    best_state = _copy.deepcopy(model.state_dict())
    since_best = 0
    history: list[tuple[int, float, float]] = []
    for epoch in range(1, epochs + 1):
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = [
                (pairs[i][0], list(pairs[i][1]) + [EOS])
                for i in order[start : start + batch_size]
            ]
            total += mle_train_step(model, opt, batch) * len(batch)
        mean_loss = total / len(order)
        metric = eval_fn(model) if eval_fn is not None else -mean_loss
        history.append((epoch, mean_loss, metric))
        if metric > best_metric:
            best_metric = metric
            best_state = _copy.deepcopy(model.state_dict())
            since_best = 0
        else:
            since_best += 1
            if since_best >= patience:
                break
    model.load_state_dict(best_state)
    return history


def pretrain_all(
    train: Sequence[ParallelExample],
    valid: Sequence[ParallelExample],
    unlabeled_queries: Sequence[Sequence[str]] = (),
    lexicon: Optional[EntityLexicon] = None,
    d_w: int = 100,
    n_hidden: int = 200,
    use_copy: bool = False,
    seed: int = 0,
    epochs: int = 30,
    lr: float = 1e-3,
    batch_size: int = 10,
    max_decode_len: int = 60,
    lm_epochs: int = 10,
    patience: int = 40,
) -> tuple[Seq2SeqModel, Seq2SeqModel, LanguageModel]:
    """Pre-train Q2LF and LF2Q on labeled pairs and the query LM on all
    labeled and unlabeled queries."""
    q2lf = make_q2lf(train, lexicon, d_w, n_hidden, use_copy, seed)
    lf2q = make_lf2q(train, lexicon, d_w, n_hidden, seed)

    q2lf_pairs = [(ex.query, ex.lf.split()) for ex in train]
    lf2q_pairs = [
        (lf_to_dual_input(ex.lf.split(), lexicon, query=ex.query), list(ex.query))
        for ex in train
    ]

    def q2lf_metric(m: Seq2SeqModel) -> float:
        return evaluate_q2lf(m, valid, max_decode_len) if valid else 0.0

    valid_lf2q = [
        (lf_to_dual_input(ex.lf.split(), lexicon, query=ex.query), list(ex.query))
        for ex in valid
    ]

    def lf2q_metric(m: Seq2SeqModel) -> float:
        if not valid_lf2q:
            return 0.0
        decoded = m.greedy_decode_batch([src for src, _ in valid_lf2q], max_decode_len)
        hits = sum(
            [t for t in toks if t != EOS] == tgt
            for toks, (_, tgt) in zip(decoded, valid_lf2q)
        )
        return hits / len(valid_lf2q)

    mle_pretrain(q2lf, q2lf_pairs, q2lf_metric, epochs, lr, batch_size, seed, patience)
    mle_pretrain(lf2q, lf2q_pairs, lf2q_metric, epochs, lr, batch_size, seed + 1, patience)

    lm_corpus = [list(ex.query) for ex in train] + [list(q) for q in unlabeled_queries]
    lm_vocab = Vocabulary.from_corpus(lm_corpus)
    lm_q = LanguageModel(lm_vocab, d_w, n_hidden, seed=seed + 2)
    lm_train(lm_q, lm_corpus, epochs=lm_epochs, lr=lr, batch_size=batch_size, seed=seed)
    return q2lf, lf2q, lm_q


def train_lf_language_model(
    lfs: Sequence[str],
    d_w: int = 100,
    n_hidden: int = 200,
    seed: int = 0,
    epochs: int = 10,
    lr: float = 1e-3,
    batch_size: int = 10,
) -> LanguageModel:
    """Logical-form LM for the soft validity-reward ablation."""
    corpus = [lf.split() for lf in lfs]
    lm = LanguageModel(Vocabulary.from_corpus(corpus), d_w, n_hidden, seed=seed + 3)
    lm_train(lm, corpus, epochs=epochs, lr=lr, batch_size=batch_size, seed=seed)
    return lm
