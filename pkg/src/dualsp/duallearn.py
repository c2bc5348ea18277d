"""The two-directed-loop dual learning game.

Each iteration runs three stages: a rollout loop starting from a query
(parse, check validity, reconstruct the query), a rollout loop starting from
a logical form (generate a query, score its fluency, reconstruct the form),
and one supervised fine-tuning step on a labeled pair.  Rollouts are the k
beam hypotheses; updates are plain gradient ascent on the policy-gradient
objective with the loop's learning rate.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import torch

from .data import ParallelExample, exact_match_accuracy
from .lexicon import EntityLexicon, kb_inverse_select
from .lm import LanguageModel, lm_score_normalized
from .ontology import DomainSpec, grammar_error_indicator
from .seq2seq import Seq2SeqModel, gradient_ascent_step
from .vocab import EOS


class EmptyBeam(RuntimeError):
    pass


class EmptyLabeledSet(ValueError):
    pass


class MissingLM(ValueError):
    pass


@dataclass
class DualConfig:
    alpha: float = 0.5
    beta: float = 0.5
    beam_k: int = 3
    eta1: float = 1e-3
    eta2: float = 1e-3
    batch_size: int = 10
    max_iters: int = 500
    validity_mode: str = "grammar"  # or "lflm"
    rng_seed: int = 0
    max_decode_len: int = 60
    use_reward_baseline: bool = False
    eval_every: int = 50
    patience: int = 10

    def __post_init__(self):
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.beam_k < 1:
            raise ValueError("beam_k must be >= 1")
        if self.validity_mode not in ("grammar", "lflm"):
            raise ValueError("validity_mode must be 'grammar' or 'lflm'")


@dataclass
class RewardSignal:
    validity: float
    reconstruction: float
    total: float


# --- rewards -----------------------------------------------------------------

def validity_reward_lf(
    y: str,
    spec: DomainSpec,
    mode: str = "grammar",
    lm_lf: Optional[LanguageModel] = None,
) -> float:
    """Well-formedness of a logical form: hard grammar/type check (0/1) or a
    length-normalized logical-form LM score (<= 0)."""
    if mode == "grammar":
        return float(grammar_error_indicator(y, spec).valid)
    if lm_lf is None:
        raise MissingLM("lflm validity mode requires a logical-form LM")
    return lm_score_normalized(lm_lf, y.split())


def validity_reward_q(x: Sequence[str], lm_q: LanguageModel) -> float:
    """Fluency of a query under the frozen query LM."""
    return lm_score_normalized(lm_q, x)


def reconstruction_reward(
    model: Seq2SeqModel, source: Sequence[str], target: Sequence[str]
) -> float:
    """log P(target | source) under the reconstructing model; <= 0."""
    with torch.no_grad():
        return model.sequence_log_prob(source, list(target) + [EOS]).item()


def mix_reward(validity: float, reconstruction: float, mix: float) -> RewardSignal:
    return RewardSignal(
        validity=validity,
        reconstruction=reconstruction,
        total=mix * validity + (1.0 - mix) * reconstruction,
    )


# --- input preparation -------------------------------------------------------

def lf_to_dual_input(
    lf_tokens: Sequence[str],
    lex: Optional[EntityLexicon],
    query: Optional[Sequence[str]] = None,
    rng_seed: int = 0,
) -> list[str]:
    """Rewrite entity tokens of a logical form into noun phrases before
    feeding it to the LF2Q model (reverse entity mapping)."""
    if lex is None:
        return list(lf_tokens)
    out: list[str] = []
    for i, tok in enumerate(lf_tokens):
        if tok in lex.backward:
            out.extend(kb_inverse_select(lex, tok, query, rng_seed + i))
        else:
            out.append(tok)
    return out


def _strip_eos(tokens: Sequence[str]) -> list[str]:
    return [t for t in tokens if t != EOS]


# --- the two directed loops --------------------------------------------------

def loop_from_query(
    x: Sequence[str],
    q2lf: Seq2SeqModel,
    lf2q: Seq2SeqModel,
    lm_q: LanguageModel,
    spec: DomainSpec,
    cfg: DualConfig,
    lex: Optional[EntityLexicon] = None,
    lm_lf: Optional[LanguageModel] = None,
) -> dict:
    """query -> logical form -> query.  Updates both models in place."""
    hyps = q2lf.beam_search(x, cfg.beam_k, cfg.max_decode_len)
    if not hyps:
        raise EmptyBeam("beam search returned no hypotheses")
    k = len(hyps)
    dual_inputs = [
        lf_to_dual_input(_strip_eos(h.tokens), lex, query=x, rng_seed=cfg.rng_seed)
        for h in hyps
    ]
    vals = [
        validity_reward_lf(" ".join(_strip_eos(h.tokens)), spec, cfg.validity_mode, lm_lf)
        for h in hyps
    ]
    # a hypothesis that is just EOS has no logical form to reconstruct from
    usable = [d for d in dual_inputs if d]
    recs_by_hyp: dict[int, float] = {}
    if cfg.alpha < 1 and usable:
        with torch.no_grad():
            scores = lf2q.batch_log_probs(
                usable, [list(x) + [EOS]] * len(usable)
            ).tolist()
        it = iter(scores)
        recs_by_hyp = {i: next(it) for i, d in enumerate(dual_inputs) if d}
    rewards = [
        mix_reward(v, recs_by_hyp.get(i, 0.0), cfg.alpha)
        for i, v in enumerate(vals)
    ]

    totals = [r.total for r in rewards]
    baseline = sum(totals) / len(totals) if cfg.use_reward_baseline else 0.0

    log_probs = q2lf.batch_log_probs([list(x)] * k, [h.tokens for h in hyps])
    weights = torch.tensor(
        [r.total - baseline for r in rewards], dtype=log_probs.dtype
    )
    gradient_ascent_step(q2lf, (weights * log_probs).sum() / k, cfg.eta1)

    if cfg.alpha < 1 and usable:
        obj_lf2q = (1.0 - cfg.alpha) / k * lf2q.batch_log_probs(
            usable, [list(x) + [EOS]] * len(usable)
        ).sum()
        gradient_ascent_step(lf2q, obj_lf2q, cfg.eta2)

    return {"rewards": rewards, "hypotheses": hyps}


def loop_from_lf(
    y: str,
    q2lf: Seq2SeqModel,
    lf2q: Seq2SeqModel,
    lm_q: LanguageModel,
    spec: DomainSpec,
    cfg: DualConfig,
    lex: Optional[EntityLexicon] = None,
) -> dict:
    """logical form -> query -> logical form.  Updates both models in place."""
    y_tokens = y.split()
    dual_in = lf_to_dual_input(y_tokens, lex, query=None, rng_seed=cfg.rng_seed)
    hyps = lf2q.beam_search(dual_in, cfg.beam_k, cfg.max_decode_len)
    if not hyps:
        raise EmptyBeam("beam search returned no hypotheses")
    k = len(hyps)
    queries = [_strip_eos(h.tokens) for h in hyps]
    usable = [x_i for x_i in queries if x_i]
    vals = [validity_reward_q(x_i, lm_q) if x_i else 0.0 for x_i in queries]
    recs_by_query: dict[int, float] = {}
    if cfg.beta < 1 and usable:
        with torch.no_grad():
            scores = q2lf.batch_log_probs(
                usable, [y_tokens + [EOS]] * len(usable)
            ).tolist()
        it = iter(scores)
        recs_by_query = {
            i: next(it) for i, x_i in enumerate(queries) if x_i
        }
    rewards = [
        mix_reward(v, recs_by_query.get(i, 0.0), cfg.beta)
        for i, v in enumerate(vals)
    ]

    totals = [r.total for r in rewards]
    baseline = sum(totals) / len(totals) if cfg.use_reward_baseline else 0.0

    log_probs = lf2q.batch_log_probs([dual_in] * k, [h.tokens for h in hyps])
    weights = torch.tensor(
        [r.total - baseline for r in rewards], dtype=log_probs.dtype
    )
    gradient_ascent_step(lf2q, (weights * log_probs).sum() / k, cfg.eta2)

    if cfg.beta < 1 and usable:
        obj_q2lf = (1.0 - cfg.beta) / k * q2lf.batch_log_probs(
            usable, [y_tokens + [EOS]] * len(usable)
        ).sum()
        gradient_ascent_step(q2lf, obj_q2lf, cfg.eta1)

    return {"rewards": rewards, "hypotheses": hyps}


def supervised_fine_tune(
    q2lf: Seq2SeqModel,
    lf2q: Seq2SeqModel,
    pair: ParallelExample,
    cfg: DualConfig,
    lex: Optional[EntityLexicon] = None,
):
    """One MLE ascent step on both directions for a labeled pair."""
    y_tokens = pair.lf.split()
    obj1 = q2lf.sequence_log_prob(pair.query, y_tokens + [EOS])
    if not torch.isfinite(obj1):
        raise FloatingPointError("non-finite fine-tune objective")
    gradient_ascent_step(q2lf, obj1, cfg.eta1)
    dual_in = lf_to_dual_input(y_tokens, lex, query=pair.query, rng_seed=cfg.rng_seed)
    obj2 = lf2q.sequence_log_prob(dual_in, list(pair.query) + [EOS])
    if not torch.isfinite(obj2):
        raise FloatingPointError("non-finite fine-tune objective")
    gradient_ascent_step(lf2q, obj2, cfg.eta2)


# --- evaluation and the outer loop -------------------------------------------

def evaluate_q2lf(
    model: Seq2SeqModel,
    examples: Sequence[ParallelExample],
    max_decode_len: int = 60,
    strict: bool = False,
) -> float:
    decoded = model.greedy_decode_batch([ex.query for ex in examples], max_decode_len)
    preds = [" ".join(_strip_eos(toks)) for toks in decoded]
    return exact_match_accuracy(preds, [ex.lf for ex in examples], strict=strict)


@dataclass
class TrainLogRow:
    iteration: int
    mean_reward_q: float
    mean_reward_lf: float
    validity_rate: float
    valid_accuracy: float

    def format(self) -> str:
        return "\t".join(
            [
                str(self.iteration),
                f"{self.mean_reward_q:.6f}",
                f"{self.mean_reward_lf:.6f}",
                f"{self.validity_rate:.4f}",
                f"{self.valid_accuracy:.4f}",
            ]
        )


def dual_train(
    labeled: Sequence[ParallelExample],
    queries: Sequence[Sequence[str]],
    lfs: Sequence[str],
    q2lf: Seq2SeqModel,
    lf2q: Seq2SeqModel,
    lm_q: LanguageModel,
    spec: DomainSpec,
    cfg: DualConfig,
    valid_set: Sequence[ParallelExample] = (),
    lex: Optional[EntityLexicon] = None,
    lm_lf: Optional[LanguageModel] = None,
    log_sink: Optional[Callable[[TrainLogRow], None]] = None,
) -> list[TrainLogRow]:
    """Run the closed-loop game; on return q2lf/lf2q hold the checkpoint with
    the best validation accuracy (the inputs when max_iters == 0)."""
    if not labeled:
        raise EmptyLabeledSet("dual training requires a labeled set")
    rng = random.Random(cfg.rng_seed)
    query_pool: list[Sequence[str]] = list(queries) + [ex.query for ex in labeled]
    lf_pool: list[str] = list(lfs) + [ex.lf for ex in labeled]

    def validation_accuracy() -> float:
        if not valid_set:
            return 0.0
        return evaluate_q2lf(q2lf, valid_set, cfg.max_decode_len)

    best_acc = validation_accuracy()
    best_q2lf = copy.deepcopy(q2lf.state_dict())
    best_lf2q = copy.deepcopy(lf2q.state_dict())
    evals_since_best = 0
    log: list[TrainLogRow] = []

    recent_q: list[float] = []
    recent_lf: list[float] = []
    recent_valid: list[float] = []

    for it in range(1, cfg.max_iters + 1):
        x = rng.choice(query_pool)
        diag_q = loop_from_query(x, q2lf, lf2q, lm_q, spec, cfg, lex=lex, lm_lf=lm_lf)
        y = rng.choice(lf_pool)
        diag_lf = loop_from_lf(y, q2lf, lf2q, lm_q, spec, cfg, lex=lex)
        pair = rng.choice(list(labeled))
        supervised_fine_tune(q2lf, lf2q, pair, cfg, lex=lex)

        recent_q.extend(r.total for r in diag_q["rewards"])
        recent_lf.extend(r.total for r in diag_lf["rewards"])
        if cfg.validity_mode == "grammar":
            recent_valid.extend(r.validity for r in diag_q["rewards"])
        else:
            recent_valid.extend(
                float(grammar_error_indicator(" ".join(_strip_eos(h.tokens)), spec).valid)
                for h in diag_q["hypotheses"]
            )

        if it % cfg.eval_every == 0 or it == cfg.max_iters:
            acc = validation_accuracy()
            row = TrainLogRow(
                iteration=it,
                mean_reward_q=sum(recent_q) / max(len(recent_q), 1),
                mean_reward_lf=sum(recent_lf) / max(len(recent_lf), 1),
                validity_rate=sum(recent_valid) / max(len(recent_valid), 1),
                valid_accuracy=acc,
            )
            log.append(row)
            if log_sink is not None:
                log_sink(row)
            recent_q, recent_lf, recent_valid = [], [], []
            if acc > best_acc:
                best_acc = acc
                best_q2lf = copy.deepcopy(q2lf.state_dict())
                best_lf2q = copy.deepcopy(lf2q.state_dict())
                evals_since_best = 0
            else:
                evals_since_best += 1
                if evals_since_best >= cfg.patience:
                    break

    q2lf.load_state_dict(best_q2lf)
    lf2q.load_state_dict(best_lf2q)
    return log


def pseudo_label(
    model: Seq2SeqModel,
    unlabeled_inputs: Sequence[Sequence[str]],
    max_decode_len: int = 60,
    weight: float = 0.5,
) -> list[tuple[list[str], list[str], float]]:
    """Greedy-decode each unlabeled input into a synthetic pair tagged with a
    discounted loss weight."""
    if not unlabeled_inputs:
        return []
    decoded = model.greedy_decode_batch(list(unlabeled_inputs), max_decode_len)
    return [
        (list(src), _strip_eos(toks), weight)
        for src, toks in zip(unlabeled_inputs, decoded)
    ]
