import math

import pytest
import torch

from dualsp.lm import LanguageModel, lm_perplexity, lm_score_normalized, lm_train
from dualsp.vocab import Vocabulary

torch.set_num_threads(1)

CORPUS = [
    ["flights", "from", "boston"],
    ["flights", "to", "dallas"],
    ["show", "flights", "from", "boston"],
]


def make_lm(seed=0, d_w=8, n_hidden=8):
    return LanguageModel(Vocabulary.from_corpus(CORPUS), d_w, n_hidden, seed=seed)


def uniform_lm():
    """Zero the output projection so every conditional is uniform over V."""
    lm = make_lm()
    with torch.no_grad():
        lm.proj.weight.zero_()
        lm.proj.bias.zero_()
    return lm


def test_uniform_model_scores_minus_log_vocab():
    lm = uniform_lm()
    V = len(lm.vocab)
    for seq in CORPUS:
        assert abs(lm_score_normalized(lm, seq) + math.log(V)) < 1e-6


def test_single_token_formula():
    lm = make_lm()
    total = lm.batch_log_probs([["flights"]])[0].item()
    # two scored positions: the token and EOS
    assert abs(lm_score_normalized(lm, ["flights"]) - total / 2) < 1e-9


def test_scores_nonpositive():
    lm = make_lm(seed=3)
    for seq in CORPUS:
        assert lm_score_normalized(lm, seq) <= 0.0


def test_batch_matches_single():
    lm = make_lm().double()
    batched = lm.batch_log_probs(CORPUS)
    for b, seq in enumerate(CORPUS):
        assert torch.allclose(batched[b], lm.batch_log_probs([seq])[0], atol=1e-12)


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        make_lm().batch_log_probs([[]])


def test_training_reduces_nll_and_freezes():
    lm = make_lm()
    history = lm_train(lm, CORPUS, epochs=15, lr=1e-2, batch_size=3)
    assert len(history) == 15
    assert history[-1] < history[0]
    assert all(not p.requires_grad for p in lm.parameters())


def test_zero_epochs_leaves_model_unchanged():
    lm = make_lm(seed=7)
    snap = {k: v.clone() for k, v in lm.state_dict().items()}
    assert lm_train(lm, CORPUS, epochs=0) == []
    for k, v in lm.state_dict().items():
        assert torch.equal(v, snap[k])


def test_trained_lm_prefers_fluent_order():
    lm = make_lm(d_w=16, n_hidden=16)
    lm_train(lm, CORPUS * 10, epochs=30, lr=5e-3, batch_size=10)
    fluent = lm_score_normalized(lm, ["flights", "from", "boston"])
    shuffled = lm_score_normalized(lm, ["boston", "from", "flights"])
    assert fluent > shuffled


def test_perplexity_of_uniform_model_is_vocab_size():
    lm = uniform_lm()
    assert abs(lm_perplexity(lm, CORPUS) - len(lm.vocab)) < 1e-3


def test_seeded_init_deterministic():
    a, b = make_lm(seed=2), make_lm(seed=2)
    for (ka, va), (kb, vb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)
