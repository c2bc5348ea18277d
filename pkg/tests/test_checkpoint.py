import torch

from dualsp.checkpoint import load_model, save_model
from dualsp.lexicon import EntityLexicon
from dualsp.lm import LanguageModel
from dualsp.seq2seq import Seq2SeqModel
from dualsp.vocab import EOS, UNK_COPY, Vocabulary

torch.set_num_threads(1)


def make_seq2seq(use_copy=False, seed=0):
    lex = None
    if use_copy:
        lex = EntityLexicon()
        lex.add(["boston"], "ci0")
    return Seq2SeqModel(
        Vocabulary.from_corpus([["from", "boston"]]),
        Vocabulary.from_corpus([["_from", "ci0"]], extra=(UNK_COPY,)),
        d_w=6,
        n_hidden=6,
        use_copy=use_copy,
        lexicon=lex,
        seed=seed,
    )


def test_save_is_byte_deterministic(tmp_path):
    m = make_seq2seq(use_copy=True, seed=4)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_model(m, p1)
    save_model(m, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_identical_seeds_give_identical_files(tmp_path):
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_model(make_seq2seq(seed=9), p1)
    save_model(make_seq2seq(seed=9), p2)
    assert p1.read_bytes() == p2.read_bytes()
    save_model(make_seq2seq(seed=10), p2)
    assert p1.read_bytes() != p2.read_bytes()


def test_seq2seq_roundtrip_bit_identical_inference(tmp_path):
    m = make_seq2seq(use_copy=True, seed=1)
    path = tmp_path / "m.ckpt"
    save_model(m, path)
    restored = load_model(path)
    assert isinstance(restored, Seq2SeqModel)
    assert restored.src_vocab.tokens == m.src_vocab.tokens
    assert restored.tgt_vocab.tokens == m.tgt_vocab.tokens
    assert restored.lexicon.forward == m.lexicon.forward
    src, tgt = ["from", "boston"], ["_from", "ci0", EOS]
    with torch.no_grad():
        a = m.sequence_log_prob(src, tgt)
        b = restored.sequence_log_prob(src, tgt)
    assert torch.equal(a, b)
    assert m.beam_search(src, 3, 5) == restored.beam_search(src, 3, 5)


def test_lm_roundtrip(tmp_path):
    lm = LanguageModel(Vocabulary.from_corpus([["a", "b"]]), 6, 6, seed=2)
    path = tmp_path / "lm.ckpt"
    save_model(lm, path)
    restored = load_model(path)
    assert isinstance(restored, LanguageModel)
    with torch.no_grad():
        assert torch.equal(
            lm.batch_log_probs([["a", "b"]]), restored.batch_log_probs([["a", "b"]])
        )


def test_resave_after_load_is_identical(tmp_path):
    m = make_seq2seq(seed=5)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_model(m, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
