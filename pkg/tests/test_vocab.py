import pytest
from hypothesis import given
import hypothesis.strategies as st

from dualsp.vocab import BOS, EOS, RESERVED, UNK, UNK_COPY, Vocabulary


def test_from_corpus_layout():
    v = Vocabulary.from_corpus([["b", "a"], ["a", "c"]])
    assert v.tokens == [UNK, BOS, EOS, "a", "b", "c"]
    assert len(v) == 6


def test_extra_tokens():
    v = Vocabulary.from_corpus([["a"]], extra=(UNK_COPY,))
    assert UNK_COPY in v


def test_encode_unknown_maps_to_unk():
    v = Vocabulary.from_corpus([["a"]])
    assert v.encode(["a", "zzz"]) == [v.index["a"], v.unk]


def test_reserved_must_be_unique():
    with pytest.raises(ValueError):
        Vocabulary([UNK, BOS, EOS, UNK])
    with pytest.raises(ValueError):
        Vocabulary([UNK, BOS])


def test_corpus_containing_reserved_tokens_ok():
    v = Vocabulary.from_corpus([[EOS, "a"]])
    assert v.tokens.count(EOS) == 1


@given(st.lists(st.lists(st.text(alphabet="xyz", min_size=1, max_size=3))))
def test_encode_decode_roundtrip_for_known_tokens(corpus):
    v = Vocabulary.from_corpus(corpus)
    for seq in corpus:
        assert v.decode(v.encode(seq)) == list(seq)
    assert v.tokens[:3] == list(RESERVED)
    assert v.tokens[3:] == sorted(v.tokens[3:])
