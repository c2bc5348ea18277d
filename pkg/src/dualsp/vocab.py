"""Token vocabularies with reserved control tokens."""

from __future__ import annotations

from typing import Iterable, Sequence

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"
UNK_COPY = "<unk-copy>"

RESERVED = (UNK, BOS, EOS)


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        for r in RESERVED:
            if tokens.count(r) != 1:
                raise ValueError(f"reserved token {r!r} must appear exactly once")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def unk(self) -> int:
        return self.index[UNK]

    @property
    def bos(self) -> int:
        return self.index[BOS]

    @property
    def eos(self) -> int:
        return self.index[EOS]

    def encode(self, words: Iterable[str]) -> list[int]:
        unk = self.unk
        return [self.index.get(w, unk) for w in words]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    @classmethod
    def from_corpus(cls, sequences: Iterable[Sequence[str]], extra: Sequence[str] = ()) -> "Vocabulary":
        seen: set[str] = set()
        for seq in sequences:
            seen.update(seq)
        seen.update(extra)
        seen.difference_update(RESERVED)
        return cls(list(RESERVED) + sorted(seen))
