"""Bidirectional phrase <-> entity-token mapping.

The forward direction backs the copy mechanism (which source spans name a
knowledge-base entity); the backward direction rewrites entity tokens of a
logical form into noun phrases before query generation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence


class UnknownEntity(KeyError):
    pass


@dataclass
class EntityLexicon:
    forward: dict[tuple[str, ...], str] = field(default_factory=dict)
    backward: dict[str, list[tuple[str, ...]]] = field(default_factory=dict)

    def add(self, phrase: Sequence[str], token: str):
        key = tuple(w.lower() for w in phrase)
        self.forward[key] = token
        aliases = self.backward.setdefault(token, [])
        if key not in aliases:
            aliases.append(key)

    @property
    def max_phrase_len(self) -> int:
        return max((len(p) for p in self.forward), default=0)

    @classmethod
    def from_text(cls, text: str) -> "EntityLexicon":
        """One entry per line: `phrase words<TAB>entity_token`."""
        lex = cls()
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            phrase, token = line.split("\t")
            lex.add(phrase.split(), token)
        return lex

    def to_text(self) -> str:
        lines = []
        for token in sorted(self.backward):
            for phrase in self.backward[token]:
                lines.append(" ".join(phrase) + "\t" + token)
        return "\n".join(lines) + "\n"


def kb_lookup(
    lex: EntityLexicon, words: Sequence[str], i: int, j: int
) -> Optional[str]:
    """Entity token for the inclusive span words[i..j], or None."""
    if not (0 <= i <= j < len(words)):
        raise IndexError(f"span ({i},{j}) out of range for length {len(words)}")
    return lex.forward.get(tuple(w.lower() for w in words[i : j + 1]))


def kb_inverse_select(
    lex: EntityLexicon,
    token: str,
    query: Optional[Sequence[str]],
    rng_seed: int = 0,
) -> tuple[str, ...]:
    """Pick a noun phrase for an entity token.

    With a query (paired data): the longest alias occurring contiguously in
    the query, first occurrence breaking ties.  Without one (unpaired data):
    a uniform random alias under the seed.
    """
    if token not in lex.backward:
        raise UnknownEntity(token)
    aliases = lex.backward[token]
    if query is not None:
        q = [w.lower() for w in query]
        best: Optional[tuple[str, ...]] = None
        best_pos = -1
        for alias in aliases:
            pos = _find_subseq(q, alias)
            if pos < 0:
                continue
            if best is None or len(alias) > len(best) or (
                len(alias) == len(best) and pos < best_pos
            ):
                best, best_pos = alias, pos
        if best is not None:
            return best
    return random.Random(rng_seed).choice(aliases)


def _find_subseq(haystack: list[str], needle: tuple[str, ...]) -> int:
    n = len(needle)
    for i in range(len(haystack) - n + 1):
        if tuple(haystack[i : i + n]) == needle:
            return i
    return -1


def match_spans(
    lex: EntityLexicon, words: Sequence[str]
) -> list[tuple[int, int, str]]:
    """All (i, j, entity_token) spans of the source that name an entity."""
    lowered = [w.lower() for w in words]
    max_len = lex.max_phrase_len
    spans = []
    for i in range(len(lowered)):
        for j in range(i, min(i + max_len, len(lowered))):
            token = lex.forward.get(tuple(lowered[i : j + 1]))
            if token is not None:
                spans.append((i, j, token))
    return spans
