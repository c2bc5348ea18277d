"""S-expression tokenizer, parser and serializer for logical forms.

Logical forms are flat strings like
``( lambda $0 e ( and ( _from $0 ci0 ) ( _flight $0 ) ) )``; internally they
are trees whose leaves are atoms.  Serialization is canonical: one space
around every parenthesis, so ``serialize(parse(s))`` is whitespace
normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Union


class SexprError(ValueError):
    """Base class for parse failures."""


class UnbalancedParens(SexprError):
    pass


class TrailingTokens(SexprError):
    pass


class EmptyInput(SexprError):
    pass


class EmptyNode(SexprError):
    pass


class TokenKind(Enum):
    LPAREN = "("
    RPAREN = ")"
    ATOM = "atom"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind


@dataclass(frozen=True)
class Leaf:
    atom: str


@dataclass(frozen=True)
class Node:
    children: tuple["LispTree", ...]

    def __post_init__(self):
        if not self.children:
            raise ValueError("Node must have at least one child")


LispTree = Union[Leaf, Node]


def tokenize(s: str) -> list[Token]:
    """Split a string into paren/atom tokens.  Parens self-delimit; atoms are
    maximal runs of non-paren, non-whitespace characters.  Never fails."""
    tokens: list[Token] = []
    atom: list[str] = []

    def flush():
        if atom:
            tokens.append(Token("".join(atom), TokenKind.ATOM))
            atom.clear()

    for ch in s:
        if ch == "(":
            flush()
            tokens.append(Token("(", TokenKind.LPAREN))
        elif ch == ")":
            flush()
            tokens.append(Token(")", TokenKind.RPAREN))
        elif ch.isspace():
            flush()
        else:
            atom.append(ch)
    flush()
    return tokens


def to_lisp_tree(s: str) -> LispTree:
    """Parse a string into a single LispTree.

    Raises EmptyInput, UnbalancedParens, EmptyNode or TrailingTokens.
    """
    tokens = tokenize(s)
    if not tokens:
        raise EmptyInput("no tokens in input")
    it = iter(tokens)
    tree = _parse_form(next(it), it)
    leftover = next(it, None)
    if leftover is not None:
        raise TrailingTokens(f"unexpected token after complete form: {leftover.text!r}")
    return tree


def _parse_form(tok: Token, it: Iterator[Token]) -> LispTree:
    if tok.kind is TokenKind.ATOM:
        return Leaf(tok.text)
    if tok.kind is TokenKind.RPAREN:
        raise UnbalancedParens("unexpected ')'")
    children: list[LispTree] = []
    for tok in it:
        if tok.kind is TokenKind.RPAREN:
            if not children:
                raise EmptyNode("empty node '( )'")
            return Node(tuple(children))
        children.append(_parse_form(tok, it))
    raise UnbalancedParens("unclosed '('")


def serialize(t: LispTree) -> str:
    if isinstance(t, Leaf):
        return t.atom
    return "( " + " ".join(serialize(c) for c in t.children) + " )"


def tree_tokens(t: LispTree) -> list[str]:
    """Token sequence of the canonical serialization."""
    return serialize(t).split(" ")
