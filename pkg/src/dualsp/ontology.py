"""Domain specification, logical-form validity checking, and synthesis.

A domain spec declares entity types, typed entities, and unary/binary/function
predicates with argument type constraints.  The validity check is two-level:
surface (the string parses to a tree) and semantic (a depth-first pass where
every predicate application satisfies its declared argument types, connectives
have the right shape, and every variable is bound and unifies to one type).

New valid logical forms are synthesized from an existing pool by swapping one
entity or predicate for a type-compatible alternative.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Optional

from .sexpr import (
    EmptyNode as SexprEmptyNode,
    Leaf,
    LispTree,
    Node,
    SexprError,
    serialize,
    to_lisp_tree,
)

CONNECTIVES = frozenset({"and", "or", "not", "exists", "lambda", "="})

#: pseudo-type of truth-valued subtrees; never unifies with an entity type
BOOL = "<bool>"

_MARKER_RE = re.compile(r"^([a-z_]+)(\d+)$")


class SpecError(ValueError):
    pass


class SpecSyntaxError(SpecError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DuplicateDecl(SpecError):
    def __init__(self, name: str):
        super().__init__(f"duplicate declaration: {name}")
        self.name = name


class UnknownType(SpecError):
    def __init__(self, name: str):
        super().__init__(f"undeclared type: {name}")
        self.name = name


class InsufficientVariety(RuntimeError):
    """Synthesis attempt budget exhausted before reaching the target count."""


@dataclass(frozen=True)
class DomainSpec:
    entity_types: frozenset[str]
    entities: dict[str, str]
    unaries: dict[str, str]
    binaries: dict[str, tuple[str, str]]
    functions: dict[str, tuple[tuple[str, ...], str]]
    connectives: frozenset[str] = CONNECTIVES

    def is_head(self, atom: str) -> bool:
        return (
            atom in self.connectives
            or atom in self.unaries
            or atom in self.binaries
            or atom in self.functions
        )


@dataclass(frozen=True)
class ValidityVerdict:
    valid: int
    failure: Optional[str] = None

    def __post_init__(self):
        assert (self.valid == 1) == (self.failure is None)


def load_spec(text: str) -> DomainSpec:
    types: set[str] = set()
    entities: dict[str, str] = {}
    unaries: dict[str, str] = {}
    binaries: dict[str, tuple[str, str]] = {}
    functions: dict[str, tuple[tuple[str, ...], str]] = {}

    def check_type(t: str):
        if t not in types:
            raise UnknownType(t)

    def check_fresh(name: str):
        if (
            name in CONNECTIVES
            or name in entities
            or name in unaries
            or name in binaries
            or name in functions
        ):
            raise DuplicateDecl(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind, args = fields[0], fields[1:]
        if kind == "type":
            if len(args) != 1:
                raise SpecSyntaxError(lineno, "expected: type <name>")
            if args[0] in types:
                raise DuplicateDecl(args[0])
            types.add(args[0])
        elif kind == "entity":
            if len(args) != 2:
                raise SpecSyntaxError(lineno, "expected: entity <token> <type>")
            check_fresh(args[0])
            check_type(args[1])
            entities[args[0]] = args[1]
        elif kind == "unary":
            if len(args) != 2:
                raise SpecSyntaxError(lineno, "expected: unary <pred> <args0-type>")
            check_fresh(args[0])
            check_type(args[1])
            unaries[args[0]] = args[1]
        elif kind == "binary":
            if len(args) != 3:
                raise SpecSyntaxError(lineno, "expected: binary <pred> <t0> <t1>")
            check_fresh(args[0])
            check_type(args[1])
            check_type(args[2])
            binaries[args[0]] = (args[1], args[2])
        elif kind == "function":
            if len(args) < 3 or args[-2] != "->":
                raise SpecSyntaxError(lineno, "expected: function <name> <argtype>... -> <ret>")
            check_fresh(args[0])
            argtypes = tuple(args[1:-2])
            for t in argtypes:
                check_type(t)
            check_type(args[-1])
            functions[args[0]] = (argtypes, args[-1])
        else:
            raise SpecSyntaxError(lineno, f"unknown declaration kind {kind!r}")

    return DomainSpec(
        entity_types=frozenset(types),
        entities=entities,
        unaries=unaries,
        binaries=binaries,
        functions=functions,
    )


def entity_type_of(spec: DomainSpec, atom: str) -> Optional[str]:
    """Type of an entity atom: declared, numbered marker (ci0), or name:type."""
    if atom in spec.entities:
        return spec.entities[atom]
    m = _MARKER_RE.match(atom)
    if m and m.group(1) in spec.entity_types:
        return m.group(1)
    if ":" in atom:
        suffix = atom.rsplit(":", 1)[1]
        if suffix in spec.entity_types:
            return suffix
    return None


# --- type-consistency pass ---------------------------------------------------

class _Fail(Exception):
    def __init__(self, kind: str):
        self.kind = kind


class _TypeVar:
    """Union-find slot for a bound variable's type."""

    __slots__ = ("parent", "type")

    def __init__(self):
        self.parent: Optional[_TypeVar] = None
        self.type: Optional[str] = None

    def find(self) -> "_TypeVar":
        node = self
        while node.parent is not None:
            node = node.parent
        return node


def _unify_concrete(tv: _TypeVar, t: str):
    rep = tv.find()
    if rep.type is None:
        rep.type = t
    elif rep.type != t:
        raise _Fail("TypeClash")


def _unify_vars(a: _TypeVar, b: _TypeVar):
    ra, rb = a.find(), b.find()
    if ra is rb:
        return
    if ra.type is not None and rb.type is not None and ra.type != rb.type:
        raise _Fail("TypeClash")
    rb.parent = ra
    if ra.type is None:
        ra.type = rb.type


def _require(inferred, expected: str):
    """Constrain an inferred type (concrete name, BOOL, or _TypeVar) to equal
    a concrete entity type."""
    if isinstance(inferred, _TypeVar):
        _unify_concrete(inferred, expected)
    elif inferred != expected:
        raise _Fail("TypeClash")


def _infer(spec: DomainSpec, t: LispTree, scope: dict[str, _TypeVar]):
    if isinstance(t, Leaf):
        atom = t.atom
        if atom.startswith("$"):
            if atom not in scope:
                raise _Fail("UnboundVariable")
            return scope[atom]
        etype = entity_type_of(spec, atom)
        if etype is not None:
            return etype
        # predicates, connectives and unknown atoms are not typed terms
        raise _Fail("TypeClash")

    head = t.children[0]
    args = t.children[1:]
    if not isinstance(head, Leaf):
        raise _Fail("UnknownHead")
    h = head.atom

    if h in ("and", "or"):
        if len(args) < 2:
            raise _Fail("ArityError")
        for a in args:
            if _infer(spec, a, scope) != BOOL:
                raise _Fail("TypeClash")
        return BOOL
    if h == "not":
        if len(args) != 1:
            raise _Fail("ArityError")
        if _infer(spec, args[0], scope) != BOOL:
            raise _Fail("TypeClash")
        return BOOL
    if h in ("exists", "lambda"):
        want = 2 if h == "exists" else 3
        if len(args) != want:
            raise _Fail("ArityError")
        var = args[0]
        if not (isinstance(var, Leaf) and var.atom.startswith("$")):
            raise _Fail("ArityError")
        if h == "lambda":
            marker = args[1]
            if not (isinstance(marker, Leaf) and marker.atom == "e"):
                raise _Fail("ArityError")
        inner = dict(scope)
        inner[var.atom] = _TypeVar()
        if _infer(spec, args[-1], inner) != BOOL:
            raise _Fail("TypeClash")
        return BOOL
    if h == "=":
        if len(args) != 2:
            raise _Fail("ArityError")
        left = _infer(spec, args[0], scope)
        right = _infer(spec, args[1], scope)
        if isinstance(left, _TypeVar) and isinstance(right, _TypeVar):
            _unify_vars(left, right)
        elif isinstance(left, _TypeVar):
            if right == BOOL:
                raise _Fail("TypeClash")
            _unify_concrete(left, right)
        elif isinstance(right, _TypeVar):
            if left == BOOL:
                raise _Fail("TypeClash")
            _unify_concrete(right, left)
        elif left != right:
            raise _Fail("TypeClash")
        return BOOL
    if h in spec.unaries:
        if len(args) != 1:
            raise _Fail("ArityError")
        _require(_infer(spec, args[0], scope), spec.unaries[h])
        return BOOL
    if h in spec.binaries:
        if len(args) != 2:
            raise _Fail("ArityError")
        t0, t1 = spec.binaries[h]
        _require(_infer(spec, args[0], scope), t0)
        _require(_infer(spec, args[1], scope), t1)
        return BOOL
    if h in spec.functions:
        argtypes, ret = spec.functions[h]
        if len(args) != len(argtypes):
            raise _Fail("ArityError")
        for a, want in zip(args, argtypes):
            _require(_infer(spec, a, scope), want)
        return ret
    raise _Fail("UnknownHead")


def check_tree(tree: LispTree, spec: DomainSpec) -> ValidityVerdict:
    """Semantic-level check of an already-parsed tree."""
    try:
        _infer(spec, tree, {})
    except _Fail as f:
        return ValidityVerdict(0, f.kind)
    return ValidityVerdict(1)


def grammar_error_indicator(y: str, spec: DomainSpec) -> ValidityVerdict:
    """Surface + semantic validity of a logical-form string."""
    try:
        tree = to_lisp_tree(y)
    except SexprEmptyNode:
        return ValidityVerdict(0, "EmptyNode")
    except SexprError:
        return ValidityVerdict(0, "ParseError")
    return check_tree(tree, spec)


# --- synthesis by replacement ------------------------------------------------

def _occurrences(spec: DomainSpec, tree: LispTree, path=()) -> list[tuple[tuple, str, str]]:
    """All replaceable occurrences as (path, category, symbol).  Categories:
    entity leaves declared in the spec, unary heads, binary heads."""
    occs = []
    if isinstance(tree, Leaf):
        if tree.atom in spec.entities:
            occs.append((path, "entity", tree.atom))
        return occs
    head = tree.children[0]
    if isinstance(head, Leaf):
        if head.atom in spec.unaries:
            occs.append((path + (0,), "unary", head.atom))
        elif head.atom in spec.binaries:
            occs.append((path + (0,), "binary", head.atom))
    for i, child in enumerate(tree.children):
        occs.extend(_occurrences(spec, child, path + (i,)))
    return occs


def _alternatives(spec: DomainSpec, category: str, symbol: str) -> list[str]:
    if category == "entity":
        t = spec.entities[symbol]
        return sorted(e for e, et in spec.entities.items() if et == t and e != symbol)
    if category == "unary":
        t = spec.unaries[symbol]
        return sorted(p for p, pt in spec.unaries.items() if pt == t and p != symbol)
    t = spec.binaries[symbol]
    return sorted(p for p, pt in spec.binaries.items() if pt == t and p != symbol)


def _replace_at(tree: LispTree, path: tuple, atom: str) -> LispTree:
    if not path:
        assert isinstance(tree, Leaf)
        return Leaf(atom)
    assert isinstance(tree, Node)
    i = path[0]
    children = list(tree.children)
    children[i] = _replace_at(children[i], path[1:], atom)
    return Node(tuple(children))


def synthesize_by_replacement(
    pool: list[LispTree],
    spec: DomainSpec,
    n_target: int,
    rng_seed: int,
    attempts_per_target: int = 100,
) -> list[LispTree]:
    """Create n_target new valid logical forms by single-symbol replacement.

    Each output passes the grammar error indicator, is absent from the pool,
    and is distinct from the other outputs.  Raises InsufficientVariety if the
    attempt budget (attempts_per_target * n_target) runs out first.
    """
    rng = random.Random(rng_seed)
    seen = {serialize(t) for t in pool}
    out: list[LispTree] = []
    budget = attempts_per_target * n_target
    for _ in range(budget):
        if len(out) >= n_target:
            break
        tree = rng.choice(pool)
        occs = [
            (path, cat, sym)
            for path, cat, sym in _occurrences(spec, tree)
            if _alternatives(spec, cat, sym)
        ]
        if not occs:
            continue
        path, cat, sym = rng.choice(occs)
        alt = rng.choice(_alternatives(spec, cat, sym))
        candidate = _replace_at(tree, path, alt)
        s = serialize(candidate)
        if s in seen:
            continue
        if check_tree(candidate, spec).valid != 1:
            continue
        seen.add(s)
        out.append(candidate)
    if len(out) < n_target:
        raise InsufficientVariety(
            f"produced {len(out)}/{n_target} forms within {budget} attempts"
        )
    return out


#: the truncated ATIS-style specification used throughout tests and docs
MINI_SPEC_TEXT = """\
type me
type al
type pd
type ci
type ap
type flight
entity lunch:me me
entity snack:me me
entity delta:al al
entity usair:al al
entity morning:pd pd
entity late:pd pd
unary _city ci
unary _airport ap
unary _oneway flight
binary _from flight ci
binary _services al ci
binary _during_day flight pd
"""


def mini_spec() -> DomainSpec:
    return load_spec(MINI_SPEC_TEXT)
