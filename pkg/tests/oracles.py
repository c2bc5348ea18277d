"""Independent brute-force oracles used to cross-check the fast paths.

The validity oracle avoids the unification machinery entirely: it
alpha-indexes binder sites, then exhaustively enumerates concrete type
assignments for them, accepting a tree iff some assignment satisfies every
constraint by direct comparison.
"""

from __future__ import annotations

import itertools

from dualsp.ontology import BOOL, DomainSpec, entity_type_of
from dualsp.sexpr import Leaf, LispTree, Node


class _Invalid(Exception):
    pass


def _count_binders(t: LispTree) -> int:
    if isinstance(t, Leaf):
        return 0
    total = 0
    head = t.children[0]
    if isinstance(head, Leaf) and head.atom in ("lambda", "exists"):
        total += 1
    return total + sum(_count_binders(c) for c in t.children)


def _typed(
    spec: DomainSpec,
    t: LispTree,
    env: dict[str, int],
    assign: tuple[str, ...],
    counter: list[int],
):
    if isinstance(t, Leaf):
        atom = t.atom
        if atom.startswith("$"):
            if atom not in env:
                raise _Invalid
            return assign[env[atom]]
        etype = entity_type_of(spec, atom)
        if etype is None:
            raise _Invalid
        return etype

    head = t.children[0]
    args = t.children[1:]
    if not isinstance(head, Leaf):
        raise _Invalid
    h = head.atom
    if h in ("and", "or"):
        if len(args) < 2:
            raise _Invalid
        for a in args:
            if _typed(spec, a, env, assign, counter) != BOOL:
                raise _Invalid
        return BOOL
    if h == "not":
        if len(args) != 1 or _typed(spec, args[0], env, assign, counter) != BOOL:
            raise _Invalid
        return BOOL
    if h in ("exists", "lambda"):
        want = 2 if h == "exists" else 3
        if len(args) != want:
            raise _Invalid
        var = args[0]
        if not (isinstance(var, Leaf) and var.atom.startswith("$")):
            raise _Invalid
        if h == "lambda" and not (
            isinstance(args[1], Leaf) and args[1].atom == "e"
        ):
            raise _Invalid
        binder_id = counter[0]
        counter[0] += 1
        inner = dict(env)
        inner[var.atom] = binder_id
        if _typed(spec, args[-1], inner, assign, counter) != BOOL:
            raise _Invalid
        return BOOL
    if h == "=":
        if len(args) != 2:
            raise _Invalid
        left = _typed(spec, args[0], env, assign, counter)
        right = _typed(spec, args[1], env, assign, counter)
        if left != right:
            raise _Invalid
        return BOOL
    if h in spec.unaries:
        if len(args) != 1:
            raise _Invalid
        if _typed(spec, args[0], env, assign, counter) != spec.unaries[h]:
            raise _Invalid
        return BOOL
    if h in spec.binaries:
        if len(args) != 2:
            raise _Invalid
        t0, t1 = spec.binaries[h]
        if _typed(spec, args[0], env, assign, counter) != t0:
            raise _Invalid
        if _typed(spec, args[1], env, assign, counter) != t1:
            raise _Invalid
        return BOOL
    if h in spec.functions:
        argtypes, ret = spec.functions[h]
        if len(args) != len(argtypes):
            raise _Invalid
        for a, want_t in zip(args, argtypes):
            if _typed(spec, a, env, assign, counter) != want_t:
                raise _Invalid
        return ret
    raise _Invalid


def oracle_validity(tree: LispTree, spec: DomainSpec) -> int:
    """1 iff some concrete type assignment to the binder sites satisfies all
    constraints; structural errors fail every assignment."""
    n = _count_binders(tree)
    types = sorted(spec.entity_types)
    for assign in itertools.product(types, repeat=n):
        try:
            _typed(spec, tree, {}, assign, [0])
        except _Invalid:
            continue
        return 1
    return 0


def enumerate_trees(atoms: list[str]) -> list[LispTree]:
    """Deterministic family of syntactically well-formed trees of depth <= 3
    used for checker/oracle cross-validation; mixes valid forms, type
    clashes, arity errors, unbound variables and unknown heads."""
    leaves = [Leaf(a) for a in atoms]
    trees: list[LispTree] = list(leaves)

    def nodes(head: Leaf, arg_pool, nargs):
        return [
            Node((head,) + combo)
            for combo in itertools.product(arg_pool, repeat=nargs)
        ]

    depth1: list[LispTree] = []
    for head in leaves:
        for nargs in (1, 2):
            depth1 += nodes(head, leaves, nargs)
        if head.atom in ("lambda", "and"):
            depth1 += nodes(head, leaves, 3)
    trees += depth1

    # hand-picked depth-1 subtrees giving depth-2/3 coverage of both valid
    # bodies and deliberate clashes
    def t(s: str) -> LispTree:
        from dualsp.sexpr import to_lisp_tree

        return to_lisp_tree(s)

    d1sel = [
        t("( _oneway $0 )"),
        t("( _from $0 ci0 )"),
        t("( _city $0 )"),
        t("( _oneway ci0 )"),
        t("( _from delta:al ci0 )"),
        t("( and $0 ci0 )"),
        t("( = $0 ci0 )"),
        t("( _services delta:al ci0 )"),
    ]
    pool2 = leaves + d1sel
    depth2: list[LispTree] = []
    for head in leaves:
        for nargs in (1, 2):
            depth2 += nodes(head, pool2, nargs)
    small = [Leaf("$0"), Leaf("e")] + d1sel[:3]
    depth2 += nodes(Leaf("lambda"), small, 3)
    depth2 += nodes(Leaf("exists"), small, 2)
    trees += depth2

    d2sel = [
        t("( and ( _oneway $0 ) ( _from $0 ci0 ) )"),
        t("( and ( _oneway $0 ) ( _city $0 ) )"),
        t("( exists $1 ( _from $0 ci0 ) )"),
        t("( = ci0 $0 )"),
        t("( not ( _city $0 ) )"),
    ]
    pool3 = [Leaf("$0"), Leaf("$1"), Leaf("e")] + d2sel
    depth3: list[LispTree] = []
    depth3 += nodes(Leaf("lambda"), pool3, 3)
    for h in ("exists", "and", "or", "="):
        depth3 += nodes(Leaf(h), pool3, 2)
    depth3 += nodes(Leaf("not"), pool3, 1)
    trees += depth3
    return trees


ORACLE_ATOMS = [
    "lunch:me",
    "delta:al",
    "ci0",
    "$0",
    "_oneway",
    "_from",
    "and",
    "not",
    "lambda",
    "e",
    "=",
]
