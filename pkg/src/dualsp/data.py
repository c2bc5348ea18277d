"""Dataset loading, semi-supervised splitting, evaluation metrics, and a
deterministic toy flight-booking domain for desk-scale experiments."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import sexpr
from .lexicon import EntityLexicon
from .ontology import DomainSpec, check_tree, load_spec
from .sexpr import Leaf, LispTree, Node, serialize, to_lisp_tree


class MalformedLine(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnparseableLF(MalformedLine):
    pass


@dataclass(frozen=True)
class ParallelExample:
    query: tuple[str, ...]
    lf: str


@dataclass
class DatasetBundle:
    labeled: list[ParallelExample]
    queries: list[tuple[str, ...]]
    lfs: list[str]
    valid: list[ParallelExample] = field(default_factory=list)
    test: list[ParallelExample] = field(default_factory=list)


def load_dataset(path) -> list[ParallelExample]:
    """TSV, one `query tokens<TAB>logical form` pair per line."""
    examples = []
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if "\t" not in raw:
            raise MalformedLine(lineno, "expected a TAB separator")
        query, lf = raw.split("\t", 1)
        try:
            to_lisp_tree(lf)
        except sexpr.SexprError as e:
            raise UnparseableLF(lineno, f"bad logical form: {e}") from e
        examples.append(ParallelExample(tuple(query.split()), lf.strip()))
    return examples


def save_dataset(examples: Sequence[ParallelExample], path) -> None:
    lines = [" ".join(ex.query) + "\t" + ex.lf for ex in examples]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def semi_split(
    examples: Sequence[ParallelExample], labeled_ratio: float, seed: int
) -> DatasetBundle:
    """Seeded shuffle; the first ceil(ratio*N) stay labeled, the rest are
    broken into unpaired queries and logical forms."""
    if not examples:
        raise ValueError("empty example list")
    if not 0 < labeled_ratio <= 1:
        raise ValueError("labeled_ratio must be in (0, 1]")
    pool = list(examples)
    random.Random(seed).shuffle(pool)
    n_labeled = min(len(pool), _ceil(len(pool) * labeled_ratio))
    labeled = pool[:n_labeled]
    rest = pool[n_labeled:]
    return DatasetBundle(
        labeled=labeled,
        queries=[ex.query for ex in rest],
        lfs=[ex.lf for ex in rest],
    )


def _ceil(x: float) -> int:
    n = int(x)
    return n if n == x else n + 1


# --- evaluation --------------------------------------------------------------

def canonicalize_lf(lf: str) -> Optional[str]:
    """Parse, recursively sort and/or conjuncts by serialized text, and
    re-serialize; None for unparseable input."""
    try:
        tree = to_lisp_tree(lf)
    except sexpr.SexprError:
        return None
    return serialize(_sort_conjuncts(tree))


def _sort_conjuncts(t: LispTree) -> LispTree:
    if isinstance(t, Leaf):
        return t
    children = tuple(_sort_conjuncts(c) for c in t.children)
    head = children[0]
    if isinstance(head, Leaf) and head.atom in ("and", "or"):
        rest = sorted(children[1:], key=serialize)
        children = (head,) + tuple(rest)
    return Node(children)


def exact_match_accuracy(
    predictions: Sequence[str], golds: Sequence[str], strict: bool = False
) -> float:
    """Fraction of canonicalized (or strict string-equal) matches."""
    if len(predictions) != len(golds):
        raise ValueError("length mismatch between predictions and golds")
    if not golds:
        return 0.0
    hits = 0
    for pred, gold in zip(predictions, golds):
        if strict:
            hits += pred == gold
        else:
            cp = canonicalize_lf(pred)
            hits += cp is not None and cp == canonicalize_lf(gold)
    return hits / len(golds)


# --- toy domain --------------------------------------------------------------

TOY_SPEC_TEXT = """\
type ci
type ap
type al
type pd
type me
type cl
type flight
entity delta:al al
entity usair:al al
entity united:al al
entity american:al al
entity jetblue:al al
entity alaska:al al
entity spirit:al al
entity frontier:al al
entity morning:pd pd
entity afternoon:pd pd
entity evening:pd pd
entity night:pd pd
entity noon:pd pd
entity late:pd pd
entity early:pd pd
entity midday:pd pd
entity lunch:me me
entity dinner:me me
entity snack:me me
entity breakfast:me me
entity brunch:me me
entity supper:me me
entity dessert:me me
entity refreshments:me me
entity first:cl cl
entity coach:cl cl
entity business:cl cl
entity thrift:cl cl
entity economy:cl cl
entity premium:cl cl
entity standard:cl cl
entity deluxe:cl cl
unary _flight flight
unary _oneway flight
unary _round_trip flight
unary _nonstop flight
unary _has_meal flight
unary _connecting flight
binary _from flight ci
binary _to flight ci
binary _stop flight ci
binary _airline flight al
binary _during_day flight pd
binary _meal flight me
binary _class_type flight cl
binary _from_airport flight ap
binary _to_airport flight ap
binary _services al ci
function _abbrev al -> al
"""

_TOY_CITIES = [f"ci{i}" for i in range(8)]
_TOY_AIRPORTS = [f"ap{i}" for i in range(4)]
_TOY_AIRLINES = [
    "delta", "usair", "united", "american", "jetblue", "alaska", "spirit", "frontier",
]
_TOY_PERIODS = [
    "morning", "afternoon", "evening", "night", "noon", "late", "early", "midday",
]
_TOY_MEALS = [
    "lunch", "dinner", "snack", "breakfast", "brunch", "supper", "dessert",
    "refreshments",
]
_TOY_CLASSES = [
    "first", "coach", "business", "thrift", "economy", "premium", "standard",
    "deluxe",
]


def toy_lexicon() -> EntityLexicon:
    lex = EntityLexicon()
    for marker in _TOY_CITIES + _TOY_AIRPORTS:
        lex.add([marker], marker)
    for word, suffix in (
        [(w, "al") for w in _TOY_AIRLINES]
        + [(w, "pd") for w in _TOY_PERIODS]
        + [(w, "me") for w in _TOY_MEALS]
        + [(w, "cl") for w in _TOY_CLASSES]
    ):
        lex.add([word], f"{word}:{suffix}")
    lex.add(["delta", "air", "lines"], "delta:al")
    lex.add(["first", "class"], "first:cl")
    return lex


@dataclass
class ToyDomain:
    spec: DomainSpec
    spec_text: str
    lexicon: EntityLexicon
    train: list[ParallelExample]
    valid: list[ParallelExample]
    test: list[ParallelExample]

    @property
    def all_examples(self) -> list[ParallelExample]:
        return self.train + self.valid + self.test


def _toy_pairs() -> list[ParallelExample]:
    pairs: list[ParallelExample] = []

    def add(query: str, lf: str):
        pairs.append(ParallelExample(tuple(query.split()), lf))

    unary_words = {"_oneway": "oneway", "_nonstop": "nonstop", "_connecting": "connecting"}
    for u, uw in unary_words.items():
        for ci in _TOY_CITIES:
            for cj in _TOY_CITIES:
                if ci == cj:
                    continue
                add(
                    f"list {uw} flights from {ci} to {cj}",
                    f"( lambda $0 e ( and ( _flight $0 ) ( {u} $0 ) "
                    f"( _from $0 {ci} ) ( _to $0 {cj} ) ) )",
                )
    for al in _TOY_AIRLINES:
        for ci in _TOY_CITIES:
            for cj in _TOY_CITIES:
                if ci == cj:
                    continue
                add(
                    f"show flights from {ci} to {cj} on {al}",
                    f"( lambda $0 e ( and ( _flight $0 ) ( _from $0 {ci} ) "
                    f"( _to $0 {cj} ) ( _airline $0 {al}:al ) ) )",
                )
    for pd in _TOY_PERIODS:
        for ci in _TOY_CITIES:
            add(
                f"which {pd} flights leave {ci}",
                f"( lambda $0 e ( and ( _flight $0 ) ( _during_day $0 {pd}:pd ) "
                f"( _from $0 {ci} ) ) )",
            )
    for me in _TOY_MEALS:
        for ci in _TOY_CITIES:
            add(
                f"flights from {ci} serving {me}",
                f"( lambda $0 e ( and ( _flight $0 ) ( _from $0 {ci} ) "
                f"( _meal $0 {me}:me ) ) )",
            )
    for al in _TOY_AIRLINES:
        for ci in _TOY_CITIES:
            add(
                f"does {al} fly to {ci}",
                f"( exists $0 ( and ( _flight $0 ) ( _airline $0 {al}:al ) "
                f"( _to $0 {ci} ) ) )",
            )
    for cl in _TOY_CLASSES:
        for ci in _TOY_CITIES:
            add(
                f"show {cl} class flights to {ci}",
                f"( lambda $0 e ( and ( _flight $0 ) ( _class_type $0 {cl}:cl ) "
                f"( _to $0 {ci} ) ) )",
            )
    for ci in _TOY_CITIES:
        add(
            f"what airlines serve {ci}",
            f"( lambda $0 e ( _services $0 {ci} ) )",
        )
    for ap in _TOY_AIRPORTS:
        for ci in _TOY_CITIES:
            add(
                f"flights from airport {ap} to {ci}",
                f"( lambda $0 e ( and ( _flight $0 ) ( _from_airport $0 {ap} ) "
                f"( _to $0 {ci} ) ) )",
            )
    return pairs


def toy_domain(seed: int = 0, n_examples: int = 600) -> ToyDomain:
    """Deterministic mini flight domain: ~600 distinct pairs, every logical
    form valid under the domain spec, split 70/15/15."""
    spec = load_spec(TOY_SPEC_TEXT)
    pool = _toy_pairs()
    assert len({p for p in pool}) == len(pool)
    rng = random.Random(seed)
    rng.shuffle(pool)
    chosen = pool[: min(n_examples, len(pool))]
    for ex in chosen:
        assert check_tree(to_lisp_tree(ex.lf), spec).valid == 1
    n = len(chosen)
    n_train = int(n * 0.70)
    n_valid = int(n * 0.15)
    return ToyDomain(
        spec=spec,
        spec_text=TOY_SPEC_TEXT,
        lexicon=toy_lexicon(),
        train=chosen[:n_train],
        valid=chosen[n_train : n_train + n_valid],
        test=chosen[n_train + n_valid :],
    )
