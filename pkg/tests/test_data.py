import pytest
from hypothesis import given
import hypothesis.strategies as st

from dualsp.data import (
    DatasetBundle,
    MalformedLine,
    ParallelExample,
    UnparseableLF,
    canonicalize_lf,
    exact_match_accuracy,
    load_dataset,
    save_dataset,
    semi_split,
    toy_domain,
)
from dualsp.ontology import check_tree
from dualsp.sexpr import to_lisp_tree


def ex(q, lf):
    return ParallelExample(tuple(q.split()), lf)


SAMPLE = [
    ex("flights from ci0", "( lambda $0 e ( _from $0 ci0 ) )"),
    ex("oneway flights", "( lambda $0 e ( _oneway $0 ) )"),
    ex("does delta fly", "( exists $0 ( _airline $0 delta:al ) )"),
]


class TestIO:
    def test_roundtrip(self, tmp_path):
        p = tmp_path / "d.tsv"
        save_dataset(SAMPLE, p)
        assert load_dataset(p) == SAMPLE

    def test_missing_tab(self, tmp_path):
        p = tmp_path / "d.tsv"
        p.write_text("no separator here\n")
        with pytest.raises(MalformedLine):
            load_dataset(p)

    def test_unparseable_lf_reports_line(self, tmp_path):
        p = tmp_path / "d.tsv"
        p.write_text("a b\t( _oneway $0 )\nc d\t( broken\n")
        with pytest.raises(UnparseableLF) as exc:
            load_dataset(p)
        assert exc.value.lineno == 2

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "d.tsv"
        p.write_text("\na b\t( _oneway $0 )\n\n")
        assert len(load_dataset(p)) == 1


class TestSemiSplit:
    def test_counts_and_partition(self):
        bundle = semi_split(SAMPLE, 0.5, seed=0)
        assert len(bundle.labeled) == 2  # ceil(0.5 * 3)
        assert len(bundle.queries) == len(bundle.lfs) == 1
        kept = {e for e in bundle.labeled}
        rest = set(zip(bundle.queries, bundle.lfs))
        assert kept | {ParallelExample(q, lf) for q, lf in rest} == set(SAMPLE)

    def test_full_ratio(self):
        bundle = semi_split(SAMPLE, 1.0, seed=1)
        assert len(bundle.labeled) == 3 and not bundle.queries

    def test_seed_determinism(self):
        a = semi_split(SAMPLE, 0.4, seed=9)
        b = semi_split(SAMPLE, 0.4, seed=9)
        assert a.labeled == b.labeled and a.queries == b.queries

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            semi_split(SAMPLE, 0.0, seed=0)
        with pytest.raises(ValueError):
            semi_split([], 0.5, seed=0)

    @given(st.integers(1, 40), st.floats(0.01, 1.0), st.integers(0, 5))
    def test_labeled_count_is_ceiling(self, n, ratio, seed):
        pool = [ex(f"q {i}", "( _oneway $0 )") for i in range(n)]
        bundle = semi_split(pool, ratio, seed)
        import math

        assert len(bundle.labeled) == min(n, math.ceil(n * ratio))
        assert len(bundle.labeled) + len(bundle.queries) == n


class TestCanonicalize:
    def test_sorts_conjuncts_recursively(self):
        a = "( and ( _to $0 ci1 ) ( and ( _oneway $0 ) ( _flight $0 ) ) )"
        b = "( and ( and ( _flight $0 ) ( _oneway $0 ) ) ( _to $0 ci1 ) )"
        assert canonicalize_lf(a) == canonicalize_lf(b)

    def test_or_sorted_but_argument_order_kept(self):
        assert canonicalize_lf("( or b a )") == "( or a b )"
        assert canonicalize_lf("( _from $0 ci0 )") == "( _from $0 ci0 )"

    def test_unparseable_is_none(self):
        assert canonicalize_lf("( open") is None


class TestExactMatch:
    def test_order_insensitive_by_default(self):
        preds = ["( and ( _to $0 ci1 ) ( _from $0 ci0 ) )"]
        golds = ["( and ( _from $0 ci0 ) ( _to $0 ci1 ) )"]
        assert exact_match_accuracy(preds, golds) == 1.0
        assert exact_match_accuracy(preds, golds, strict=True) == 0.0

    def test_unparseable_prediction_scores_zero(self):
        assert exact_match_accuracy(["( bad"], ["( _oneway $0 )"]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            exact_match_accuracy(["a"], [])


class TestToyDomain:
    def test_sizes_and_split(self):
        dom = toy_domain(seed=0)
        assert len(dom.train) == 420
        assert len(dom.valid) == 90
        assert len(dom.test) == 90
        assert len(set(dom.all_examples)) == 600

    def test_all_lfs_valid(self):
        dom = toy_domain(seed=0)
        for e_ in dom.all_examples:
            assert check_tree(to_lisp_tree(e_.lf), dom.spec).valid == 1

    def test_deterministic(self):
        assert toy_domain(seed=3).train == toy_domain(seed=3).train

    def test_lexicon_covers_entity_tokens(self):
        dom = toy_domain(seed=0)
        for e_ in dom.all_examples:
            for tok in e_.lf.split():
                if ":" in tok or tok.startswith(("ci", "ap")):
                    assert tok in dom.lexicon.backward
