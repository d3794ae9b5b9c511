"""Explanation assembly, baselines, gold pooling, and concreteness."""

import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conceptdiff.errors import InsufficientConceptsError, ParseError
from conceptdiff.explain import (
    ConcretenessTable,
    Explanation,
    RaterLists,
    alphabetize,
    assemble_machine_explanation,
    load_concreteness,
    pool_gold_standard,
    semi_random_baseline,
)


class TestExplanationInvariants:
    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Explanation(concepts=("a", "a"), kind="induced")

    def test_rejects_more_than_seven(self):
        with pytest.raises(ValueError):
            Explanation(concepts=tuple("abcdefgh"), kind="induced")

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            Explanation(concepts=("a",), kind="mystery")

    def test_line_format(self):
        e = Explanation(concepts=("a", "b"), kind="semi_random", metric="f1", seed=3)
        assert e.to_line() == "semi_random\tf1\t3\ta;b"


class TestAssemble:
    def test_dedup_by_label(self):
        ranked = ["alpha", "alpha", "beta"]
        e = assemble_machine_explanation(ranked, k=7)
        assert e.concepts == ("alpha", "beta")
        assert e.short

    def test_threshold_boundary_keeps_exactly_3_5(self):
        table = ConcretenessTable({"a": 3.4, "b": 3.5, "c": 4.0})
        e = assemble_machine_explanation(["a", "b", "c"], k=7, table=table)
        assert e.concepts == ("b", "c")
        assert e.filtered

    def test_absent_word_filtered(self):
        table = ConcretenessTable({"b": 3.5})
        e = assemble_machine_explanation(["mystery", "b"], k=7, table=table)
        assert e.concepts == ("b",)

    def test_filter_then_take_oracle(self):
        rng = np.random.default_rng(101)
        labels = [f"w{i:02d}" for i in range(20)]
        ratings = {lab: float(rng.uniform(2.0, 5.0)) for lab in labels}
        table = ConcretenessTable(ratings)
        ranked = list(rng.permutation(labels))
        e = assemble_machine_explanation(ranked, k=7, table=table)
        # oracle: stable filter on the deduplicated ranking, then take 7
        survivors = [lab for lab in ranked if ratings[lab] >= 3.5][:7]
        assert list(e.concepts) == survivors

    def test_filter_never_reorders_survivors(self):
        table = ConcretenessTable({"x": 4.0, "y": 1.0, "z": 3.9, "w": 5.0})
        e = assemble_machine_explanation(["z", "y", "w", "x"], k=7, table=table)
        assert e.concepts == ("z", "w", "x")

    def test_insufficient_concepts(self):
        table = ConcretenessTable({"a": 1.0})
        with pytest.raises(InsufficientConceptsError):
            assemble_machine_explanation(["a"], k=7, table=table)

    def test_scored_concepts_accepted(self):
        class Fake:
            def __init__(self, label):
                self.label = label

        e = assemble_machine_explanation([Fake("one"), Fake("two")], k=2)
        assert e.concepts == ("one", "two")


class TestSemiRandomBaseline:
    def test_sizes_and_multiset_preserved(self):
        a = [f"a{i}" for i in range(8)]
        b = [f"b{i}" for i in range(8)]
        a2, b2 = semi_random_baseline(a, b, seed=5)
        assert len(a2) == 8 and len(b2) == 8
        assert sorted(a2 + b2) == sorted(a + b)

    def test_seeded_determinism(self):
        a, b = list("abcd"), list("wxyz")
        assert semi_random_baseline(a, b, 9) == semi_random_baseline(a, b, 9)
        assert semi_random_baseline(a, b, 9) != semi_random_baseline(a, b, 10)

    def test_uniform_assignment_over_seeds(self):
        a = [f"a{i}" for i in range(8)]
        b = [f"b{i}" for i in range(8)]
        hits = {item: 0 for item in a}
        n_seeds = 1000
        for seed in range(n_seeds):
            a2, _ = semi_random_baseline(a, b, seed)
            for item in a:
                if item in a2:
                    hits[item] += 1
        # each original A item lands in A' with frequency 8/16; the binomial
        # standard error at n=1000 is ~0.016, so +-0.06 is a 4 sigma band
        for item, count in hits.items():
            assert abs(count / n_seeds - 0.5) < 0.06, item

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            semi_random_baseline([], ["x"], 1)


class TestPoolGoldStandard:
    def test_identical_raters_force_tier_one(self):
        lists = (tuple("abcdefg"), tuple("gfedcba"), tuple("abcdefg"))
        e = pool_gold_standard(RaterLists(lists), seed=1)
        assert sorted(e.concepts) == list("abcdefg")
        assert not e.short

    def test_tiered_pooling_with_seeded_fill(self):
        r1 = ("x", "y", "r1a", "r1b", "r1c", "r1d", "r1e")
        r2 = ("x", "z", "r2a", "r2b", "r2c", "r2d", "r2e")
        r3 = ("x", "y", "z", "r3a", "r3b", "r3c", "r3d")
        e = pool_gold_standard(RaterLists((r1, r2, r3)), seed=11)
        assert e.concepts[0] == "x"            # named by all three
        assert set(e.concepts[1:3]) == {"y", "z"}  # named by exactly two
        assert len(e.concepts) == 7
        singles = {c for c in (r1 + r2 + r3) if c not in ("x", "y", "z")}
        assert set(e.concepts[3:]) <= singles

    def test_disjoint_raters_fill_randomly(self):
        r1 = tuple(f"a{i}" for i in range(7))
        r2 = tuple(f"b{i}" for i in range(7))
        r3 = tuple(f"c{i}" for i in range(7))
        e = pool_gold_standard(RaterLists((r1, r2, r3)), seed=2)
        assert len(e.concepts) == 7
        assert set(e.concepts) <= set(r1 + r2 + r3)

    def test_invariant_to_rater_order(self):
        r1 = ("x", "y", "p1", "p2", "p3", "p4", "p5")
        r2 = ("x", "z", "q1", "q2", "q3", "q4", "q5")
        r3 = ("x", "y", "z", "s1", "s2", "s3", "s4")
        a = pool_gold_standard(RaterLists((r1, r2, r3)), seed=7)
        b = pool_gold_standard(RaterLists((r3, r1, r2)), seed=7)
        assert a.concepts == b.concepts

    def test_case_insensitive_comparison(self):
        r1 = ("Microwave", "y", "p1", "p2", "p3", "p4", "p5")
        r2 = ("microwave ", "z", "q1", "q2", "q3", "q4", "q5")
        r3 = ("MICROWAVE", "w", "s1", "s2", "s3", "s4", "s5")
        e = pool_gold_standard(RaterLists((r1, r2, r3)), seed=3)
        assert e.concepts[0] == "MICROWAVE"  # smallest spelling observed

    def test_short_flag_when_fewer_than_seven(self):
        r1 = ("a", "b", "c", "d", "e", "a", "b")
        r2 = ("a", "b", "c", "d", "e", "c", "d")
        r3 = ("a", "b", "c", "d", "e", "e", "a")
        e = pool_gold_standard(RaterLists((r1, r2, r3)), seed=4)
        assert sorted(e.concepts) == ["a", "b", "c", "d", "e"]
        assert e.short

    def test_rater_list_length_validated(self):
        with pytest.raises(ValueError):
            RaterLists((("a",) * 3, ("b",) * 7, ("c",) * 7))


class TestAlphabetize:
    def test_sorts_case_insensitively(self):
        e = Explanation(concepts=("b", "A", "c"), kind="induced")
        assert alphabetize(e).concepts == ("A", "b", "c")

    def test_idempotent(self):
        e = alphabetize(Explanation(concepts=("b", "A", "c"), kind="induced"))
        assert alphabetize(e) == e

    @given(st.lists(st.text(
        alphabet=st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=6
    ), min_size=1, max_size=7, unique=True))
    def test_matches_sort_oracle(self, labels):
        e = alphabetize(Explanation(concepts=tuple(labels), kind="induced"))
        assert list(e.concepts) == sorted(labels, key=str.casefold)


class TestConcreteness:
    def test_case_insensitive_lookup(self, tmp_path):
        path = tmp_path / "norms.csv"
        path.write_text("word,rating\nscience,2.1\n")
        table = load_concreteness(path)
        assert table.lookup("Science") == 2.1

    def test_missing_word_absent(self, tmp_path):
        path = tmp_path / "norms.csv"
        path.write_text("word,rating\nscience,2.1\n")
        table = load_concreteness(path)
        assert table.lookup("art") is None

    def test_duplicate_keeps_first_with_warning(self, tmp_path, caplog):
        path = tmp_path / "norms.csv"
        path.write_text("word,rating\napple,5.0\napple,1.0\n")
        with caplog.at_level("WARNING"):
            table = load_concreteness(path)
        assert table.lookup("apple") == 5.0
        assert any("duplicate" in r.message for r in caplog.records)

    def test_non_numeric_rating_names_line(self, tmp_path):
        path = tmp_path / "norms.csv"
        path.write_text("word,rating\nok,3.0\nbad,many\n")
        with pytest.raises(ParseError) as err:
            load_concreteness(path)
        assert err.value.line_no == 3

    def test_multiword_label_mean(self):
        table = ConcretenessTable({"apple": 5.0, "pie": 4.0})
        assert table.rating_for_label("Apple pie") == pytest.approx(4.5)
        assert table.rating_for_label("Apple_pie") == pytest.approx(4.5)
        assert table.rating_for_label("apple cart") is None  # cart missing

    def test_direct_hit_wins_over_decomposition(self):
        table = ConcretenessTable({"hot dog": 4.8, "hot": 2.0, "dog": 5.0})
        assert table.rating_for_label("hot dog") == 4.8

    def test_bulk_load_and_lookup_speed(self, tmp_path):
        # documented budget: a 40k-row table loads in about a second and
        # answers a million lookups in about a second on a desk machine
        rng = np.random.default_rng(5)
        rows = ["word,rating"]
        rows += [f"w{i:05d},{rng.uniform(1, 5):.2f}" for i in range(40_000)]
        path = tmp_path / "norms.csv"
        path.write_text("\n".join(rows) + "\n")

        t0 = time.perf_counter()
        table = load_concreteness(path)
        load_s = time.perf_counter() - t0
        assert len(table) == 40_000

        words = [f"w{i % 60_000:05d}" for i in range(1_000_000)]
        t0 = time.perf_counter()
        hits = sum(table.lookup(w) is not None for w in words)
        lookup_s = time.perf_counter() - t0
        assert hits > 0
        print(f"concreteness load={load_s:.3f}s lookups={lookup_s:.3f}s")
        assert load_s < 3.0
        assert lookup_s < 3.0
