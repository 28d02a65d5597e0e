import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cookbench.cooklang import IngredientRecord, Quantity
from cookbench.metrics import (
    EmptyReference,
    MetricReport,
    amount_score,
    edit_distance,
    ingredient_diff,
    ingredient_score,
    rouge_l,
    score_sample,
    ter,
    unit_score,
    wer,
)

from oracles import all_pairs, brute_edit_cost, brute_rouge_l, brute_ter_cost


def ing(name, amount=None, unit=None):
    return IngredientRecord(name, Quantity.from_raw(amount) if amount else None, unit)


class TestWer:
    def test_identity(self):
        assert wer(list("abcd"), list("abcd")) == 0

    def test_deletion(self):
        assert wer(["mash", "the", "potato"], ["mash", "potato"]) == pytest.approx(1 / 3)

    def test_can_exceed_one(self):
        assert wer(["a"], ["b", "c", "d"]) == 3.0

    def test_empty_reference(self):
        assert wer([], []) == 0
        with pytest.raises(EmptyReference):
            wer([], ["a"])


class TestRouge:
    def test_identity(self):
        assert rouge_l(list("abc"), list("abc")) == 1.0

    def test_disjoint(self):
        assert rouge_l(list("abc"), list("xyz")) == 0.0

    def test_worked_example(self):
        assert rouge_l(list("abcd"), list("acd")) == pytest.approx(6 / 7)

    def test_empty_hypothesis(self):
        assert rouge_l(list("ab"), []) == 0.0

    @given(st.lists(st.sampled_from("abc"), max_size=7), st.lists(st.sampled_from("abc"), max_size=7))
    def test_symmetric(self, a, b):
        if a and b:
            assert rouge_l(a, b) == pytest.approx(rouge_l(b, a), abs=1e-15)


class TestTer:
    def test_identity(self):
        assert ter(list("ABCD"), list("ABCD")) == 0

    def test_substitution(self):
        assert ter(list("ABCD"), list("ABXD")) == 0.25

    def test_one_block_shift(self):
        assert ter(list("ABCD"), list("BCDA")) == 0.25
        assert ter(list("ABCD"), list("BCDA"), exact=True) == 0.25

    def test_exact_limit(self):
        with pytest.raises(ValueError):
            ter(list("abcdefghi"), list("abc"), exact=True)

    def test_greedy_bounded_by_levenshtein(self):
        rng = random.Random(3)
        for _ in range(200):
            a = [rng.choice("abcd") for _ in range(rng.randint(1, 25))]
            b = [rng.choice("abcd") for _ in range(rng.randint(0, 25))]
            assert 0 <= ter(a, b) <= edit_distance(a, b) / len(a)

    def test_long_sequences_finish(self):
        rng = random.Random(0)
        words = [f"w{i}" for i in range(60)]
        a = [rng.choice(words) for _ in range(300)]
        # move one 5-token block 20 places: a single legal shift
        b = a[:100] + a[105:125] + a[100:105] + a[125:]
        assert ter(a, b) == pytest.approx(1 / 300)


def test_oracles_on_sample_of_pairs():
    # the full exhaustive sweep runs in the acceptance suite
    pairs = [p for p in all_pairs(6) if p[0]]
    for ref, hyp in random.Random(11).sample(pairs, 1500):
        assert wer(ref, hyp) * len(ref) == brute_edit_cost(ref, hyp)
        assert abs(rouge_l(ref, hyp) - brute_rouge_l(ref, hyp)) <= 1e-12
        exact = ter(ref, hyp, exact=True)
        assert exact * len(ref) == brute_ter_cost(ref, hyp)
        assert ter(ref, hyp) >= exact


class TestIdentification:
    def test_ingredient_score(self):
        assert ingredient_score(["potato", "salt"], ["potato", "salt"]) == 1
        assert ingredient_score(["potato", "salt"], ["potato"]) == 0
        assert ingredient_score(["potato"], ["Potato"]) == 0

    def test_extras_do_not_zero(self):
        assert ingredient_score(["potato"], ["potato", "parsley"]) == 1

    def test_multiset(self):
        assert ingredient_score(["salt", "salt"], ["salt"]) == 0

    def test_trim_is_only_normalization(self):
        assert ingredient_score([" salt "], ["salt"]) == 1

    def test_unit_and_amount(self):
        assert unit_score([ing("potato", "2")], [ing("potato", "2")]) == 1
        assert amount_score([ing("potato", "2")], [ing("potato", "2")]) == 1
        ref, hyp = [ing("syrup", "1/2", "tbsp")], [ing("syrup", "0.5", "tbsp")]
        assert amount_score(ref, hyp) == 0
        assert unit_score(ref, hyp) == 1
        assert unit_score([ing("salt")], []) == 0
        assert amount_score([ing("salt")], []) == 0

    def test_repeated_ingredient_pairs_in_order(self):
        ref = [ing("salt", "1", "tsp"), ing("salt", "2", "tsp")]
        assert amount_score(ref, [ing("salt", "1", "tsp"), ing("salt", "2", "tsp")]) == 1
        assert amount_score(ref, [ing("salt", "2", "tsp"), ing("salt", "1", "tsp")]) == 0

    def test_diff(self):
        assert ingredient_diff(["a", "b"], ["b", "a"]) == ([], [])
        assert ingredient_diff(["potato", "salt"], ["potato", "pepper"]) == (["salt"], ["pepper"])
        assert ingredient_diff([], ["salt"]) == ([], ["salt"])


REF = ">> servings: 2\n\nMash @potato{2%kg} with #potato masher{}.\n\n-- careful\nSeason with @salt and rest ~{5%minutes}."


class TestScoreSample:
    def test_identity(self):
        r = score_sample(REF, REF, "x")
        assert (r.wer, r.rouge_l, r.ter) == (0, 1, 0)
        assert (r.ingredient_score, r.unit_score, r.amount_score, r.parse_ok) == (1, 1, 1, True)

    def test_metadata_and_comments_not_scored(self):
        bare = "Mash @potato{2%kg} with #potato masher{}.\n\nSeason with @salt and rest ~{5%minutes}."
        assert score_sample(REF, bare).wer == 0

    def test_empty_candidate(self):
        r = score_sample(REF, "")
        assert r.rouge_l == 0 and r.ingredient_score == 0 and r.wer == 1

    def test_renamed_ingredient(self):
        r = score_sample(REF, REF.replace("@salt", "@sea salt{}"))
        assert r.ingredient_score == 0
        assert (r.missing_ingredients, r.extra_ingredients) == (["salt"], ["sea salt"])

    def test_unparsable_candidate(self):
        r = score_sample(REF, "Mash @potato{2%kg with stuff")
        assert not r.parse_ok and r.ingredient_score == 0
        assert r.missing_ingredients == ["potato", "salt"]
        assert 0 < r.rouge_l < 1

    def test_failed_flag(self):
        r = score_sample(REF, "", failed=True)
        assert r.failed and not r.parse_ok and r.ter == 1

    def test_cooklang_wer_tokens(self):
        hyp = REF.replace("@potato{2%kg}", "@potato{3%kg}")
        words = score_sample(REF, hyp).wer
        elements = score_sample(REF, hyp, wer_tokens="cooklang").wer
        assert words > 0 and elements > 0
        with pytest.raises(ValueError):
            score_sample(REF, hyp, wer_tokens="chars")

    def test_report_round_trip(self):
        r = score_sample(REF, REF.replace("@salt", "salt"), "id-1")
        assert MetricReport.from_dict(r.to_dict()) == r


@given(st.integers(0, 1))
def test_deleting_an_ingredient_never_helps(i):
    hyp = REF.replace(["@potato{2%kg}", "@salt"][i], "")
    base, worse = score_sample(REF, REF), score_sample(REF, hyp)
    assert worse.ingredient_score <= base.ingredient_score
    assert len(worse.missing_ingredients) >= len(base.missing_ingredients)
