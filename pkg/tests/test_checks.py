import pytest

from welfare.checks import (
    check_adverse_competition, check_agi, check_anonymity, check_mei, check_mei_agi_implies_anonymity,
    check_nondecreasing_submodular, check_normalization, run_all_checks
)
from welfare.exceptions import PreconditionError
from welfare.fixtures import (
    adverse_competition, anonymity_without_mei, counter1, mei_without_anonymity,
    random_concave_sequence, symmetric_indifferent_model, three_player_anonymous
)
from welfare.influence import random_or_graph
from welfare.model import AdditiveModel, TabularModel


# --- Submodularity Tests ---

def test_symmetric_indifferent_model_is_submodular():
    model = symmetric_indifferent_model([0, 3, 5, 6], players=3)
    result = check_nondecreasing_submodular(model)
    assert result.passed
    assert result.verdict == "PASS"
    assert result.profiles_examined == 64

def test_increasing_returns_are_caught():
    # welfare 0, 1, 3: the second element is worth more than the first
    entries = {
        ((),): (0,), ((0,),): (1,), ((1,),): (1,), ((0, 1),): (3,),
    }
    model = TabularModel(1, 2, entries, "convex")
    result = check_nondecreasing_submodular(model)
    assert not result.passed
    assert result.verdict == "FAIL"
    assert result.witness["kind"] == "increasing_returns"

def test_or_model_is_submodular():
    model = random_or_graph(rng_seed=3, candidates=3, targets=3)
    assert check_nondecreasing_submodular(model).passed


# --- Adverse Competition Tests ---

def test_or_model_has_adverse_competition():
    assert check_adverse_competition(counter1()).passed

def test_adverse_competition_fixture_fails():
    result = check_adverse_competition(adverse_competition())
    assert not result.passed
    assert result.witness["player"] == 1
    assert result.witness["opponent"] == 0
    assert result.witness["before"] == "0/1"
    assert result.witness["after"] == "10/1"


# --- Indifference Tests ---

def test_mei_without_anonymity():
    model = mei_without_anonymity()
    assert check_mei(model).passed
    assert check_adverse_competition(model).passed
    result = check_anonymity(model)
    assert not result.passed
    assert result.witness["utility"] == "8/5"

def test_anonymity_without_mei():
    model = anonymity_without_mei()
    assert check_anonymity(model).passed
    result = check_mei(model)
    assert not result.passed
    assert {result.witness["welfare"], result.witness["other_welfare"]} == {"2/1", "3/2"}

def test_three_player_anonymous_model_has_neither_indifference():
    model = three_player_anonymous()
    assert check_anonymity(model).passed
    assert not check_mei(model).passed
    assert not check_agi(model).passed

def test_agi_is_vacuous_for_two_players():
    result = check_agi(counter1())
    assert result.passed
    assert result.detail == "vacuous for fewer than three players"

def test_normalization():
    assert check_normalization(mei_without_anonymity()).passed
    assert not check_normalization(adverse_competition()).passed


# --- Implication Tests ---

@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_mei_and_agi_imply_anonymity(seed):
    model = symmetric_indifferent_model(random_concave_sequence(seed, length=4), players=3)
    result = check_mei_agi_implies_anonymity(model)
    assert result.mei.passed
    assert result.agi.passed
    assert result.anonymity.passed
    assert result.holds

def test_implication_is_vacuous_without_mei():
    result = check_mei_agi_implies_anonymity(three_player_anonymous())
    assert not result.mei.passed
    assert result.holds

def test_implication_needs_three_players():
    with pytest.raises(PreconditionError, match="k >= 3"):
        check_mei_agi_implies_anonymity(counter1())

def test_implication_needs_normalization():
    model = AdditiveModel.uniform([1], 3)
    shifted = TabularModel.from_function(
        3, 1, lambda sets: [v + 1 for v in model.utilities(sets)], "shifted"
    )
    with pytest.raises(PreconditionError, match="not normalized"):
        check_mei_agi_implies_anonymity(shifted)


# --- Precondition Tests ---

def test_ground_cap():
    with pytest.raises(PreconditionError, match="above the cap of 2"):
        check_mei(counter1(), max_ground=2)

def test_sampled_model_is_rejected():
    model = random_or_graph(rng_seed=0, candidates=2, targets=2).sampled(samples=10)
    with pytest.raises(PreconditionError, match="needs an exact model"):
        check_anonymity(model)

def test_run_all_checks():
    results = run_all_checks(mei_without_anonymity())
    assert [r.check for r in results] == [
        "nondecreasing_submodular", "adverse_competition", "mei", "agi", "anonymity", "normalization",
    ]
    assert [r.passed for r in results] == [True, True, True, True, False, True]
    assert results[0].model_dump(mode="json")["verdict"] == "PASS"
