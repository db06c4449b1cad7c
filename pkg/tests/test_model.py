import pytest
from fractions import Fraction

from welfare.exceptions import ModelError, PreconditionError
from welfare.model import (
    AdditiveModel, AllocationProfile, BidProfile, SymmetricIndifferentModel, TabularModel,
    WelfareModel, enumerate_profiles, profile_key
)


# --- Helpers ---

class DriftingModel(WelfareModel):
    """Utilities sum to 2 but the independent welfare says 3."""

    def __init__(self):
        super().__init__(2, 1, "drifting")

    def _player_utilities(self, sets):
        return (Fraction(1), Fraction(1))

    def _total_welfare(self, sets):
        return Fraction(3)


# --- Allocation Profile Tests ---

def test_profile_sets_are_order_insensitive():
    first = AllocationProfile([[2, 0], [1]], ground_size=3)
    second = AllocationProfile([(0, 2), (1,)], ground_size=3)
    assert first == second
    assert hash(first) == hash(second)
    assert first.key == ((0, 2), (1,))
    assert first.union == frozenset({0, 1, 2})

def test_profile_rejects_unknown_element():
    with pytest.raises(ModelError, match="outside the ground set"):
        AllocationProfile([[0, 5], []], ground_size=3)

def test_disjoint_profile_rejects_overlap():
    with pytest.raises(ModelError, match="overlap"):
        AllocationProfile([[0, 1], [1]], ground_size=3, disjoint=True)

def test_profile_with_element_and_labels():
    profile = AllocationProfile.empty(2, 3).with_element(1, 2)
    assert profile.key == ((), (2,))
    assert profile.to_dict(["a", "b", "c"]) == {"sets": [[], [2]], "labels": [[], ["c"]]}


# --- Bid Profile Tests ---

def test_bid_profile_parse():
    bids = BidProfile.parse("2, 1")
    assert bids == (2, 1)
    assert bids.total == 3
    assert bids.player_count == 2
    assert str(bids) == "2,1"

def test_bid_profile_incremented_leaves_original():
    bids = BidProfile((1, 1))
    assert bids.incremented(0) == (2, 1)
    assert bids == (1, 1)

def test_bid_profile_rejects_negative_budget():
    with pytest.raises(ValueError, match="non-negative integers"):
        BidProfile((1, -1))

def test_bid_profile_rejects_text():
    with pytest.raises(ValueError, match="comma-separated integers"):
        BidProfile.parse("two,one")

def test_bid_profile_exceeding_ground_set():
    with pytest.raises(PreconditionError, match="ground set has 2 elements"):
        BidProfile((2, 1), ground_size=2)


# --- Enumeration Tests ---

def test_enumerate_disjoint_profiles_count():
    assert len(list(enumerate_profiles(2, 3, disjoint=True))) == 27

def test_enumerate_overlapping_profiles_count():
    profiles = list(enumerate_profiles(2, 3))
    assert len(profiles) == 64
    assert len(set(profiles)) == 64

def test_enumerate_respects_max_set_size():
    for sets in enumerate_profiles(2, 3, max_set_size=1):
        assert all(len(s) <= 1 for s in sets)


# --- Tabular Model Tests ---

def test_tabular_model_requires_complete_table():
    with pytest.raises(ModelError, match="no entry for reachable profile"):
        TabularModel(1, 1, {((),): (0,)})

def test_tabular_model_rejects_negative_utility():
    entries = {((),): (0,), ((0,),): (-1,)}
    with pytest.raises(ModelError, match="negative utility"):
        TabularModel(1, 1, entries)

def test_tabular_model_lookup_canonicalizes():
    model = TabularModel(1, 2, {
        ((),): (0,), ((0,),): (1,), ((1,),): (1,), ((1, 0),): ("3/2",),
    })
    assert model.utilities([[0, 1]]) == (Fraction(3, 2),)
    assert model.welfare([[1, 0]]) == Fraction(3, 2)

def test_symmetric_function_is_anonymous():
    model = TabularModel.from_symmetric_function(
        2, 2, lambda own, others: Fraction(len(own), 1 + sum(len(s) for s in others)), disjoint_only=True
    )
    assert model.utilities([[0], [1]]) == (Fraction(1, 2), Fraction(1, 2))
    assert model.utilities([[0, 1], []]) == (Fraction(2), Fraction(0))


# --- Additive Model Tests ---

def test_additive_shared_element_is_split():
    model = AdditiveModel([[2, 4], [6, 8]], labels=["a", "b"])
    assert model.utilities([[0, 1], [1]]) == (Fraction(4), Fraction(4))
    assert model.welfare([[0, 1], [1]]) == Fraction(8)
    assert model.describe([[0, 1], [1]]) == "({a,b}, {b})"

def test_additive_uniform_values():
    model = AdditiveModel.uniform([1, 2, 3], 3)
    assert model.player_count == 3
    assert model.utilities([[2], [], [0]]) == (Fraction(3), Fraction(0), Fraction(1))

def test_additive_rejects_ragged_rows():
    with pytest.raises(ValueError, match="every player must value every element"):
        AdditiveModel([[1, 2], [1]])


# --- Oracle Contract Tests ---

def test_wrong_arity_profile():
    model = AdditiveModel.uniform([1, 1], 2)
    with pytest.raises(ModelError, match="expected 2 sets, got 3"):
        model.utilities([[], [], []])

def test_disjoint_only_model_rejects_overlap():
    model = AdditiveModel.uniform([1, 1], 2, disjoint_only=True)
    with pytest.raises(ModelError, match="only disjoint profiles"):
        model.utilities([[0], [0]])

def test_welfare_disagreeing_with_utilities():
    with pytest.raises(ModelError, match="utilities sum to 2"):
        DriftingModel().welfare([[0], []])

def test_utilities_are_memoized():
    model = AdditiveModel.uniform([1, 2], 2)
    model.utilities([[0], [1]])
    model.utilities([[0], [1]])
    model.utilities([(0,), (1,)])
    assert model.cache_size == 1

def test_profile_from_labels():
    model = AdditiveModel.uniform([1, 2], 2, labels=["x", "y"])
    assert profile_key(model.profile_from_labels([["y"], ["x"]])) == ((1,), (0,))
    with pytest.raises(ModelError, match="unknown element label"):
        model.element_id("z")


# --- Symmetric Indifferent Model Tests ---

def test_symmetric_indifferent_shares_by_set_size():
    model = SymmetricIndifferentModel([0, 4, 6, 7], 3)
    assert model.utilities([[0, 1], [2], []]) == (Fraction(14, 3), Fraction(7, 3), Fraction(0))
    assert model.welfare([[0, 1], [2], []]) == Fraction(7)

def test_symmetric_indifferent_needs_zero_start():
    with pytest.raises(ModelError, match="w\\(0\\) = 0"):
        SymmetricIndifferentModel([1, 2], 2)
