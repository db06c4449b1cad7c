import pytest
from fractions import Fraction

from welfare.exceptions import EnumerationCapExceeded, PreconditionError
from welfare.fixtures import (
    counter1, disjoint_anonymity, random_concave_sequence, symmetric_indifferent_model
)
from welfare.greedy import (
    GreedyState, TurnSequence, brute_force_opt, count_profiles, disjoint_chain, is_concave_nondecreasing,
    locally_greedy, sequence_count, uniform_greedy, verify_disjoint_bound
)
from welfare.model import AdditiveModel


# --- Turn Sequence Tests ---

def test_parse_and_letters():
    sequence = TurnSequence.parse("abba")
    assert sequence.turns == (0, 1, 1, 0)
    assert sequence.letters == "ABBA"
    assert sequence.budgets == (2, 2)
    assert sequence.extended(1).letters == "ABBAB"

def test_parse_rejects_foreign_letters():
    with pytest.raises(ValueError, match="not a turn sequence over AB"):
        TurnSequence.parse("ABC")

def test_all_sequences_of_a_profile():
    assert [s.letters for s in TurnSequence.all_for((2, 1))] == ["AAB", "ABA", "BAA"]
    assert len(TurnSequence.all_for((1, 1, 1))) == 6

def test_sequence_count():
    assert sequence_count((2, 2)) == 6
    assert sequence_count((3, 1)) == 4
    assert sequence_count((0, 0)) == 1

def test_enumeration_cap():
    with pytest.raises(EnumerationCapExceeded, match="exceed the cap of 5"):
        TurnSequence.all_for((2, 2), cap=5)


# --- Locally Greedy Tests ---

def test_greedy_trace_and_picks():
    model = AdditiveModel.uniform([5, 3], 2)
    state = locally_greedy(model, TurnSequence.parse("AB"))
    assert state.sets == (frozenset({0}), frozenset({1}))
    assert state.trace == (Fraction(5), Fraction(3))
    assert state.picks == ((0, 0), (1, 1))
    assert state.welfare == Fraction(8)

def test_greedy_ties_go_to_the_lowest_id():
    model = AdditiveModel.uniform([1, 1, 1], 2)
    state = locally_greedy(model, [1, 0])
    assert state.picks == ((1, 0), (0, 1))

def test_overlapping_greedy_may_take_a_held_element():
    # both moves gain nothing for B and the tie goes to element 0
    model = AdditiveModel([[4, 0], [4, 0]])
    state = locally_greedy(model, [0, 1])
    assert state.trace == (Fraction(4), Fraction(0))
    assert state.sets == (frozenset({0}), frozenset({0}))

def test_disjoint_greedy_skips_held_elements():
    model = AdditiveModel([[4, 0], [4, 0]])
    state = locally_greedy(model, [0, 1], disjoint=True)
    assert state.sets == (frozenset({0}), frozenset({1}))

def test_greedy_continues_from_a_state():
    model = counter1()
    prefix = locally_greedy(model, [0])
    full = locally_greedy(model, [1], state=prefix)
    assert full.sets == locally_greedy(model, [0, 1]).sets
    assert full.trace[0] == prefix.trace[0]

def test_greedy_runs_out_of_elements():
    model = AdditiveModel.uniform([1, 1], 2)
    with pytest.raises(PreconditionError, match="no element left for player 0"):
        locally_greedy(model, [0, 0, 0])

def test_counter1_dictatorship_allocations():
    model = counter1()
    assert model.describe(locally_greedy(model, TurnSequence.parse("AB")).sets) == "({c1}, {c3})"
    assert model.describe(locally_greedy(model, TurnSequence.parse("AAB")).sets) == "({c1,c3}, {c2})"

def test_state_to_dict():
    model = AdditiveModel.uniform([2, 1], 2, labels=["x", "y"])
    data = locally_greedy(model, [0]).to_dict(model.labels)
    assert data == {"sets": [[0], []], "welfare": "2/1", "trace": ["2/1"], "labels": [["x"], []]}

def test_initial_state_is_empty():
    state = GreedyState.initial(counter1())
    assert state.sets == (frozenset(), frozenset())
    assert state.welfare == 0


# --- Uniform Greedy Tests ---

def test_uniform_greedy_order_and_values():
    model = AdditiveModel.uniform([1, 3, 2], 2)
    result = uniform_greedy(model, 2)
    assert result.elements == (1, 2)
    assert result.values == (Fraction(0), Fraction(3), Fraction(5))

def test_uniform_greedy_budget_above_ground():
    with pytest.raises(PreconditionError, match="cannot pick 4 of 3 elements"):
        uniform_greedy(AdditiveModel.uniform([1, 1, 1], 2), 4)

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_greedy_values_are_concave_on_symmetric_models(seed):
    sequence = random_concave_sequence(seed)
    model = symmetric_indifferent_model(sequence, players=2)
    assert is_concave_nondecreasing(uniform_greedy(model, 4).values)

def test_is_concave_nondecreasing():
    assert is_concave_nondecreasing([0, 3, 5, 6, 6])
    assert not is_concave_nondecreasing([0, 1, 3])
    assert not is_concave_nondecreasing([0, 2, 1])


# --- Brute Force Tests ---

def test_brute_force_optimum():
    model = AdditiveModel([[1, 2, 3], [3, 2, 1]])
    profile, value = brute_force_opt(model, (1, 1), disjoint=True)
    assert value == Fraction(6)
    assert profile.key == ((2,), (0,))

def test_brute_force_overlapping_profiles():
    model = AdditiveModel([[1, 2, 3], [3, 2, 1]])
    _, value = brute_force_opt(model, (2, 2))
    assert value == Fraction(8)

def test_brute_force_cap():
    model = AdditiveModel.uniform([1] * 6, 2)
    assert count_profiles(6, (3, 3), False) == 400
    with pytest.raises(EnumerationCapExceeded, match="400 candidates exceed the cap of 100"):
        brute_force_opt(model, (3, 3), cap=100)

def test_brute_force_wrong_bid_count():
    with pytest.raises(PreconditionError, match="expected 2 bids, got 3"):
        brute_force_opt(AdditiveModel.uniform([1, 1], 2), (1, 0, 0))


# --- Disjoint Bound Tests ---

@pytest.mark.parametrize("seed", range(6))
def test_disjoint_bound_and_chain(seed):
    model = symmetric_indifferent_model(random_concave_sequence(seed, length=5), players=3)
    report = verify_disjoint_bound(model, (2, 1, 1))
    assert report.exhaustive
    assert len(report.sequences) == 12
    assert report.factor == 4
    assert report.bound_holds
    assert report.chain_bound_holds
    assert all(record.chain_holds for record in report.sequences)

def test_chain_stages_on_an_additive_instance():
    model = AdditiveModel.uniform([4, 3, 1], 2, disjoint_only=True)
    optimum, _ = brute_force_opt(model, (1, 1), disjoint=True)
    state = locally_greedy(model, [0, 1], disjoint=True)
    chain = disjoint_chain(model, optimum.sets, state)
    assert chain[0] <= chain[-1]
    assert chain[-1] == 2 * state.welfare

def test_disjoint_bound_needs_anonymity():
    with pytest.raises(PreconditionError, match="is not anonymous"):
        verify_disjoint_bound(disjoint_anonymity(), (1, 1))

def test_disjoint_bound_without_anonymity_check():
    report = verify_disjoint_bound(disjoint_anonymity(), (1, 1), require_anonymity=False)
    assert not report.bound_holds

def test_disjoint_bound_respects_the_check_cap():
    model = symmetric_indifferent_model([0, 4, 7, 9, 10], players=3)
    with pytest.raises(PreconditionError, match="above the cap of 3"):
        verify_disjoint_bound(model, (1, 1, 1), max_ground=3)
    report = verify_disjoint_bound(model, (1, 1, 1), max_ground=4)
    assert report.bound_holds
