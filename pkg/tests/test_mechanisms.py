import pytest
from fractions import Fraction

import numpy as np

from welfare.audit import bid_profiles
from welfare.coverage import random_coverage_instance
from welfare.exceptions import ConstructionError, PreconditionError
from welfare.fixtures import (
    adverse_competition, anonymity_without_mei, counter1, counter3, random_concave_sequence,
    symmetric_indifferent_model
)
from welfare.greedy import locally_greedy, uniform_greedy
from welfare.influence import random_or_graph
from welfare.mechanisms import (
    CoveringMechanism, DisjointMechanism, DisjointUniformMechanism, MechanismTable, OrderingPolicy,
    TableExport, TwoPlayerMechanism, UniformRandomMechanism, caratheodory_prune, construct_distributions,
    construct_probability_table, expected_utilities, fixed_ordering_mechanism, get_mechanism,
    ordering_sequence, run_covering, run_two_player, run_uniform_random, uniform_expected_utilities
)


# --- Helpers ---

def weighted_mean(points, pairs):
    return (
        sum((w * points[i][0] for i, w in pairs), Fraction(0)),
        sum((w * points[i][1] for i, w in pairs), Fraction(0)),
    )


def assert_budget_share_identity(model, max_total):
    for bids in bid_profiles(model.player_count, max_total):
        bids = tuple(bids)
        total = sum(bids)
        w_t = uniform_greedy(model, total).values[-1]
        expected = tuple(Fraction(b, total) * w_t if total else Fraction(0) for b in bids)
        assert uniform_expected_utilities(model, bids) == expected, bids


# --- Carathéodory Pruning Tests ---

def test_prune_keeps_a_point_at_the_mean():
    points = [(0, 0), (2, 0), (0, 2), (1, 1), (2, 2)]
    weights = [Fraction(1, 5)] * 5
    assert caratheodory_prune(points, weights) == [(3, Fraction(1))]

def test_prune_to_a_diagonal():
    points = [(0, 0), (1, 0), (0, 1), (1, 1)]
    weights = [Fraction(1, 4)] * 4
    assert caratheodory_prune(points, weights) == [(0, Fraction(1, 2)), (3, Fraction(1, 2))]

def test_prune_to_a_triangle():
    points = [(0, 0), (3, 0), (0, 3)]
    weights = [Fraction(1, 3)] * 3
    assert caratheodory_prune(points, weights) == [(0, Fraction(1, 3)), (1, Fraction(1, 3)), (2, Fraction(1, 3))]

def test_prune_rejects_bad_weights():
    with pytest.raises(ValueError, match="non-negative and sum to 1"):
        caratheodory_prune([(0, 0), (1, 1)], [Fraction(1, 2), Fraction(1, 4)])

@pytest.mark.parametrize("seed", range(5))
def test_prune_preserves_the_mean(seed):
    rng = np.random.default_rng(seed)
    points = [(Fraction(int(x)), Fraction(int(y))) for x, y in rng.integers(-5, 6, size=(7, 2))]
    raw = [int(v) for v in rng.integers(1, 10, size=7)]
    weights = [Fraction(v, sum(raw)) for v in raw]
    pairs = caratheodory_prune(points, weights)
    assert len(pairs) <= 3
    assert sum(w for _, w in pairs) == 1
    assert all(w > 0 for _, w in pairs)
    assert weighted_mean(points, pairs) == weighted_mean(points, list(enumerate(weights)))


# --- Table M Tests ---

def test_counter1_table_is_sound():
    table = construct_distributions(counter1(), 2, 1)
    assert table.verify() == []
    assert (1, 2) in table
    assert (0, 0) in table
    assert all(len(distribution) <= 3 for distribution in table.entries.values())

@pytest.mark.parametrize("seed", [1, 2, 3])
def test_or_model_tables_are_sound(seed):
    model = random_or_graph(rng_seed=seed, candidates=4, targets=4)
    assert construct_distributions(model, 2, 2).verify() == []

@pytest.mark.parametrize("seed", [0, 1])
def test_coverage_tables_are_sound(seed):
    model = random_coverage_instance(disks=4, cells=6, rng_seed=seed)
    assert construct_distributions(model, 2, 2).verify() == []

@pytest.mark.slow
@pytest.mark.parametrize("seed", range(25))
def test_or_model_tables_are_sound_up_to_total_six(seed):
    model = random_or_graph(rng_seed=seed, candidates=7, targets=6)
    assert construct_distributions(model, 3, 3).verify() == []

@pytest.mark.slow
@pytest.mark.parametrize("seed", range(25))
def test_coverage_tables_are_sound_up_to_total_six(seed):
    model = random_coverage_instance(disks=8, cells=10, rng_seed=seed)
    assert construct_distributions(model, 3, 3).verify() == []

def test_table_entries_match_fresh_greedy_runs():
    model = counter1()
    table = construct_distributions(model, 1, 2)
    for distribution in table.entries.values():
        for entry in distribution:
            assert locally_greedy(model, entry.sequence).sets == entry.state.sets

def test_table_fails_without_adverse_competition():
    with pytest.raises(ConstructionError, match="M\\[1,1\\]") as exc_info:
        construct_distributions(adverse_competition(), 1, 1)
    assert exc_info.value.state["a"] == 1
    assert exc_info.value.state["b"] == 1

def test_table_needs_two_players():
    with pytest.raises(PreconditionError, match="serve two players"):
        construct_distributions(symmetric_indifferent_model([0, 2, 3, 4]), 1, 1)

def test_table_needs_an_exact_model():
    model = random_or_graph(rng_seed=0, candidates=3, targets=3).sampled(samples=10)
    with pytest.raises(PreconditionError, match="need an exact model"):
        construct_distributions(model, 1, 1)

def test_table_budgets_beyond_ground():
    with pytest.raises(PreconditionError, match="exceed 3 elements"):
        construct_distributions(counter1(), 2, 2)

def test_table_export_reloads():
    model = counter1()
    table = construct_distributions(model, 2, 1)
    export = TableExport.model_validate_json(table.to_export().model_dump_json())
    assert export.kind == "M"
    reloaded = MechanismTable.from_export(model, export)
    assert reloaded.verify() == []
    assert reloaded.w(2, 1) == table.w(2, 1)
    assert reloaded.alphas == table.alphas

def test_table_export_rejects_another_model():
    export = construct_distributions(counter1(), 2, 1).to_export()
    with pytest.raises(ConstructionError, match="re-evaluates"):
        MechanismTable.from_export(counter1(Fraction(1, 20)), export)


# --- Table P Tests ---

@pytest.mark.parametrize("seed", [0, 1])
def test_probability_table_on_coverage(seed):
    model = random_coverage_instance(disks=4, cells=6, rng_seed=seed)
    table = construct_probability_table(model, 2, 2)
    assert table.verify() == []
    assert table.probabilities[(3, 0)] == 1
    assert table.probabilities[(0, 3)] == 0
    assert table.order == uniform_greedy(model, 4).elements

def test_probability_table_needs_mei():
    with pytest.raises(PreconditionError, match="needs mechanism indifference"):
        construct_probability_table(anonymity_without_mei(), 1, 1)

def test_covering_run_respects_budgets():
    model = random_coverage_instance(disks=4, cells=6, rng_seed=0)
    outcome = run_covering(model, 2, 1, rng_seed=3)
    assert [len(s) for s in outcome.sets] == [2, 1]
    assert outcome.disjoint
    assert sorted(outcome.sequence) == ["A", "A", "B"]

def test_covering_expectation_reads_the_table():
    model = random_coverage_instance(disks=4, cells=6, rng_seed=1)
    mechanism = CoveringMechanism()
    assert mechanism.expected_utilities(model, (1, 2)) == mechanism.table(model, 3).w(1, 2)


# --- Two-Player Mechanism Tests ---

def test_two_player_run_is_deterministic_per_seed():
    model = counter1()
    first = run_two_player(model, 2, 1, rng_seed=5)
    second = run_two_player(model, 2, 1, rng_seed=5)
    assert first == second
    assert [len(s) for s in first.sets] == [2, 1]
    assert first.welfare == sum(first.utilities)
    assert sorted(first.sequence) == ["A", "A", "B"]

def test_two_player_draws_come_from_the_support():
    model = counter1()
    table = construct_distributions(model, 1, 2)
    support = {entry.sequence.letters for entry in table[(1, 2)]}
    for seed in range(10):
        assert run_two_player(model, 1, 2, rng_seed=seed, table=table).sequence in support

def test_two_player_expectation_matches_table():
    model = counter1()
    mechanism = TwoPlayerMechanism()
    assert mechanism.expected_utilities(model, (1, 1)) == construct_distributions(model, 1, 1).w(1, 1)
    assert expected_utilities("two-player", model, (1, 1)) == mechanism.expected_utilities(model, (1, 1))

def test_two_player_reuses_a_larger_table():
    model = counter1()
    mechanism = TwoPlayerMechanism()
    table = mechanism.table(model, 3)
    assert mechanism.table(model, 2) is table

def test_disjoint_two_player_run_warns():
    model = counter1()
    outcome = TwoPlayerMechanism(disjoint=True).run(model, (1, 1), rng_seed=0)
    assert outcome.mechanism == "disjoint"
    assert outcome.disjoint
    assert outcome.warnings


# --- Uniform Random Mechanism Tests ---

def test_uniform_counter3_values():
    epsilon = Fraction(1, 100)
    model = counter3(epsilon)
    assert uniform_expected_utilities(model, (3, 1))[0] == Fraction(5, 8) + Fraction(3, 4) * epsilon
    assert uniform_expected_utilities(model, (4, 1))[0] == Fraction(3, 5) + Fraction(4, 5) * epsilon

def test_uniform_warns_for_two_players():
    outcome = run_uniform_random(counter3(), (3, 1), rng_seed=2)
    assert outcome.warnings == ["not strategyproof for k=2"]
    assert [len(s) for s in outcome.sets] == [3, 1]

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_uniform_expectation_equals_budget_share(seed):
    model = symmetric_indifferent_model(random_concave_sequence(seed, length=4), players=3)
    assert_budget_share_identity(model, 4)

@pytest.mark.slow
@pytest.mark.parametrize("seed", range(25))
def test_uniform_expectation_equals_budget_share_up_to_total_six(seed):
    model = symmetric_indifferent_model(random_concave_sequence(seed, length=6), players=3)
    assert_budget_share_identity(model, 6)

def test_uniform_closed_form():
    model = symmetric_indifferent_model([0, 6, 10, 12, 13], players=3)
    assert uniform_expected_utilities(model, (2, 1, 1), closed_form=True) == (
        Fraction(13, 2), Fraction(13, 4), Fraction(13, 4)
    )

def test_uniform_closed_form_needs_mei():
    with pytest.raises(PreconditionError, match="closed form needs MeI and AgI"):
        uniform_expected_utilities(anonymity_without_mei(), (1, 1), closed_form=True)

def test_uniform_zero_bids():
    model = symmetric_indifferent_model([0, 1, 2], players=3)
    assert UniformRandomMechanism().expected_utilities(model, (0, 0, 0)) == (0, 0, 0)


# --- Disjoint Mechanism Tests ---

def test_disjoint_bound_factor_per_player_count():
    three = symmetric_indifferent_model([0, 3, 5, 6], players=3)
    assert DisjointMechanism().bound_factor(three) == Fraction(1, 4)
    assert DisjointMechanism().bound_factor(counter1()) == Fraction(1, 3)

def test_disjoint_uniform_on_symmetric_model():
    model = symmetric_indifferent_model([0, 3, 5, 6], players=3)
    assert DisjointUniformMechanism().expected_utilities(model, (1, 1, 1)) == (2, 2, 2)

def test_disjoint_run_is_disjoint():
    model = symmetric_indifferent_model([0, 3, 5, 6, 6], players=3)
    outcome = DisjointMechanism().run(model, (2, 1, 1), rng_seed=7)
    assert sum(len(s) for s in outcome.sets) == len(set().union(*map(set, outcome.sets)))


# --- Fixed Ordering Tests ---

@pytest.mark.parametrize("policy,bids,letters", [
    (OrderingPolicy.DICTATORSHIP, (2, 1), "AAB"),
    (OrderingPolicy.ROUND_ROBIN, (2, 3), "ABABB"),
    (OrderingPolicy.LARGEST_REMAINING, (1, 2), "BAB"),
    (OrderingPolicy.SMALLEST_REMAINING, (2, 2), "AABB"),
])
def test_ordering_sequences(policy, bids, letters):
    assert ordering_sequence(policy, bids).letters == letters

def test_fixed_ordering_outcome():
    model = counter1()
    outcome = fixed_ordering_mechanism("dictatorship").run(model, (2, 1))
    assert outcome.sequence == "AAB"
    assert outcome.labels == [["c1", "c3"], ["c2"]]


# --- Registry Tests ---

def test_get_mechanism_ids():
    assert isinstance(get_mechanism("two-player"), TwoPlayerMechanism)
    assert isinstance(get_mechanism("covering"), CoveringMechanism)
    assert get_mechanism("round-robin").mechanism_id == "round-robin"

def test_get_mechanism_unknown():
    with pytest.raises(ValueError, match="unknown mechanism 'lottery'"):
        get_mechanism("lottery")

def test_wrong_bid_count():
    with pytest.raises(PreconditionError, match="expected 2 bids, got 3"):
        TwoPlayerMechanism().expected_utilities(counter1(), (1, 1, 1))
