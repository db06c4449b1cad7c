"""
Reproduction of the bundled counterexamples with exact arithmetic.

Every case loads its fixture, evaluates the mechanism or ordering it is about,
and reports exact values next to the closed forms printed for it. Printed
forms that drop O(ε) terms are compared, never asserted as equalities.
"""

from fractions import Fraction
from itertools import combinations
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import logging

from pydantic import BaseModel, computed_field

from welfare.checks import check_adverse_competition, check_anonymity
from welfare.config import Config
from welfare.context import AuditContext
from welfare.exceptions import ConstructionError, FixtureError
from welfare.fixtures import (
    adverse_competition, counter1, counter2, counter3, disjoint_anonymity, extension_infeasibility
)
from welfare.greedy import TurnSequence, brute_force_opt, locally_greedy
from welfare.mechanisms import (
    OrderingPolicy, TwoPlayerMechanism, fixed_ordering_mechanism, ordering_sequence, uniform_expected_utilities
)
from welfare.model import WelfareModel, enumerate_profiles
from welfare.types import RationalField, format_rational

logger = logging.getLogger(__name__)


class Comparison(BaseModel):
    """A claimed strict inequality `left < right` between two named values."""
    left: str
    right: str
    holds: bool


class PrintedValue(BaseModel):
    """A closed form as printed, its value at the chosen parameters and the exact value."""
    name: str
    printed: str
    printed_value: RationalField
    exact: RationalField
    deviation: RationalField
    within_tolerance: Optional[bool] = None


class ReproReport(BaseModel):
    case: str
    model: str
    epsilon: Optional[RationalField] = None
    N: Optional[RationalField] = None
    values: Dict[str, RationalField]
    allocations: Dict[str, str] = {}
    printed: List[PrintedValue] = []
    comparisons: List[Comparison]
    notes: List[str] = []
    context: Dict[str, Any] = {}

    @computed_field
    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.comparisons)


def _validate_epsilon(epsilon: Fraction) -> None:
    if not 0 < epsilon < Config.EPSILON_UPPER_BOUND:
        raise FixtureError(f"epsilon must lie in (0, {Config.EPSILON_UPPER_BOUND}), got {epsilon}")


def _validate_n(N: Fraction) -> None:
    if not N > 1:
        raise FixtureError(f"N must exceed 1, got {N}")


def _printed(name: str, printed: str, printed_value: Fraction, exact: Fraction,
             tolerance: Optional[Fraction] = None) -> PrintedValue:
    deviation = abs(exact - printed_value)
    if deviation and tolerance is None:
        logger.warning(f"{name}: exact value {exact} differs from the printed {printed} = {printed_value}")
    return PrintedValue(
        name=name,
        printed=printed,
        printed_value=printed_value,
        exact=exact,
        deviation=deviation,
        within_tolerance=None if tolerance is None else deviation <= tolerance,
    )


def _less(values: Dict[str, Fraction], left: str, right: str) -> Comparison:
    return Comparison(left=left, right=right, holds=values[left] < values[right])


def _ordering_values(
    model: WelfareModel,
    policy: OrderingPolicy,
    profiles: Sequence[Tuple[int, ...]]
) -> Tuple[Dict[str, Fraction], Dict[str, str]]:
    mechanism = fixed_ordering_mechanism(policy)
    values: Dict[str, Fraction] = {}
    allocations: Dict[str, str] = {}
    for bids in profiles:
        key = f"u_A({bids[0]},{bids[1]})"
        values[key] = mechanism.expected_utilities(model, bids)[0]
        state = locally_greedy(model, ordering_sequence(policy, bids))
        allocations[key] = f"{ordering_sequence(policy, bids).letters} -> {model.describe(state.sets)}"
    return values, allocations


def _counter1_case(case: str, policy: OrderingPolicy, epsilon: Fraction) -> ReproReport:
    _validate_epsilon(epsilon)
    model = counter1(epsilon)
    values, allocations = _ordering_values(model, policy, [(1, 1), (2, 1)])
    tolerance = 3 * epsilon
    return ReproReport(
        case=case,
        model=model.name,
        epsilon=epsilon,
        values=values,
        allocations=allocations,
        printed=[
            _printed("u_A(1,1)", "2", Fraction(2), values["u_A(1,1)"], tolerance),
            _printed("u_A(2,1)", "16/10", Fraction(16, 10), values["u_A(2,1)"], tolerance),
        ],
        comparisons=[_less(values, "u_A(2,1)", "u_A(1,1)")],
        notes=["the edge c2 -> u3 carries probability ε; as printed (1/4 + ε) c2 would be the first greedy pick"],
    )


def dictatorship_counter1(epsilon: Fraction, N: Fraction) -> ReproReport:
    """Player A loses by raising its bid from 1 to 2 under the dictatorship ordering."""
    return _counter1_case("dictatorship-counter1", OrderingPolicy.DICTATORSHIP, epsilon)


def largest_remaining_counter1(epsilon: Fraction, N: Fraction) -> ReproReport:
    """The same violation when the player with the largest remaining budget moves first."""
    return _counter1_case("largest-remaining-counter1", OrderingPolicy.LARGEST_REMAINING, epsilon)


def roundrobin_counter2(epsilon: Fraction, N: Fraction) -> ReproReport:
    """Player A loses by raising its bid from 1 to 2 under round robin."""
    _validate_epsilon(epsilon)
    model = counter2(epsilon)
    values, allocations = _ordering_values(model, OrderingPolicy.ROUND_ROBIN, [(1, 2), (2, 2)])
    return ReproReport(
        case="roundrobin-counter2",
        model=model.name,
        epsilon=epsilon,
        values=values,
        allocations=allocations,
        printed=[
            _printed("u_A(1,2)", "1", Fraction(1), values["u_A(1,2)"], 3 * epsilon),
            _printed("u_A(2,2)", "1/2 + 4·ε", Fraction(1, 2) + 4 * epsilon, values["u_A(2,2)"]),
        ],
        comparisons=[_less(values, "u_A(2,2)", "u_A(1,2)")],
        notes=[
            "exact u_A(2,2) = 1/2 + 6·ε: c1 and c4 carry ε each on top of the printed terms",
        ],
    )


def uniform_counter3(epsilon: Fraction, N: Fraction) -> ReproReport:
    """
    The uniform random greedy mechanism is not monotone for two players; the
    two-player table mechanism on the same instance is shown alongside.
    """
    _validate_epsilon(epsilon)
    model = counter3(epsilon)
    values: Dict[str, Fraction] = {
        "u_A(3,1)": uniform_expected_utilities(model, (3, 1))[0],
        "u_A(4,1)": uniform_expected_utilities(model, (4, 1))[0],
    }
    table = TwoPlayerMechanism()
    values["two-player u_A(3,1)"] = table.expected_utilities(model, (3, 1))[0]
    values["two-player u_A(4,1)"] = table.expected_utilities(model, (4, 1))[0]
    return ReproReport(
        case="uniform-counter3",
        model=model.name,
        epsilon=epsilon,
        values=values,
        printed=[
            _printed("u_A(3,1)", "5/8 + 3/4·ε", Fraction(5, 8) + Fraction(3, 4) * epsilon, values["u_A(3,1)"]),
            _printed("u_A(4,1)", "3/5 + 4/5·ε", Fraction(3, 5) + Fraction(4, 5) * epsilon, values["u_A(4,1)"]),
        ],
        comparisons=[
            _less(values, "u_A(4,1)", "u_A(3,1)"),
            Comparison(
                left="two-player u_A(3,1)",
                right="two-player u_A(4,1)",
                holds=values["two-player u_A(3,1)"] <= values["two-player u_A(4,1)"],
            ),
        ],
        notes=["seed weights are not credited on this instance", "the second comparison is non-strict"],
    )


def _best_guarantee(points: Sequence[Tuple[Fraction, Fraction]]) -> Fraction:
    """max over mixtures of the points of min(u_A, u_B)."""
    best = max(min(p) for p in points)
    for p, q in combinations(points, 2):
        gap_p, gap_q = p[0] - p[1], q[0] - q[1]
        if gap_p * gap_q < 0:
            weight = gap_q / (gap_q - gap_p)
            best = max(best, weight * p[0] + (1 - weight) * q[0])
    return best


def adverse_competition_case(epsilon: Fraction, N: Fraction) -> ReproReport:
    """
    Without adverse competition no allocation at bids (1,1) keeps both players
    from preferring to bid 0 once N > 3: every mixture leaves someone below the
    N it collects when the opponent alone is served.
    """
    _validate_n(N)
    model = adverse_competition(N)
    check = check_adverse_competition(model)

    deviation_a = locally_greedy(model, TurnSequence([1])).sets
    deviation_b = locally_greedy(model, TurnSequence([0])).sets
    values: Dict[str, Fraction] = {
        "u_A(0,1)": model.utilities(deviation_a)[0],
        "u_B(1,0)": model.utilities(deviation_b)[1],
    }
    points = []
    for sets in enumerate_profiles(2, model.ground_size, max_set_size=1):
        if all(len(s) == 1 for s in sets):
            points.append(tuple(model.utilities(sets)))
    values["best min(u_A, u_B) at (1,1)"] = _best_guarantee(points)
    values["required"] = min(values["u_A(0,1)"], values["u_B(1,0)"])

    notes = [f"adverse competition: {check.verdict} ({check.detail})"]
    try:
        TwoPlayerMechanism().expected_utilities(model, (1, 1))
        notes.append("table M was constructed")
    except ConstructionError as exc:
        notes.append(f"table M cannot be constructed: {exc}")

    return ReproReport(
        case="adverse-competition",
        model=model.name,
        N=N,
        values=values,
        comparisons=[_less(values, "best min(u_A, u_B) at (1,1)", "required")],
        notes=notes,
    )


def disjoint_anonymity_case(epsilon: Fraction, N: Fraction) -> ReproReport:
    """Without anonymity the disjoint locally greedy allocator is off by (N+1)/(2+ε)."""
    _validate_epsilon(epsilon)
    _validate_n(N)
    model = disjoint_anonymity(epsilon, N)
    anonymity = check_anonymity(model)
    state = locally_greedy(model, TurnSequence([0, 1]), disjoint=True)
    optimum_profile, optimum = brute_force_opt(model, (1, 1), disjoint=True)
    ratio = optimum / state.welfare
    values: Dict[str, Fraction] = {
        "greedy welfare (A first)": state.welfare,
        "optimum": optimum,
        "ratio": ratio,
        "k+1": Fraction(model.player_count + 1),
    }
    return ReproReport(
        case="disjoint-anonymity",
        model=model.name,
        epsilon=epsilon,
        N=N,
        values=values,
        allocations={
            "greedy (A first)": model.describe(state.sets),
            "optimum": model.describe(optimum_profile),
        },
        printed=[_printed("ratio", "(N+1)/(2+ε)", (N + 1) / (2 + epsilon), ratio)],
        comparisons=[_less(values, "k+1", "ratio")],
        notes=[f"anonymity: {anonymity.verdict} ({anonymity.detail})"],
    )


# Which player is served first for every budget profile totalling at most 2.
EXTENSION_BEHAVIOUR: Dict[Tuple[int, int, int], Optional[int]] = {
    (0, 0, 0): None,
    (1, 0, 0): 0, (0, 1, 0): 1, (0, 0, 1): 2,
    (1, 1, 0): 0, (0, 1, 1): 1, (1, 0, 1): 2,
}


def _behaviour_sequence(bids: Tuple[int, ...], first: Optional[int]) -> TurnSequence:
    turns: List[int] = []
    remaining = list(bids)
    if first is not None:
        turns.append(first)
        remaining[first] -= 1
    for player, budget in enumerate(remaining):
        turns.extend([player] * budget)
    return TurnSequence(turns, len(bids))


def _drop(bids: Tuple[int, ...], player: int) -> Tuple[int, ...]:
    lowered = list(bids)
    lowered[player] -= 1
    return tuple(lowered)


def extension_infeasibility_case(epsilon: Fraction, N: Fraction) -> ReproReport:
    """
    A three-player mechanism that is strategyproof and respects adverse
    competition up to a total budget of 2 cannot be extended to (1,1,1)
    without dropping to zero welfare.

    Adverse competition bounds w^i(1,1,1) by w^i(b - e_j) plus the greedy
    marginal gain of the extra turn, for every opponent j. The bounds are
    evaluated exactly; the welfare any mixture can reach under them is their
    sum (capped by the single valuable element).
    """
    model = extension_infeasibility()
    k = model.player_count
    utilities: Dict[Tuple[int, ...], Tuple[Fraction, ...]] = {}
    allocations: Dict[str, str] = {}
    for bids, first in EXTENSION_BEHAVIOUR.items():
        sequence = _behaviour_sequence(bids, first)
        state = locally_greedy(model, sequence, disjoint=True)
        utilities[bids] = tuple(model.utilities(state.sets))
        allocations[str(bids)] = f"{sequence.letters or 'N/A'} -> {[format_rational(v) for v in utilities[bids]]}"

    # the extra turn at (1,1,1) never gains anything once c is taken
    target = (1, 1, 1)
    gains = [locally_greedy(model, s, disjoint=True).trace[-1] for s in TurnSequence.all_for(target)]
    delta = max(gains)

    values: Dict[str, Fraction] = {"greedy marginal of the third turn": delta}
    bounds = []
    for player in range(k):
        bound = min(
            utilities[_drop(target, opponent)][player] + delta
            for opponent in range(k) if opponent != player
        )
        values[f"bound on w^{'ABC'[player]}(1,1,1)"] = bound
        bounds.append(bound)
    values["max welfare at (1,1,1)"] = min(Fraction(1), sum(bounds, Fraction(0)))
    values["zero"] = Fraction(0)

    raised = {
        (bids, player): tuple(b + (p == player) for p, b in enumerate(bids))
        for bids in utilities for player in range(k)
    }
    monotone = all(
        utilities[bids][player] <= utilities[higher][player]
        for (bids, player), higher in raised.items() if higher in utilities
    )
    adverse = all(
        utilities[bids][player] <= utilities[_drop(bids, opponent)][player]
        for bids in utilities for player in range(k) for opponent in range(k)
        if opponent != player and bids[opponent] > 0
    )
    return ReproReport(
        case="extension-infeasibility",
        model=model.name,
        values=values,
        allocations=allocations,
        comparisons=[Comparison(left="max welfare at (1,1,1)", right="zero",
                                holds=values["max welfare at (1,1,1)"] == 0)],
        notes=[
            f"behaviour up to total 2 is monotone: {monotone}",
            f"behaviour up to total 2 respects adverse competition: {adverse}",
        ],
    )


ReproCase = Callable[[Fraction, Fraction], ReproReport]

REPRO_CASES: Dict[str, ReproCase] = {
    "dictatorship-counter1": dictatorship_counter1,
    "largest-remaining-counter1": largest_remaining_counter1,
    "roundrobin-counter2": roundrobin_counter2,
    "uniform-counter3": uniform_counter3,
    "adverse-competition": adverse_competition_case,
    "disjoint-anonymity": disjoint_anonymity_case,
    "extension-infeasibility": extension_infeasibility_case,
}


def reproduce(case: str, epsilon: Optional[Any] = None, N: Optional[Any] = None) -> ReproReport:
    """
    Run a counterexample case.

    Args:
        case: One of `REPRO_CASES`
        epsilon: ε in (0, 1/8), default 1/100
        N: N > 1, default 10

    Returns:
        ReproReport, a deterministic function of (case, ε, N) apart from its
        run metadata

    Raises:
        FixtureError: If the case is unknown or a parameter is out of range
    """
    if case not in REPRO_CASES:
        raise FixtureError(f"unknown repro case {case!r}; expected one of {', '.join(sorted(REPRO_CASES))}")
    epsilon = Fraction(epsilon) if epsilon is not None else Config.DEFAULT_EPSILON
    N = Fraction(N) if N is not None else Config.DEFAULT_N
    context = AuditContext("reproduce", parameters={"case": case, "epsilon": str(epsilon), "N": str(N)})

    report = REPRO_CASES[case](epsilon, N)
    context.record(case, report.holds)
    report.context = context.finish().to_dict()
    logger.info(f"repro {case}: claim {'holds' if report.holds else 'does not hold'}")
    return report
