"""
Bundled instances: the counterexample spread graphs, the hand-built tabular
models used to separate the structural assumptions, and seeded generators.
"""

from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from welfare.config import Config
from welfare.exceptions import FixtureError
from welfare.influence import OrModel, SpreadGraph
from welfare.model import AdditiveModel, SymmetricIndifferentModel, TabularModel, WelfareModel
from welfare.types import ElementSet, Profile

logger = logging.getLogger(__name__)


def _targets(count: int) -> List[Tuple[str, Fraction]]:
    return [(f"u{i + 1}", Fraction(1)) for i in range(count)]


def _seeds(count: int, epsilon: Fraction) -> List[Tuple[str, Fraction]]:
    return [(f"c{i + 1}", epsilon) for i in range(count)]


def counter1(epsilon: Any = Config.DEFAULT_EPSILON, as_printed: bool = False) -> OrModel:
    """
    Spread graph on which the dictatorship ordering is not monotone for player A.

    The edge c2 -> u3 is sometimes drawn with probability 1/4 + ε, which
    would make c2 the first greedy pick. The default uses ε for that edge so the
    greedy run follows the described allocation; `as_printed` keeps 1/4 + ε.
    """
    epsilon = Fraction(epsilon)
    c2_u3 = Fraction(1, 4) + epsilon if as_printed else epsilon
    graph = SpreadGraph(
        _targets(4) + _seeds(3, epsilon),
        [
            ("c1", "u1", 1), ("c1", "u2", 1),
            ("c2", "u1", Fraction(9, 10)), ("c2", "u2", Fraction(9, 10)), ("c2", "u3", c2_u3),
            ("c3", "u4", Fraction(1, 2)),
        ],
    )
    return OrModel(graph, 2, candidates=["c1", "c2", "c3"], name="counter1", epsilon=epsilon)


def counter2(epsilon: Any = Config.DEFAULT_EPSILON) -> OrModel:
    """Spread graph on which round robin is not monotone for player A."""
    epsilon = Fraction(epsilon)
    graph = SpreadGraph(
        _targets(4) + _seeds(4, epsilon),
        [
            ("c1", "u1", 1),
            ("c2", "u1", 1 - 2 * epsilon), ("c2", "u2", epsilon),
            ("c3", "u3", 1),
            ("c4", "u4", 3 * epsilon),
        ],
    )
    return OrModel(graph, 2, candidates=["c1", "c2", "c3", "c4"], name="counter2", epsilon=epsilon)


def counter3(epsilon: Any = Config.DEFAULT_EPSILON) -> OrModel:
    """
    Spread graph on which the uniform random greedy mechanism is not monotone
    for two players. Seed weights are not credited, matching the stated
    expectations exactly.
    """
    epsilon = Fraction(epsilon)
    graph = SpreadGraph(
        _targets(2) + _seeds(5, epsilon),
        [("c1", "u1", epsilon)] + [(f"c{i}", "u2", 1) for i in range(2, 6)],
    )
    return OrModel(
        graph, 2, candidates=[f"c{i}" for i in range(1, 6)], count_seed_weight=False, name="counter3",
        epsilon=epsilon,
    )


def adverse_competition(N: Any = Config.DEFAULT_N) -> TabularModel:
    """
    Two items: u1 is worth 1 to its holder and N to the competitor, u2 is worth 1
    to both players once anyone holds it.
    """
    N = Fraction(N)

    def utilities(sets: Profile) -> List[Fraction]:
        values = []
        for player, own in enumerate(sets):
            other = sets[1 - player]
            value = Fraction(0)
            if 0 in own:
                value += 1
            elif 0 in other:
                value += N
            if 1 in own or 1 in other:
                value += 1
            values.append(value)
        return values

    return TabularModel.from_function(2, 2, utilities, "adverse-competition", ["u1", "u2"])


def disjoint_anonymity(epsilon: Any = Config.DEFAULT_EPSILON, N: Any = Config.DEFAULT_N) -> AdditiveModel:
    """Non-anonymous two-item instance where disjoint greedy is far from optimal."""
    epsilon, N = Fraction(epsilon), Fraction(N)
    return AdditiveModel(
        [[1, 1 + epsilon], [1, N]],
        name="disjoint-anonymity",
        labels=["o1", "o2"],
        disjoint_only=True,
    )


def mei_without_anonymity() -> TabularModel:
    """Adverse competition and MeI hold, anonymity does not."""
    entries: Dict[Profile, Tuple[Any, Any]] = {}
    a, b = frozenset({0}), frozenset({1})
    empty, both = frozenset(), frozenset({0, 1})
    entries[(empty, empty)] = (0, 0)
    for x in (a, b):
        entries[(x, empty)] = (2, 0)
        entries[(empty, x)] = (0, 2)
    entries[(both, empty)] = (3, 0)
    entries[(empty, both)] = (0, 3)
    entries[(a, b)] = (Fraction(8, 5), Fraction(7, 5))
    entries[(b, a)] = (Fraction(8, 5), Fraction(7, 5))
    return TabularModel(2, 2, entries, "mei-without-anonymity", ["a", "b"], disjoint_only=True)


def anonymity_without_mei() -> TabularModel:
    """Anonymous, submodular sum, but welfare depends on how items are split."""
    def own_value(own: ElementSet, others: Tuple[ElementSet, ...]) -> Fraction:
        if not own:
            return Fraction(0)
        if any(others):
            return Fraction(3, 4)
        return Fraction(len(own))

    return TabularModel.from_symmetric_function(
        2, 2, own_value, "anonymity-without-mei", ["a", "b"], disjoint_only=True
    )


def three_player_anonymous() -> TabularModel:
    """
    Anonymous three-player model over items x, y, z for which neither MeI nor
    AgI holds. Utilities depend only on the size of the own set and the shape
    of the other players' sets.
    """
    def own_value(own: ElementSet, others: Tuple[ElementSet, ...]) -> Fraction:
        sizes = sorted((len(s) for s in others if s), reverse=True)
        if not own:
            return Fraction(0)
        if len(own) == 3:
            return Fraction(1)
        if len(own) == 2:
            return Fraction(3, 4)
        if not sizes:
            return Fraction(1, 2)
        if sizes == [1]:
            return Fraction(3, 8)
        if sizes == [1, 1]:
            return Fraction(7, 24)
        return Fraction(1, 4)

    return TabularModel.from_symmetric_function(
        3, 3, own_value, "three-player-anonymous", ["x", "y", "z"], disjoint_only=True
    )


def extension_infeasibility() -> TabularModel:
    """Three players, one valuable element c: utility 1 for holding c, else 0."""
    def utilities(sets: Profile) -> List[int]:
        return [1 if 0 in own else 0 for own in sets]

    return TabularModel.from_function(
        3, 3, utilities, "extension-infeasibility", ["c", "z1", "z2"], disjoint_only=True
    )


def symmetric_indifferent_model(sequence: Sequence[Any], players: int = 3) -> SymmetricIndifferentModel:
    """MeI and AgI model with union welfare given by a concave sequence w(0..n)."""
    labels = [f"e{i + 1}" for i in range(len(sequence) - 1)]
    return SymmetricIndifferentModel(sequence, players, labels=labels)


def random_concave_sequence(rng_seed: int, length: int = 6, denominator: int = 12) -> List[Fraction]:
    """
    Seeded concave non-decreasing sequence w(0)=0, w(1), ..., w(length).

    Increments are drawn as integers and sorted in decreasing order.
    """
    rng = np.random.default_rng(rng_seed)
    increments = sorted((int(v) for v in rng.integers(0, 2 * denominator + 1, size=length)), reverse=True)
    sequence = [Fraction(0)]
    for step in increments:
        sequence.append(sequence[-1] + Fraction(step, denominator))
    return sequence


FixtureLoader = Callable[..., WelfareModel]

FIXTURES: Dict[str, Tuple[FixtureLoader, Tuple[str, ...], str]] = {
    "counter1": (counter1, ("epsilon",), "OR graph: dictatorship ordering is not monotone"),
    "counter2": (counter2, ("epsilon",), "OR graph: round robin is not monotone"),
    "counter3": (counter3, ("epsilon",), "OR graph: uniform random greedy is not monotone for k=2"),
    "adverse-competition": (adverse_competition, ("N",), "two items, u1 worth N to the competitor"),
    "extension-infeasibility": (extension_infeasibility, (), "three players, one valuable element"),
    "disjoint-anonymity": (disjoint_anonymity, ("epsilon", "N"), "non-anonymous disjoint instance"),
    "mei-without-anonymity": (mei_without_anonymity, (), "MeI and adverse competition, not anonymous"),
    "anonymity-without-mei": (anonymity_without_mei, (), "anonymous, welfare depends on the split"),
    "three-player-anonymous": (three_player_anonymous, (), "anonymous, neither MeI nor AgI"),
}


def fixture_names() -> List[str]:
    return sorted(FIXTURES)


def load_fixture(name: str, epsilon: Optional[Any] = None, N: Optional[Any] = None) -> WelfareModel:
    """
    Load a bundled fixture by name.

    Args:
        name: Fixture name (see `fixture_names()`)
        epsilon: ε of the fixture, default 1/100
        N: N of the fixture, default 10

    Raises:
        FixtureError: If the name is unknown
    """
    if name not in FIXTURES:
        raise FixtureError(f"unknown fixture {name!r}; expected one of {', '.join(fixture_names())}")
    loader, parameters, _ = FIXTURES[name]
    values = {
        "epsilon": Fraction(epsilon) if epsilon is not None else Config.DEFAULT_EPSILON,
        "N": Fraction(N) if N is not None else Config.DEFAULT_N,
    }
    logger.debug(f"loading fixture {name} with {[(p, str(values[p])) for p in parameters]}")
    return loader(**{parameter: values[parameter] for parameter in parameters})
