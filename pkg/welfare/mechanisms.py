"""
Allocation mechanisms built on the locally greedy allocator.

The two-player mechanism draws a turn sequence from a recursively constructed
table M and runs the locally greedy allocator on it. Under mechanism
indifference a scalar table P over the uniform greedy order does the same job.
For three or more players the uniform random greedy mechanism assigns the
uniform greedy order to players uniformly at random. Fixed orderings are kept
as negative controls.
"""

from abc import ABC, abstractmethod
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union
import logging
import weakref

import numpy as np
from pydantic import BaseModel

from welfare.checks import check_agi, check_mei
from welfare.config import Config
from welfare.exceptions import ConstructionError, PreconditionError
from welfare.greedy import (
    GreedyState, TurnSequence, locally_greedy, uniform_greedy
)
from welfare.model import AllocationProfile, BidProfile, WelfareModel, profile_key
from welfare.types import Profile, RationalField, Utilities

logger = logging.getLogger(__name__)

Point = Tuple[Fraction, Fraction]


# --- Sampling ---

def uniform_draw(rng: np.random.Generator) -> Fraction:
    """A uniform draw in [0, 1) with `Config.SAMPLING_BITS` bits of resolution, as an exact rational."""
    scale = 1 << Config.SAMPLING_BITS
    value = int(rng.integers(0, scale - 1, dtype=np.uint64, endpoint=True))
    return Fraction(value, scale)


# --- Carathéodory pruning ---

def _mean(points: Sequence[Point], weights: Sequence[Fraction]) -> Point:
    return (
        sum((w * p[0] for p, w in zip(points, weights)), Fraction(0)),
        sum((w * p[1] for p, w in zip(points, weights)), Fraction(0)),
    )


def _on_segment(target: Point, first: Point, second: Point) -> Optional[Fraction]:
    """Weight λ of `first` with target = λ·first + (1-λ)·second, if it exists in [0, 1]."""
    dx, dy = first[0] - second[0], first[1] - second[1]
    if dx != 0:
        weight = (target[0] - second[0]) / dx
    elif dy != 0:
        weight = (target[1] - second[1]) / dy
    else:
        return None
    if not 0 <= weight <= 1:
        return None
    if weight * first[0] + (1 - weight) * second[0] != target[0]:
        return None
    if weight * first[1] + (1 - weight) * second[1] != target[1]:
        return None
    return weight


def _barycentric(target: Point, a: Point, b: Point, c: Point) -> Optional[Tuple[Fraction, Fraction, Fraction]]:
    """Solve target = λ1·a + λ2·b + λ3·c with λ summing to 1 by Cramer's rule."""
    det = a[0] * (b[1] - c[1]) - b[0] * (a[1] - c[1]) + c[0] * (a[1] - b[1])
    if det == 0:
        return None
    l1 = (target[0] * (b[1] - c[1]) - b[0] * (target[1] - c[1]) + c[0] * (target[1] - b[1])) / det
    l2 = (a[0] * (target[1] - c[1]) - target[0] * (a[1] - c[1]) + c[0] * (a[1] - target[1])) / det
    l3 = 1 - l1 - l2
    if l1 < 0 or l2 < 0 or l3 < 0:
        return None
    return l1, l2, l3


def caratheodory_prune(points: Sequence[Point], weights: Sequence[Fraction]) -> List[Tuple[int, Fraction]]:
    """
    Replace a convex combination of 2D points by one with at most three points.

    Candidates are tried as singletons, then pairs, then triples, in index
    order; the first whose exact barycentric coordinates are non-negative wins.

    Args:
        points: Points of the combination
        weights: Non-negative weights summing to 1

    Returns:
        (index, weight) pairs with positive weights summing to 1 whose weighted
        mean equals the mean of the input exactly

    Raises:
        ValueError: If the weights are negative or do not sum to 1
    """
    if len(points) != len(weights):
        raise ValueError("points and weights must have the same length")
    if any(w < 0 for w in weights) or sum(weights) != 1:
        raise ValueError("weights must be non-negative and sum to 1")

    target = _mean(points, weights)
    indices = range(len(points))

    for i in indices:
        if points[i] == target:
            return [(i, Fraction(1))]
    for i, j in combinations(indices, 2):
        weight = _on_segment(target, points[i], points[j])
        if weight is not None:
            return [(index, w) for index, w in ((i, weight), (j, 1 - weight)) if w > 0]
    for i, j, k in combinations(indices, 3):
        solution = _barycentric(target, points[i], points[j], points[k])
        if solution is not None:
            return [(index, w) for index, w in zip((i, j, k), solution) if w > 0]

    raise ConstructionError("no three points carry the target", {"target": [str(v) for v in target]})


# --- Order distributions and the two-player table ---

class OrderEntry:
    """A turn sequence with its probability and its cached greedy allocation."""

    __slots__ = ("sequence", "probability", "state", "utilities")

    def __init__(self, sequence: TurnSequence, probability: Fraction, state: GreedyState, utilities: Utilities) -> None:
        self.sequence = sequence
        self.probability = probability
        self.state = state
        self.utilities = utilities

    @property
    def point(self) -> Point:
        return (self.utilities[0], self.utilities[1])

    def __repr__(self) -> str:
        return f"OrderEntry('{self.sequence.letters}', p={self.probability})"


class OrderDistribution:
    """Distribution over at most three turn sequences with exact probabilities."""

    def __init__(self, entries: Sequence[OrderEntry]) -> None:
        self.entries: Tuple[OrderEntry, ...] = tuple(entries)

    @property
    def expected(self) -> Tuple[Fraction, Fraction]:
        w_a = sum((e.probability * e.utilities[0] for e in self.entries), Fraction(0))
        w_b = sum((e.probability * e.utilities[1] for e in self.entries), Fraction(0))
        return w_a, w_b

    @property
    def welfare(self) -> Fraction:
        return sum(self.expected)

    def sample(self, draw: Fraction) -> OrderEntry:
        """Pick the entry whose cumulative probability interval contains `draw`."""
        cumulative = Fraction(0)
        for entry in self.entries:
            cumulative += entry.probability
            if draw < cumulative:
                return entry
        return self.entries[-1]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _alpha_interval(constraints: Iterable[Tuple[Fraction, Fraction]]) -> Optional[Tuple[Fraction, Fraction]]:
    """Intersect [0, 1] with every constraint c·α ≥ d. None when empty."""
    low, high = Fraction(0), Fraction(1)
    for coefficient, bound in constraints:
        if coefficient > 0:
            low = max(low, bound / coefficient)
        elif coefficient < 0:
            high = min(high, bound / coefficient)
        elif bound > 0:
            return None
    if low > high:
        return None
    return low, high


def _minimizing_alpha(interval: Tuple[Fraction, Fraction], w1: Fraction, w0: Fraction) -> Fraction:
    """The endpoint minimizing α·w1 + (1-α)·w0; the smaller α on a tie."""
    low, high = interval
    return high if w1 < w0 else low


def _state_dump(a: int, b: int, **values: Any) -> Dict[str, Any]:
    state: Dict[str, Any] = {"a": a, "b": b}
    for key, value in values.items():
        if isinstance(value, tuple):
            state[key] = [str(v) for v in value]
        else:
            state[key] = str(value)
    return state


class MechanismTable:
    """
    The table M of turn-sequence distributions for two players.

    Entries exist for every budget pair with a + b ≤ max_total. Each entry
    caches the greedy allocations of its sequences, so building the next level
    takes one greedy step per parent entry.
    """

    def __init__(self, model: WelfareModel, max_total: int, disjoint: bool = False) -> None:
        self.model = model
        self.max_total = max_total
        self.disjoint = disjoint or model.disjoint_only
        self.entries: Dict[Tuple[int, int], OrderDistribution] = {}
        self.alphas: Dict[Tuple[int, int], Fraction] = {}

    def __contains__(self, budgets: Tuple[int, int]) -> bool:
        return budgets in self.entries

    def __getitem__(self, budgets: Tuple[int, int]) -> OrderDistribution:
        return self.entries[budgets]

    def w(self, a: int, b: int) -> Tuple[Fraction, Fraction]:
        """Expected utilities (w^A, w^B); zero outside the table's non-negative range."""
        if a < 0 or b < 0:
            return Fraction(0), Fraction(0)
        return self.entries[(a, b)].expected

    def welfare(self, a: int, b: int) -> Fraction:
        return sum(self.w(a, b))

    def delta_b(self, a: int, b: int) -> Fraction:
        """Δ^{⊕B}(a, b) = w(a, b) - w(a, b-1)."""
        return self.welfare(a, b) - self.welfare(a, b - 1)

    def verify(self) -> List[str]:
        """
        Re-check every table invariant with exact arithmetic.

        Returns:
            Descriptions of violated conditions (empty when the table is sound)
        """
        problems: List[str] = []
        for (a, b), distribution in sorted(self.entries.items()):
            total = sum((e.probability for e in distribution), Fraction(0))
            if total != 1:
                problems.append(f"M[{a},{b}]: probabilities sum to {total}")
            if any(not 0 < e.probability <= 1 for e in distribution):
                problems.append(f"M[{a},{b}]: probability outside (0, 1]")
            if len(distribution) > 3:
                problems.append(f"M[{a},{b}]: support of {len(distribution)} sequences")
            for entry in distribution:
                if tuple(self.model.utilities(entry.state.sets)) != tuple(entry.utilities):
                    problems.append(f"M[{a},{b}]: cached utilities of {entry.sequence.letters} are stale")
                if entry.sequence.budgets != (a, b):
                    problems.append(f"M[{a},{b}]: sequence {entry.sequence.letters} has the wrong budgets")

            w_a, w_b = self.w(a, b)
            if a >= 1 and (a - 1, b + 1) in self.entries and w_a < self.w(a - 1, b + 1)[0]:
                problems.append(f"M[{a},{b}]: w^A below w^A({a - 1},{b + 1})")
            if a >= 1 and w_a < self.w(a - 1, b)[0]:
                problems.append(f"M[{a},{b}]: w^A below w^A({a - 1},{b})")
            if b >= 1 and a >= 1 and w_a > self.w(a, b - 1)[0] + self.delta_b(a, b):
                problems.append(f"M[{a},{b}]: w^A above w^A({a},{b - 1}) + Δ")
            if b >= 1 and w_b < self.w(a, b - 1)[1]:
                problems.append(f"M[{a},{b}]: w^B below w^B({a},{b - 1})")
        return problems

    def to_export(self) -> "TableExport":
        rows = []
        for (a, b), distribution in sorted(self.entries.items()):
            w_a, w_b = distribution.expected
            rows.append(TableEntryExport(
                a=a,
                b=b,
                alpha=self.alphas.get((a, b)),
                w_a=w_a,
                w_b=w_b,
                sequences=[
                    SequenceExport(sequence=e.sequence.letters, probability=e.probability, utilities=list(e.utilities))
                    for e in distribution
                ],
            ))
        return TableExport(
            model=self.model.name, kind="M", max_total=self.max_total, disjoint=self.disjoint, entries=rows
        )

    @classmethod
    def from_export(cls, model: WelfareModel, export: "TableExport") -> "MechanismTable":
        """
        Rebuild a table from its export, re-running the greedy allocator on
        every stored sequence.

        Raises:
            ConstructionError: If a stored utility does not re-evaluate exactly
        """
        table = cls(model, export.max_total, export.disjoint)
        for row in export.entries:
            entries = []
            for stored in row.sequences:
                sequence = TurnSequence.parse(stored.sequence)
                state = locally_greedy(model, sequence, table.disjoint)
                utilities = tuple(model.utilities(state.sets))
                if list(utilities) != list(stored.utilities):
                    raise ConstructionError(
                        f"M[{row.a},{row.b}]: sequence {stored.sequence} re-evaluates to other utilities",
                        {"a": row.a, "b": row.b, "sequence": stored.sequence},
                    )
                entries.append(OrderEntry(sequence, stored.probability, state, utilities))
            table.entries[(row.a, row.b)] = OrderDistribution(entries)
            if row.alpha is not None:
                table.alphas[(row.a, row.b)] = row.alpha
        return table

    def __repr__(self) -> str:
        return f"MechanismTable(model='{self.model.name}', max_total={self.max_total}, entries={len(self.entries)})"


def _require_two_players(model: WelfareModel, budget_total: int) -> None:
    if model.player_count != 2:
        raise PreconditionError(f"the table mechanisms serve two players, {model.name} has {model.player_count}")
    if not model.exact:
        raise PreconditionError(f"the table mechanisms need an exact model, {model.name} is sampled")
    if budget_total > model.ground_size:
        raise PreconditionError(f"{model.name}: budgets totalling {budget_total} exceed {model.ground_size} elements")


def _extend_all(model: WelfareModel, distribution: OrderDistribution, player: int, disjoint: bool) -> List[OrderEntry]:
    entries = []
    for entry in distribution:
        state = entry.state.extend(model, player, disjoint)
        entries.append(OrderEntry(
            entry.sequence.extended(player), entry.probability, state, tuple(model.utilities(state.sets))
        ))
    return entries


def construct_distributions(model: WelfareModel, a: int, b: int, disjoint: bool = False) -> MechanismTable:
    """
    Build table M for every budget pair with total at most a + b.

    Entries are filled level by level. M[i, j] mixes M[i-1, j] with an A-turn
    appended (weight α) and M[i, j-1] with a B-turn appended (weight 1 - α),
    where α keeps w^A(i, j) ≥ w^A(i-1, j) and w^B(i, j) ≥ w^B(i, j-1) and
    minimizes w^A(i, j). The mixture is then pruned to at most three sequences.

    Args:
        model: Exact two-player model with adverse competition
        a: Budget of player A
        b: Budget of player B
        disjoint: Use the disjoint locally greedy allocator

    Returns:
        The constructed table

    Raises:
        PreconditionError: If the model is not an exact two-player model or the
            budgets exceed the ground set
        ConstructionError: If an endpoint claim fails or no α is feasible
    """
    total = a + b
    _require_two_players(model, total)
    table = MechanismTable(model, total, disjoint)
    disjoint = table.disjoint

    empty = GreedyState.initial(model)
    table.entries[(0, 0)] = OrderDistribution([
        OrderEntry(TurnSequence((), 2), Fraction(1), empty, tuple(model.utilities(empty.sets)))
    ])

    for level in range(1, total + 1):
        for i in range(level, -1, -1):
            j = level - i
            if j == 0:
                table.entries[(i, 0)] = OrderDistribution(_extend_all(model, table[(i - 1, 0)], 0, disjoint))
                continue
            if i == 0:
                table.entries[(0, j)] = OrderDistribution(_extend_all(model, table[(0, j - 1)], 1, disjoint))
                continue
            _build_entry(table, i, j)

    logger.info(f"built table M for {model.name} up to total {total} ({len(table.entries)} entries)")
    return table


def _build_entry(table: MechanismTable, a: int, b: int) -> None:
    model = table.model
    with_a = _extend_all(model, table[(a - 1, b)], 0, table.disjoint)
    with_b = _extend_all(model, table[(a, b - 1)], 1, table.disjoint)
    w1 = OrderDistribution(with_a).expected
    w0 = OrderDistribution(with_b).expected
    low_a = table.w(a - 1, b)[0]
    low_b = table.w(a, b - 1)[1]

    if w1[0] < low_a or w0[0] > table.w(a, b - 1)[0]:
        raise ConstructionError(
            f"M[{a},{b}]: endpoint utilities break own-monotonicity or adverse competition",
            _state_dump(a, b, W1=w1, W0=w0, low_a=low_a, high_a=table.w(a, b - 1)[0]),
        )

    interval = _alpha_interval([
        (w1[0] - w0[0], low_a - w0[0]),
        (w1[1] - w0[1], low_b - w0[1]),
    ])
    if interval is None:
        raise ConstructionError(
            f"M[{a},{b}]: no α satisfies both monotonicity constraints",
            _state_dump(a, b, W1=w1, W0=w0, low_a=low_a, low_b=low_b),
        )
    alpha = _minimizing_alpha(interval, w1[0], w0[0])

    mixture = [OrderEntry(e.sequence, alpha * e.probability, e.state, e.utilities) for e in with_a]
    mixture += [OrderEntry(e.sequence, (1 - alpha) * e.probability, e.state, e.utilities) for e in with_b]
    mixture = [e for e in mixture if e.probability > 0]
    kept = caratheodory_prune([e.point for e in mixture], [e.probability for e in mixture])
    entries = [
        OrderEntry(mixture[index].sequence, weight, mixture[index].state, mixture[index].utilities)
        for index, weight in kept
    ]
    table.entries[(a, b)] = OrderDistribution(entries)
    table.alphas[(a, b)] = alpha
    logger.debug(f"M[{a},{b}]: α={alpha}, support {len(entries)} of {len(mixture)}")


# --- Warmup table P under mechanism indifference ---

class ScalarTable:
    """
    The table P of last-element probabilities over a fixed greedy order.

    P[a, b] is the probability that u_{a+b} goes to player A; the rest of the
    order is assigned recursively from P[a-1, b] or P[a, b-1].
    """

    def __init__(self, model: WelfareModel, max_total: int, order: Sequence[int], values: Sequence[Fraction]) -> None:
        self.model = model
        self.max_total = max_total
        self.order: Tuple[int, ...] = tuple(order)
        self.values: Tuple[Fraction, ...] = tuple(values)
        self.probabilities: Dict[Tuple[int, int], Fraction] = {}
        self.partitions: Dict[Tuple[int, int], Dict[FrozenSet[int], Fraction]] = {}
        self._utilities: Dict[Tuple[int, int], Tuple[Fraction, Fraction]] = {}

    def delta(self, total: int) -> Fraction:
        """Δ(t) = w(t) - w(t-1) of the greedy order."""
        return self.values[total] - self.values[total - 1]

    def profile(self, a_positions: FrozenSet[int], total: int) -> Profile:
        own = frozenset(self.order[p] for p in a_positions)
        rest = frozenset(self.order[p] for p in range(total) if p not in a_positions)
        return (own, rest)

    def expected_of(self, partitions: Dict[FrozenSet[int], Fraction], total: int) -> Tuple[Fraction, Fraction]:
        w_a, w_b = Fraction(0), Fraction(0)
        for positions, probability in partitions.items():
            values = self.model.utilities(self.profile(positions, total))
            w_a += probability * values[0]
            w_b += probability * values[1]
        return w_a, w_b

    def w(self, a: int, b: int) -> Tuple[Fraction, Fraction]:
        if a < 0 or b < 0:
            return Fraction(0), Fraction(0)
        return self._utilities[(a, b)]

    def verify(self) -> List[str]:
        """Re-check the table conditions, including the stronger A-endpoint claim."""
        problems: List[str] = []
        for (a, b) in sorted(self._utilities):
            if a + b == 0:
                continue
            w_a, w_b = self.w(a, b)
            p = self.probabilities[(a, b)]
            if not 0 <= p <= 1:
                problems.append(f"P[{a},{b}] = {p} is not a probability")
            if b == 0 and a > 0 and p != 1:
                problems.append(f"P[{a},0] must be 1")
            if a == 0 and b > 0 and p != 0:
                problems.append(f"P[0,{b}] must be 0")
            if a >= 1 and (a - 1, b + 1) in self._utilities and w_a < self.w(a - 1, b + 1)[0]:
                problems.append(f"P[{a},{b}]: w^A below w^A({a - 1},{b + 1})")
            if a >= 1 and w_a < self.w(a - 1, b)[0]:
                problems.append(f"P[{a},{b}]: w^A below w^A({a - 1},{b})")
            if a >= 1 and b >= 1 and w_a > self.w(a, b - 1)[0] + self.delta(a + b):
                problems.append(f"P[{a},{b}]: w^A above w^A({a},{b - 1}) + Δ({a + b})")
            if b >= 1 and w_b < self.w(a, b - 1)[1]:
                problems.append(f"P[{a},{b}]: w^B below w^B({a},{b - 1})")
        return problems

    def to_export(self) -> "TableExport":
        rows = []
        for (a, b), (w_a, w_b) in sorted(self._utilities.items()):
            rows.append(TableEntryExport(a=a, b=b, alpha=self.probabilities.get((a, b)), w_a=w_a, w_b=w_b))
        return TableExport(
            model=self.model.name,
            kind="P",
            max_total=self.max_total,
            disjoint=True,
            order=[self.model.labels[e] for e in self.order],
            entries=rows,
        )

    def __repr__(self) -> str:
        return f"ScalarTable(model='{self.model.name}', max_total={self.max_total})"


def construct_probability_table(
    model: WelfareModel,
    a: int,
    b: int,
    check_indifference: bool = True
) -> ScalarTable:
    """
    Build table P for every budget pair with total at most a + b.

    Args:
        model: Exact two-player model with mechanism indifference
        a: Budget of player A
        b: Budget of player B
        check_indifference: Run the MeI checker first when the ground set is small

    Raises:
        PreconditionError: If the model is not an exact two-player MeI model
        ConstructionError: If an endpoint claim fails or no probability is feasible
    """
    total = a + b
    _require_two_players(model, total)
    if check_indifference and model.ground_size <= Config.MAX_CHECK_GROUND:
        mei = check_mei(model)
        if not mei.passed:
            raise PreconditionError(f"table P needs mechanism indifference: {mei.detail}")

    greedy = uniform_greedy(model, total)
    table = ScalarTable(model, total, greedy.elements, greedy.values)
    table.partitions[(0, 0)] = {frozenset(): Fraction(1)}
    table._utilities[(0, 0)] = table.expected_of(table.partitions[(0, 0)], 0)

    for level in range(1, total + 1):
        last = level - 1
        for i in range(level, -1, -1):
            j = level - i
            with_a = {positions | {last}: p for positions, p in table.partitions.get((i - 1, j), {}).items()}
            with_b = dict(table.partitions.get((i, j - 1), {}))
            if j == 0:
                alpha = Fraction(1)
            elif i == 0:
                alpha = Fraction(0)
            else:
                alpha = _scalar_alpha(table, i, j, with_a, with_b)

            mixed: Dict[FrozenSet[int], Fraction] = {}
            for positions, p in with_a.items():
                if alpha * p:
                    mixed[positions] = mixed.get(positions, Fraction(0)) + alpha * p
            for positions, p in with_b.items():
                if (1 - alpha) * p:
                    mixed[positions] = mixed.get(positions, Fraction(0)) + (1 - alpha) * p
            table.partitions[(i, j)] = mixed
            table.probabilities[(i, j)] = alpha
            table._utilities[(i, j)] = table.expected_of(mixed, level)

    logger.info(f"built table P for {model.name} up to total {total}")
    return table


def _scalar_alpha(
    table: ScalarTable,
    a: int,
    b: int,
    with_a: Dict[FrozenSet[int], Fraction],
    with_b: Dict[FrozenSet[int], Fraction]
) -> Fraction:
    level = a + b
    w1 = table.expected_of(with_a, level)[0]
    w0 = table.expected_of(with_b, level)[0]
    low = table.w(a - 1, b)[0]
    high = table.w(a, b - 1)[0] + table.delta(level)

    if w1 < low + table.delta(level) or w0 > table.w(a, b - 1)[0]:
        raise ConstructionError(
            f"P[{a},{b}]: endpoint utilities break the endpoint claims",
            _state_dump(a, b, W1=w1, W0=w0, low=low, delta=table.delta(level)),
        )
    interval = _alpha_interval([(w1 - w0, low - w0), (w0 - w1, w0 - high)])
    if interval is None:
        raise ConstructionError(f"P[{a},{b}]: empty interval", _state_dump(a, b, W1=w1, W0=w0, low=low, high=high))
    return _minimizing_alpha(interval, w1, w0)


# --- Table export ---

class SequenceExport(BaseModel):
    sequence: str
    probability: RationalField
    utilities: List[RationalField]


class TableEntryExport(BaseModel):
    a: int
    b: int
    alpha: Optional[RationalField] = None
    w_a: RationalField
    w_b: RationalField
    sequences: List[SequenceExport] = []


class TableExport(BaseModel):
    model: str
    kind: str
    max_total: int
    disjoint: bool
    order: Optional[List[str]] = None
    entries: List[TableEntryExport]


# --- Mechanisms ---

class MechanismOutcome(BaseModel):
    """One run of a mechanism: the drawn allocation and its exact utilities."""
    mechanism: str
    model: str
    bids: List[int]
    sets: List[List[int]]
    labels: List[List[str]]
    utilities: List[RationalField]
    welfare: RationalField
    sequence: Optional[str] = None
    disjoint: bool = False
    warnings: List[str] = []

    def allocation(self, ground_size: int) -> AllocationProfile:
        return AllocationProfile(self.sets, ground_size, self.disjoint)


def _outcome(
    mechanism: str,
    model: WelfareModel,
    bids: Sequence[int],
    sets: Profile,
    sequence: Optional[str] = None,
    disjoint: bool = False,
    warnings: Optional[List[str]] = None
) -> MechanismOutcome:
    key = profile_key(sets)
    return MechanismOutcome(
        mechanism=mechanism,
        model=model.name,
        bids=list(bids),
        sets=[list(s) for s in key],
        labels=[[model.labels[e] for e in s] for s in key],
        utilities=list(model.utilities(sets)),
        welfare=model.welfare(sets),
        sequence=sequence,
        disjoint=disjoint,
        warnings=warnings or [],
    )


def _check_bids(model: WelfareModel, bids: Sequence[int], disjoint: bool) -> BidProfile:
    profile = BidProfile(bids)
    if len(profile) != model.player_count:
        raise PreconditionError(f"{model.name}: expected {model.player_count} bids, got {len(profile)}")
    needed = profile.total if disjoint or model.disjoint_only else max(profile, default=0)
    if needed > model.ground_size:
        raise PreconditionError(f"{model.name}: bids {profile.budgets} exceed {model.ground_size} elements")
    return profile


def _by_order(order: Sequence[int], sequence: Sequence[int], player_count: int) -> Profile:
    sets: List[set] = [set() for _ in range(player_count)]
    for element, player in zip(order, sequence):
        sets[player].add(element)
    return tuple(frozenset(s) for s in sets)


class Mechanism(ABC):
    """
    A randomized allocation mechanism mapping declared budgets to allocations.

    `factor` is the guaranteed fraction of the optimum, `disjoint_optimum`
    whether that optimum is taken over disjoint allocations.
    """

    mechanism_id: str = "mechanism"
    factor: Fraction = Fraction(1, 2)
    disjoint_optimum: bool = False

    @abstractmethod
    def expected_utilities(self, model: WelfareModel, bids: Sequence[int]) -> Utilities:
        """Exact expected utility vector over the mechanism's randomness."""

    @abstractmethod
    def run(self, model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
        """Draw one allocation, deterministically for a fixed seed."""

    def bound_factor(self, model: WelfareModel) -> Fraction:
        return self.factor

    def prepare(self, model: WelfareModel, max_total: int) -> None:
        """Build whatever a sweep up to `max_total` needs before the first query."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}('{self.mechanism_id}')"


class TwoPlayerMechanism(Mechanism):
    """Draws a turn sequence from table M and runs the locally greedy allocator on it."""

    def __init__(self, disjoint: bool = False) -> None:
        self.disjoint = disjoint
        self.mechanism_id = "disjoint" if disjoint else "two-player"
        self.factor = Fraction(1, 3) if disjoint else Fraction(1, 2)
        self.disjoint_optimum = disjoint
        self._tables: "weakref.WeakKeyDictionary[WelfareModel, MechanismTable]" = weakref.WeakKeyDictionary()

    def table(self, model: WelfareModel, total: int) -> MechanismTable:
        """The cached table of a model, rebuilt when a larger total is needed."""
        table = self._tables.get(model)
        if table is None or table.max_total < total:
            table = construct_distributions(model, total, 0, self.disjoint)
            self._tables[model] = table
        return table

    def prepare(self, model: WelfareModel, max_total: int) -> None:
        self.table(model, max_total)

    def expected_utilities(self, model: WelfareModel, bids: Sequence[int]) -> Utilities:
        profile = _check_bids(model, bids, self.disjoint)
        a, b = profile.budgets
        return self.table(model, a + b).w(a, b)

    def run(self, model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
        profile = _check_bids(model, bids, self.disjoint)
        a, b = profile.budgets
        return run_two_player(model, a, b, rng_seed, self.disjoint, table=self.table(model, a + b))


def run_two_player(
    model: WelfareModel,
    a: int,
    b: int,
    rng_seed: int = 0,
    disjoint: bool = False,
    table: Optional[MechanismTable] = None
) -> MechanismOutcome:
    """
    Sample a turn sequence from M[a, b] and return its greedy allocation.

    The allocation is taken from the table's cache, which equals a fresh
    locally greedy run on the drawn sequence.
    """
    if table is None:
        table = construct_distributions(model, a, b, disjoint)
    rng = np.random.default_rng(rng_seed)
    entry = table[(a, b)].sample(uniform_draw(rng))
    warnings = []
    if table.disjoint:
        warnings.append("disjoint allocation: the approximation guarantee assumes anonymous players")
    return _outcome(
        "disjoint" if table.disjoint else "two-player",
        model, (a, b), entry.state.sets, entry.sequence.letters, table.disjoint, warnings,
    )


class CoveringMechanism(Mechanism):
    """Assigns the uniform greedy order backwards with the probabilities of table P."""

    mechanism_id = "covering"
    factor = Config.ONE_MINUS_INV_E_LOWER

    def __init__(self) -> None:
        self._tables: "weakref.WeakKeyDictionary[WelfareModel, ScalarTable]" = weakref.WeakKeyDictionary()

    def table(self, model: WelfareModel, total: int) -> ScalarTable:
        table = self._tables.get(model)
        if table is None or table.max_total < total:
            table = construct_probability_table(model, total, 0)
            self._tables[model] = table
        return table

    def prepare(self, model: WelfareModel, max_total: int) -> None:
        self.table(model, max_total)

    def expected_utilities(self, model: WelfareModel, bids: Sequence[int]) -> Utilities:
        a, b = _check_bids(model, bids, True).budgets
        return self.table(model, a + b).w(a, b)

    def run(self, model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
        a, b = _check_bids(model, bids, True).budgets
        return run_covering(model, a, b, rng_seed, table=self.table(model, a + b))


def run_covering(
    model: WelfareModel,
    a: int,
    b: int,
    rng_seed: int = 0,
    table: Optional[ScalarTable] = None
) -> MechanismOutcome:
    """Assign u_{a+b}, ..., u_1 in turn, each to A with probability P[i, j]."""
    if table is None:
        table = construct_probability_table(model, a, b)
    rng = np.random.default_rng(rng_seed)
    i, j = a, b
    positions = set()
    turns = []
    while i + j > 0:
        if uniform_draw(rng) < table.probabilities[(i, j)]:
            positions.add(i + j - 1)
            turns.append(0)
            i -= 1
        else:
            turns.append(1)
            j -= 1
    sets = table.profile(frozenset(positions), a + b)
    sequence = TurnSequence(reversed(turns), 2).letters
    return _outcome("covering", model, (a, b), sets, sequence, True)


class UniformRandomMechanism(Mechanism):
    """
    Assigns the uniform greedy order u_1..u_t to players by a uniformly random
    budget-respecting sequence.
    """

    mechanism_id = "uniform"
    factor = Config.ONE_MINUS_INV_E_LOWER
    disjoint_optimum = True

    def expected_utilities(self, model: WelfareModel, bids: Sequence[int]) -> Utilities:
        return uniform_expected_utilities(model, bids)

    def run(self, model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
        return run_uniform_random(model, bids, rng_seed)


def _uniform_warnings(model: WelfareModel) -> List[str]:
    if model.player_count == 2:
        logger.warning(f"{model.name}: the uniform random mechanism is not strategyproof for two players")
        return ["not strategyproof for k=2"]
    return []


def run_uniform_random(model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
    """Draw a uniformly random turn sequence and assign the uniform greedy order along it."""
    profile = _check_bids(model, bids, True)
    greedy = uniform_greedy(model, profile.total)
    rng = np.random.default_rng(rng_seed)
    base = [player for player, budget in enumerate(profile) for _ in range(budget)]
    sequence = [int(p) for p in rng.permutation(base)] if base else []
    sets = _by_order(greedy.elements, sequence, model.player_count)
    return _outcome(
        "uniform", model, profile.budgets, sets,
        TurnSequence(sequence, model.player_count).letters, True, _uniform_warnings(model),
    )


def uniform_expected_utilities(
    model: WelfareModel,
    bids: Sequence[int],
    closed_form: bool = False,
    cap: int = Config.ENUMERATION_CAP
) -> Utilities:
    """
    Exact expected utilities of the uniform random mechanism.

    By default every distinct turn sequence is enumerated (each is equally
    likely). With `closed_form` the result is b_i/t · w(t), which requires MeI
    and AgI; both are checked first.

    Raises:
        EnumerationCapExceeded: If there are more sequences than `cap`
        PreconditionError: If `closed_form` is requested for a model failing MeI or AgI
    """
    profile = _check_bids(model, bids, True)
    greedy = uniform_greedy(model, profile.total)
    if profile.total == 0:
        return tuple(Fraction(0) for _ in profile)

    if closed_form:
        for result in (check_mei(model, disjoint=True), check_agi(model, disjoint=True)):
            if not result.passed:
                raise PreconditionError(f"closed form needs MeI and AgI: {result.detail}")
        w_t = greedy.values[-1]
        return tuple(Fraction(budget, profile.total) * w_t for budget in profile)

    sequences = TurnSequence.all_for(profile.budgets, cap)
    totals = [Fraction(0)] * model.player_count
    for sequence in sequences:
        values = model.utilities(_by_order(greedy.elements, sequence, model.player_count))
        for player, value in enumerate(values):
            totals[player] += value
    return tuple(total / len(sequences) for total in totals)


class DisjointUniformMechanism(Mechanism):
    """
    Disjoint locally greedy allocator driven by a uniformly random turn
    sequence; the disjoint mechanism for three or more players.
    """

    mechanism_id = "disjoint"
    disjoint_optimum = True

    def bound_factor(self, model: WelfareModel) -> Fraction:
        return Fraction(1, model.player_count + 1)

    def expected_utilities(self, model: WelfareModel, bids: Sequence[int]) -> Utilities:
        profile = _check_bids(model, bids, True)
        sequences = TurnSequence.all_for(profile.budgets)
        totals = [Fraction(0)] * model.player_count
        for sequence in sequences:
            state = locally_greedy(model, sequence, disjoint=True)
            for player, value in enumerate(model.utilities(state.sets)):
                totals[player] += value
        return tuple(total / len(sequences) for total in totals)

    def run(self, model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
        profile = _check_bids(model, bids, True)
        rng = np.random.default_rng(rng_seed)
        base = [player for player, budget in enumerate(profile) for _ in range(budget)]
        sequence = TurnSequence([int(p) for p in rng.permutation(base)] if base else [], model.player_count)
        state = locally_greedy(model, sequence, disjoint=True)
        return _outcome("disjoint", model, profile.budgets, state.sets, sequence.letters, True)


class DisjointMechanism(Mechanism):
    """Table M with the disjoint allocator for two players, uniform sequences beyond."""

    mechanism_id = "disjoint"
    disjoint_optimum = True

    def __init__(self) -> None:
        self._two_player = TwoPlayerMechanism(disjoint=True)
        self._uniform = DisjointUniformMechanism()

    def _delegate(self, model: WelfareModel) -> Mechanism:
        return self._two_player if model.player_count == 2 else self._uniform

    def bound_factor(self, model: WelfareModel) -> Fraction:
        return Fraction(1, model.player_count + 1)

    def prepare(self, model: WelfareModel, max_total: int) -> None:
        self._delegate(model).prepare(model, max_total)

    def expected_utilities(self, model: WelfareModel, bids: Sequence[int]) -> Utilities:
        return self._delegate(model).expected_utilities(model, bids)

    def run(self, model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
        return self._delegate(model).run(model, bids, rng_seed)


class OrderingPolicy(Enum):
    DICTATORSHIP = "dictatorship"
    ROUND_ROBIN = "round-robin"
    LARGEST_REMAINING = "largest-remaining"
    SMALLEST_REMAINING = "smallest-remaining"


def ordering_sequence(policy: OrderingPolicy, bids: Sequence[int]) -> TurnSequence:
    """
    The deterministic turn sequence of a fixed ordering policy.

    Ties go to the lowest player index (player A).
    """
    remaining = list(bids)
    turns: List[int] = []
    k = len(remaining)
    if policy is OrderingPolicy.DICTATORSHIP:
        turns = [player for player in range(k) for _ in range(remaining[player])]
    elif policy is OrderingPolicy.ROUND_ROBIN:
        player = 0
        while any(remaining):
            if remaining[player]:
                turns.append(player)
                remaining[player] -= 1
            player = (player + 1) % k
    else:
        while any(remaining):
            active = [p for p in range(k) if remaining[p]]
            if policy is OrderingPolicy.LARGEST_REMAINING:
                player = max(active, key=lambda p: (remaining[p], -p))
            else:
                player = min(active, key=lambda p: (remaining[p], p))
            turns.append(player)
            remaining[player] -= 1
    return TurnSequence(turns, k)


class FixedOrderingMechanism(Mechanism):
    """Locally greedy allocation along a deterministic ordering policy."""

    def __init__(self, policy: OrderingPolicy) -> None:
        self.policy = policy
        self.mechanism_id = policy.value

    def expected_utilities(self, model: WelfareModel, bids: Sequence[int]) -> Utilities:
        _check_bids(model, bids, False)
        state = locally_greedy(model, ordering_sequence(self.policy, bids))
        return tuple(model.utilities(state.sets))

    def run(self, model: WelfareModel, bids: Sequence[int], rng_seed: int = 0) -> MechanismOutcome:
        profile = _check_bids(model, bids, False)
        sequence = ordering_sequence(self.policy, profile.budgets)
        state = locally_greedy(model, sequence)
        return _outcome(self.mechanism_id, model, profile.budgets, state.sets, sequence.letters)


def fixed_ordering_mechanism(policy: Union[str, OrderingPolicy]) -> FixedOrderingMechanism:
    """Wrap the locally greedy allocator with a named ordering policy."""
    return FixedOrderingMechanism(OrderingPolicy(policy))


MECHANISM_IDS = (
    "two-player", "disjoint", "covering", "uniform",
    "dictatorship", "round-robin", "largest-remaining", "smallest-remaining",
)


def get_mechanism(mechanism_id: str) -> Mechanism:
    """
    Look up a mechanism by id.

    Raises:
        ValueError: If the id is unknown
    """
    if mechanism_id == "two-player":
        return TwoPlayerMechanism()
    if mechanism_id == "disjoint":
        return DisjointMechanism()
    if mechanism_id == "covering":
        return CoveringMechanism()
    if mechanism_id == "uniform":
        return UniformRandomMechanism()
    try:
        return fixed_ordering_mechanism(mechanism_id)
    except ValueError:
        raise ValueError(f"unknown mechanism {mechanism_id!r}; expected one of {', '.join(MECHANISM_IDS)}") from None


def expected_utilities(mechanism: Union[str, Mechanism], model: WelfareModel, bids: Sequence[int]) -> Utilities:
    """Exact expected utility vector of a mechanism at a bid profile."""
    if isinstance(mechanism, str):
        mechanism = get_mechanism(mechanism)
    return mechanism.expected_utilities(model, bids)
