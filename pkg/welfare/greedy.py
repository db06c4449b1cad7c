from fractions import Fraction
from itertools import combinations
from math import comb, factorial
from typing import Any, Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple
import logging
import string

import numpy as np
from pydantic import BaseModel

from welfare.checks import check_anonymity
from welfare.config import Config
from welfare.exceptions import EnumerationCapExceeded, PreconditionError
from welfare.model import AllocationProfile, BidProfile, WelfareModel, format_utilities, profile_key
from welfare.types import Profile, RationalField, Value

logger = logging.getLogger(__name__)

LETTERS = string.ascii_uppercase


class TurnSequence:
    """
    A word over player indices prescribing the order of greedy allocations.

    Player i appears exactly b_i times for the bid profile it serves.
    """

    __slots__ = ("turns", "player_count")

    def __init__(self, turns: Iterable[int], player_count: int = 2) -> None:
        self.turns: Tuple[int, ...] = tuple(int(t) for t in turns)
        self.player_count = player_count
        for turn in self.turns:
            if not 0 <= turn < player_count:
                raise ValueError(f"turn {turn} is not a player index below {player_count}")

    @classmethod
    def parse(cls, text: str, player_count: int = 2) -> "TurnSequence":
        """Parse a letter word such as "ABAB"."""
        try:
            return cls([LETTERS.index(letter) for letter in text.strip().upper()], player_count)
        except ValueError:
            raise ValueError(f"not a turn sequence over {LETTERS[:player_count]}: {text!r}") from None

    @classmethod
    def all_for(cls, bids: Sequence[int], cap: Optional[int] = Config.ENUMERATION_CAP) -> List["TurnSequence"]:
        """
        Every distinct sequence for a bid profile, in lexicographic order.

        Raises:
            EnumerationCapExceeded: If there are more sequences than `cap`
        """
        budgets = list(bids)
        count = sequence_count(budgets)
        if cap is not None and count > cap:
            raise EnumerationCapExceeded("turn sequences", count, cap)

        k = len(budgets)
        found: List[TurnSequence] = []
        prefix: List[int] = []

        def extend(remaining: List[int]) -> None:
            if not any(remaining):
                found.append(cls(prefix, k))
                return
            for player in range(k):
                if remaining[player]:
                    remaining[player] -= 1
                    prefix.append(player)
                    extend(remaining)
                    prefix.pop()
                    remaining[player] += 1

        extend(budgets)
        return found

    @property
    def budgets(self) -> BidProfile:
        counts = [0] * self.player_count
        for turn in self.turns:
            counts[turn] += 1
        return BidProfile(counts)

    @property
    def letters(self) -> str:
        return "".join(LETTERS[turn] for turn in self.turns)

    def extended(self, player: int) -> "TurnSequence":
        return TurnSequence(self.turns + (player,), self.player_count)

    def prefix(self, length: int) -> "TurnSequence":
        return TurnSequence(self.turns[:length], self.player_count)

    def __len__(self) -> int:
        return len(self.turns)

    def __iter__(self) -> Iterator[int]:
        return iter(self.turns)

    def __getitem__(self, index: int) -> int:
        return self.turns[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TurnSequence):
            return NotImplemented
        return self.turns == other.turns and self.player_count == other.player_count

    def __hash__(self) -> int:
        return hash((self.turns, self.player_count))

    def __str__(self) -> str:
        return self.letters

    def __repr__(self) -> str:
        return f"TurnSequence('{self.letters}')"


def sequence_count(bids: Sequence[int]) -> int:
    """Number of distinct turn sequences for a bid profile (a multinomial)."""
    count = factorial(sum(bids))
    for budget in bids:
        count //= factorial(budget)
    return count


class GreedyState:
    """
    Immutable partial allocation of the locally greedy algorithm.

    `trace` holds the marginal welfare gain of every step and `picks` the
    (player, element) pairs in allocation order.
    """

    __slots__ = ("sets", "trace", "picks", "welfare", "ground_size")

    def __init__(
        self,
        sets: Profile,
        trace: Tuple[Value, ...] = (),
        picks: Tuple[Tuple[int, int], ...] = (),
        welfare: Value = Fraction(0),
        ground_size: int = 0
    ) -> None:
        self.sets = sets
        self.trace = trace
        self.picks = picks
        self.welfare = welfare
        self.ground_size = ground_size

    @classmethod
    def initial(cls, model: WelfareModel) -> "GreedyState":
        sets = model.empty_profile()
        return cls(sets, welfare=model.welfare(sets), ground_size=model.ground_size)

    def candidates(self, model: WelfareModel, player: int, disjoint: bool) -> List[int]:
        if disjoint:
            taken = frozenset().union(*self.sets)
        else:
            taken = self.sets[player]
        return [element for element in model.elements if element not in taken]

    def extend(self, model: WelfareModel, player: int, disjoint: bool = False) -> "GreedyState":
        """
        Perform one myopic step: give `player` the element of largest marginal
        welfare gain, the lowest id among ties.

        Raises:
            PreconditionError: If no element is left for the player
        """
        best_element: Optional[int] = None
        best_gain: Optional[Value] = None
        best_sets: Optional[Profile] = None
        for element in self.candidates(model, player, disjoint):
            sets = list(self.sets)
            sets[player] = sets[player] | {element}
            candidate = tuple(sets)
            gain = model.welfare(candidate) - self.welfare
            if best_gain is None or gain > best_gain:
                best_element, best_gain, best_sets = element, gain, candidate

        if best_sets is None:
            raise PreconditionError(f"{model.name}: no element left for player {player}")
        logger.debug(f"{model.name}: player {player} takes {model.labels[best_element]} (gain {best_gain})")
        return GreedyState(
            best_sets,
            self.trace + (best_gain,),
            self.picks + ((player, best_element),),
            self.welfare + best_gain,
            self.ground_size,
        )

    @property
    def allocation(self) -> AllocationProfile:
        return AllocationProfile(self.sets, self.ground_size)

    def to_dict(self, labels: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "sets": [list(s) for s in profile_key(self.sets)],
            "welfare": format_utilities([self.welfare])[0],
            "trace": format_utilities(self.trace),
        }
        if labels is not None:
            data["labels"] = [[labels[e] for e in s] for s in profile_key(self.sets)]
        return data

    def __repr__(self) -> str:
        return f"GreedyState(sets={profile_key(self.sets)}, welfare={self.welfare})"


def locally_greedy(
    model: WelfareModel,
    sequence: Iterable[int],
    disjoint: bool = False,
    state: Optional[GreedyState] = None
) -> GreedyState:
    """
    Run the locally greedy allocator along a turn sequence.

    Args:
        model: Welfare oracle
        sequence: Player index of each turn
        disjoint: Exclude elements held by other players from the candidates
        state: Partial state to continue from (default: the empty allocation)

    Returns:
        Final state with the allocation and the per-step gain trace

    Raises:
        PreconditionError: If the sequence is longer than the ground set allows
    """
    current = state if state is not None else GreedyState.initial(model)
    for player in sequence:
        current = current.extend(model, player, disjoint or model.disjoint_only)
    return current


class UniformGreedyResult(NamedTuple):
    elements: Tuple[int, ...]
    values: Tuple[Value, ...]


def uniform_greedy(model: WelfareModel, total_budget: int) -> UniformGreedyResult:
    """
    Greedy maximization of the union welfare under a cardinality constraint.

    Returns the picked elements u_1..u_t and the welfare values w(0..t).

    Raises:
        PreconditionError: If the budget exceeds the ground set
    """
    if total_budget > model.ground_size:
        raise PreconditionError(f"{model.name}: cannot pick {total_budget} of {model.ground_size} elements")
    chosen: List[int] = []
    values: List[Value] = [model.union_welfare(())]
    for _ in range(total_budget):
        best: Optional[Tuple[Value, int]] = None
        for element in model.elements:
            if element in chosen:
                continue
            value = model.union_welfare(chosen + [element])
            if best is None or value > best[0]:
                best = (value, element)
        chosen.append(best[1])
        values.append(best[0])
    return UniformGreedyResult(tuple(chosen), tuple(values))


def is_concave_nondecreasing(values: Sequence[Value]) -> bool:
    """w(j) - w(j-1) >= w(j+1) - w(j) >= 0 for every j."""
    steps = [b - a for a, b in zip(values, values[1:])]
    return all(step >= 0 for step in steps) and all(a >= b for a, b in zip(steps, steps[1:]))


def count_profiles(ground_size: int, bids: Sequence[int], disjoint: bool) -> int:
    if disjoint:
        remaining, count = ground_size, 1
        for budget in bids:
            count *= comb(remaining, budget)
            remaining -= budget
        return count
    count = 1
    for budget in bids:
        count *= comb(ground_size, budget)
    return count


def _profiles_with_budgets(ground_size: int, bids: Sequence[int], disjoint: bool) -> Iterator[Profile]:
    def assign(player: int, available: Tuple[int, ...], sets: Tuple[frozenset, ...]) -> Iterator[Profile]:
        if player == len(bids):
            yield sets
            return
        for chosen in combinations(available, bids[player]):
            rest = tuple(e for e in available if e not in chosen) if disjoint else available
            yield from assign(player + 1, rest, sets + (frozenset(chosen),))

    yield from assign(0, tuple(range(ground_size)), ())


def brute_force_opt(
    model: WelfareModel,
    bids: Sequence[int],
    disjoint: bool = False,
    cap: int = Config.BRUTE_FORCE_CAP
) -> Tuple[AllocationProfile, Value]:
    """
    Exact optimum of f over all profiles with |S_i| = b_i.

    Raises:
        PreconditionError: If the budgets do not fit the ground set
        EnumerationCapExceeded: If there are more candidate profiles than `cap`
    """
    disjoint = disjoint or model.disjoint_only
    bids = tuple(bids)
    if len(bids) != model.player_count:
        raise PreconditionError(f"{model.name}: expected {model.player_count} bids, got {len(bids)}")
    if (sum(bids) if disjoint else max(bids, default=0)) > model.ground_size:
        raise PreconditionError(f"{model.name}: bids {bids} do not fit {model.ground_size} elements")
    count = count_profiles(model.ground_size, bids, disjoint)
    if count > cap:
        raise EnumerationCapExceeded(f"optimum of {model.name} at {bids}", count, cap)

    best_sets: Optional[Profile] = None
    best_value: Optional[Value] = None
    for sets in _profiles_with_budgets(model.ground_size, bids, disjoint):
        value = model.welfare(sets)
        if best_value is None or value > best_value:
            best_sets, best_value = sets, value
    return AllocationProfile(best_sets, model.ground_size, disjoint), best_value


class SequenceBound(BaseModel):
    sequence: str
    welfare: RationalField
    ratio: Optional[RationalField] = None
    bound_holds: bool
    chain: List[RationalField]
    chain_holds: bool


class DisjointBoundReport(BaseModel):
    model: str
    bids: List[int]
    optimum: RationalField
    optimum_profile: List[List[int]]
    factor: int
    exhaustive: bool
    sequences: List[SequenceBound]
    bound_holds: bool
    chain_bound_holds: bool


def _ratio(optimum: Fraction, welfare: Fraction) -> Optional[Fraction]:
    if welfare == 0:
        return Fraction(1) if optimum == 0 else None
    return optimum / welfare


def _with(sets: Profile, player: int, element: int) -> Profile:
    extended = list(sets)
    extended[player] = extended[player] | {element}
    return tuple(extended)


def disjoint_chain(model: WelfareModel, optimum: Profile, state: GreedyState) -> List[Fraction]:
    """
    Evaluate the chain bounding w(O^0) by 2·w(I) for one greedy run.

    O^0_i is the part of O_i not allocated to other players by the greedy run and
    O'_i = O^0_i minus I_i. With e_i the step of player i with the smallest gain,
    and S^{e_i} the partial allocation before it, the stages are
    w(O^0); w(I) + Σ ρ_e(I); w(I) + Σ ρ_e(S^{e_i}); w(I) + Σ |O'_i| ρ_{e_i};
    w(I) + Σ b_i ρ_{e_i}; 2·w(I). Each stage is at most the next.
    """
    k = model.player_count
    final = state.sets
    welfare = state.welfare
    o_zero = tuple(
        optimum[i] - frozenset().union(*(final[j] for j in range(k) if j != i))
        for i in range(k)
    )
    o_prime = tuple(o_zero[i] - final[i] for i in range(k))

    # the state before each step, and the player's smallest-gain step
    partial = [model.empty_profile()]
    for player, element in state.picks:
        partial.append(_with(partial[-1], player, element))
    smallest: Dict[int, int] = {}
    for step, (player, _) in enumerate(state.picks):
        if player not in smallest or state.trace[step] < state.trace[smallest[player]]:
            smallest[player] = step

    def rho(sets: Profile, player: int, element: int) -> Fraction:
        return model.welfare(_with(sets, player, element)) - model.welfare(sets)

    first = welfare + sum((rho(final, i, e) for i in range(k) for e in o_prime[i]), Fraction(0))
    second = welfare
    third = welfare
    fourth = welfare
    for i in range(k):
        if i not in smallest:
            continue
        step = smallest[i]
        before = partial[step]
        second += sum((rho(before, i, e) for e in o_prime[i]), Fraction(0))
        third += len(o_prime[i]) * state.trace[step]
        fourth += len(optimum[i]) * state.trace[step]
    return [model.welfare(o_zero), first, second, third, fourth, 2 * welfare]


def verify_disjoint_bound(
    model: WelfareModel,
    bids: Sequence[int],
    sequences: Optional[Sequence[TurnSequence]] = None,
    rng_seed: int = 0,
    require_anonymity: bool = True,
    max_ground: int = Config.MAX_CHECK_GROUND
) -> DisjointBoundReport:
    """
    Check the (k+1) bound of the disjoint locally greedy allocator against the
    exact disjoint optimum, together with the chain bounding w(O^0) by 2·w(I).

    All turn sequences are checked when there are at most
    `Config.DISJOINT_SEQUENCE_SAMPLES` of them; otherwise that many are drawn
    with a seeded generator.

    Raises:
        PreconditionError: If the players are not anonymous, or the ground set is
            above `max_ground` so anonymity cannot be checked
    """
    if require_anonymity:
        anonymity = check_anonymity(model, max_ground, disjoint=True)
        if not anonymity.passed:
            raise PreconditionError(f"{model.name} is not anonymous: {anonymity.detail}")

    bids = tuple(bids)
    optimum_profile, optimum = brute_force_opt(model, bids, disjoint=True)
    factor = model.player_count + 1

    exhaustive = sequences is None and sequence_count(bids) <= Config.DISJOINT_SEQUENCE_SAMPLES
    if sequences is None:
        if exhaustive:
            sequences = TurnSequence.all_for(bids)
        else:
            rng = np.random.default_rng(rng_seed)
            base = [player for player, budget in enumerate(bids) for _ in range(budget)]
            sequences = [
                TurnSequence(rng.permutation(base).tolist(), model.player_count)
                for _ in range(Config.DISJOINT_SEQUENCE_SAMPLES)
            ]

    records: List[SequenceBound] = []
    for sequence in sequences:
        state = locally_greedy(model, sequence, disjoint=True)
        chain = disjoint_chain(model, optimum_profile.sets, state)
        chain_holds = all(a <= b for a, b in zip(chain, chain[1:]))
        records.append(SequenceBound(
            sequence=sequence.letters,
            welfare=state.welfare,
            ratio=_ratio(optimum, state.welfare),
            bound_holds=optimum <= factor * state.welfare,
            chain=chain,
            chain_holds=chain_holds,
        ))
        if not chain_holds:
            logger.warning(f"{model.name}: chain broken for {sequence.letters}: {[str(c) for c in chain]}")

    return DisjointBoundReport(
        model=model.name,
        bids=list(bids),
        optimum=optimum,
        optimum_profile=[list(s) for s in optimum_profile.key],
        factor=factor,
        exhaustive=exhaustive,
        sequences=records,
        bound_holds=all(r.bound_holds for r in records),
        chain_bound_holds=all(r.chain[0] <= r.chain[-1] for r in records),
    )
