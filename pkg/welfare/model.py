from abc import ABC, abstractmethod
from fractions import Fraction
from itertools import product
from typing import (
    Any, Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union
)
import logging

from welfare.exceptions import ModelError, PreconditionError
from welfare.types import ElementSet, Profile, ProfileKey, Utilities, Value, format_rational

logger = logging.getLogger(__name__)


class AllocationProfile:
    """
    An allocation (S_1, ..., S_k) of ground-set element ids to k players.

    Sets are stored as frozensets, so two profiles holding the same elements
    compare and hash equal regardless of the order the ids were given in.
    """

    __slots__ = ("sets", "ground_size", "disjoint")

    def __init__(self, sets: Iterable[Iterable[int]], ground_size: int, disjoint: bool = False) -> None:
        """
        Initialize an allocation profile.

        Args:
            sets: One iterable of element ids per player
            ground_size: Number of elements in the ground set
            disjoint: Whether the profile must be pairwise disjoint

        Raises:
            ModelError: If an id is out of range or a disjoint profile overlaps
        """
        self.sets: Profile = tuple(frozenset(int(e) for e in s) for s in sets)
        self.ground_size = ground_size
        self.disjoint = disjoint

        for player, items in enumerate(self.sets):
            for element in items:
                if not 0 <= element < ground_size:
                    raise ModelError(
                        f"element {element} of player {player} is outside the ground set of size {ground_size}"
                    )
        if disjoint and not is_disjoint(self.sets):
            raise ModelError(f"profile {profile_key(self.sets)} is marked disjoint but its sets overlap")

    @classmethod
    def empty(cls, player_count: int, ground_size: int, disjoint: bool = False) -> "AllocationProfile":
        return cls([()] * player_count, ground_size, disjoint)

    @property
    def player_count(self) -> int:
        return len(self.sets)

    @property
    def union(self) -> ElementSet:
        return frozenset().union(*self.sets)

    @property
    def key(self) -> ProfileKey:
        return profile_key(self.sets)

    def with_element(self, player: int, element: int) -> "AllocationProfile":
        """Return a copy with one element added to one player's set."""
        sets = list(self.sets)
        sets[player] = sets[player] | {element}
        return AllocationProfile(sets, self.ground_size, self.disjoint)

    def to_dict(self, labels: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        data: Dict[str, Any] = {"sets": [list(s) for s in self.key]}
        if labels is not None:
            data["labels"] = [[labels[e] for e in s] for s in self.key]
        return data

    def __iter__(self) -> Iterator[ElementSet]:
        return iter(self.sets)

    def __len__(self) -> int:
        return len(self.sets)

    def __getitem__(self, player: int) -> ElementSet:
        return self.sets[player]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, AllocationProfile):
            return self.sets == other.sets
        if isinstance(other, tuple):
            return self.sets == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.sets)

    def __repr__(self) -> str:
        return f"AllocationProfile({self.key})"


class BidProfile:
    """Declared budgets (b_1, ..., b_k), one non-negative integer per player."""

    __slots__ = ("budgets",)

    def __init__(self, budgets: Iterable[int], ground_size: Optional[int] = None) -> None:
        """
        Initialize a bid profile.

        Args:
            budgets: One budget per player
            ground_size: If given, the budgets must fit into a ground set of this size

        Raises:
            ValueError: If a budget is negative or not an integer
            PreconditionError: If the budgets exceed the ground set
        """
        values = tuple(budgets)
        for value in values:
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValueError(f"budgets must be non-negative integers, got {value!r}")
        self.budgets: Tuple[int, ...] = values
        if ground_size is not None and self.total > ground_size:
            raise PreconditionError(
                f"budgets {self.budgets} total {self.total} but the ground set has {ground_size} elements"
            )

    @classmethod
    def parse(cls, text: str, ground_size: Optional[int] = None) -> "BidProfile":
        """Parse "a,b[,c...]"."""
        try:
            values = [int(part) for part in text.split(",") if part.strip()]
        except ValueError as exc:
            raise ValueError(f"bids must be comma-separated integers, got {text!r}") from exc
        if not values:
            raise ValueError("bids must name at least one budget")
        return cls(values, ground_size)

    @property
    def total(self) -> int:
        return sum(self.budgets)

    @property
    def player_count(self) -> int:
        return len(self.budgets)

    def incremented(self, player: int) -> "BidProfile":
        values = list(self.budgets)
        values[player] += 1
        return BidProfile(values)

    def __iter__(self) -> Iterator[int]:
        return iter(self.budgets)

    def __len__(self) -> int:
        return len(self.budgets)

    def __getitem__(self, player: int) -> int:
        return self.budgets[player]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, BidProfile):
            return self.budgets == other.budgets
        if isinstance(other, tuple):
            return self.budgets == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.budgets)

    def __repr__(self) -> str:
        return f"BidProfile{self.budgets}"

    def __str__(self) -> str:
        return ",".join(str(b) for b in self.budgets)


ProfileLike = Union[AllocationProfile, Sequence[Iterable[int]]]


def profile_key(profile: ProfileLike) -> ProfileKey:
    """Canonical, sortable form of a profile: one sorted id tuple per player."""
    return tuple(tuple(sorted(s)) for s in profile)


def is_disjoint(profile: ProfileLike) -> bool:
    seen: set = set()
    for items in profile:
        if seen & set(items):
            return False
        seen |= set(items)
    return True


def enumerate_profiles(
    player_count: int,
    ground_size: int,
    disjoint: bool = False,
    max_set_size: Optional[int] = None
) -> Iterator[Profile]:
    """
    Enumerate every allocation profile over a small ground set.

    Each element is assigned a holder pattern: one of the k players or nobody
    when disjoint, any subset of players otherwise. The enumeration therefore
    visits (k+1)^n or 2^(kn) profiles.

    Args:
        player_count: Number of players k
        ground_size: Number of elements n
        disjoint: Restrict to pairwise disjoint profiles
        max_set_size: Skip profiles where some player holds more elements

    Yields:
        Profiles as tuples of frozensets
    """
    if disjoint:
        patterns: List[Tuple[int, ...]] = [()] + [(player,) for player in range(player_count)]
    else:
        patterns = [
            tuple(p for p in range(player_count) if mask >> p & 1)
            for mask in range(1 << player_count)
        ]

    for assignment in product(patterns, repeat=ground_size):
        sets: List[List[int]] = [[] for _ in range(player_count)]
        for element, holders in enumerate(assignment):
            for player in holders:
                sets[player].append(element)
        if max_set_size is not None and any(len(s) > max_set_size for s in sets):
            continue
        yield tuple(frozenset(s) for s in sets)


class WelfareModel(ABC):
    """
    Oracle answering per-player utilities f_i(S) and total welfare f(S).

    Subclasses implement `_player_utilities`; they may also implement
    `_total_welfare` independently, in which case every welfare query of an
    exact model checks that f(S) equals the sum of the f_i(S). Answers are
    memoized per canonical profile, and a constructed model is read-only.
    """

    def __init__(
        self,
        player_count: int,
        ground_size: int,
        name: str = "model",
        labels: Optional[Sequence[str]] = None,
        exact: bool = True,
        disjoint_only: bool = False
    ) -> None:
        if player_count < 1:
            raise ValueError("a welfare model needs at least one player")
        if ground_size < 0:
            raise ValueError("ground_size must be non-negative")
        if labels is not None and len(labels) != ground_size:
            raise ValueError(f"expected {ground_size} labels, got {len(labels)}")

        self.player_count = player_count
        self.ground_size = ground_size
        self.name = name
        self.labels: Tuple[str, ...] = tuple(labels) if labels is not None else tuple(
            f"e{element}" for element in range(ground_size)
        )
        self.exact = exact
        self.disjoint_only = disjoint_only
        self._cache: Dict[Profile, Tuple[Value, ...]] = {}

    @abstractmethod
    def _player_utilities(self, sets: Profile) -> Tuple[Value, ...]:
        """Compute the utility vector of a validated, canonical profile."""

    def _total_welfare(self, sets: Profile) -> Optional[Value]:
        """Independent computation of f(S), if the model has one."""
        return None

    @property
    def elements(self) -> range:
        return range(self.ground_size)

    def canonical(self, profile: ProfileLike) -> Profile:
        """
        Validate a profile against this model's domain.

        Raises:
            ModelError: On a wrong player count, an unknown element id, or an
                overlapping profile given to a disjoint-only model
        """
        if isinstance(profile, AllocationProfile):
            sets = profile.sets
        else:
            sets = tuple(frozenset(s) for s in profile)
        if len(sets) != self.player_count:
            raise ModelError(
                f"{self.name}: expected {self.player_count} sets, got {len(sets)}"
            )
        for items in sets:
            for element in items:
                if not 0 <= element < self.ground_size:
                    raise ModelError(f"{self.name}: unknown element id {element}")
        if self.disjoint_only and not is_disjoint(sets):
            raise ModelError(f"{self.name}: only disjoint profiles are defined, got {profile_key(sets)}")
        return sets

    def utilities(self, profile: ProfileLike) -> Tuple[Value, ...]:
        """
        Return the utility vector (f_1(S), ..., f_k(S)).

        Raises:
            ModelError: If the profile is outside the domain or a utility is negative
        """
        sets = self.canonical(profile)
        cached = self._cache.get(sets)
        if cached is not None:
            return cached

        values = tuple(self._player_utilities(sets))
        if len(values) != self.player_count:
            raise ModelError(f"{self.name}: oracle returned {len(values)} utilities for {self.player_count} players")
        if self.exact and any(v < 0 for v in values):
            raise ModelError(f"{self.name}: negative utility at {profile_key(sets)}: {values}")
        self._cache[sets] = values
        return values

    def utility(self, profile: ProfileLike, player: int) -> Value:
        return self.utilities(profile)[player]

    def welfare(self, profile: ProfileLike) -> Value:
        """
        Return the social welfare f(S) = sum of f_i(S).

        Raises:
            ModelError: If an independent welfare computation disagrees with the sum
        """
        sets = self.canonical(profile)
        total = sum(self.utilities(sets), Fraction(0) if self.exact else 0.0)
        if self.exact:
            direct = self._total_welfare(sets)
            if direct is not None and direct != total:
                raise ModelError(
                    f"{self.name}: f(S) = {direct} but the utilities sum to {total} at {profile_key(sets)}"
                )
        return total

    def union_welfare(self, elements: Iterable[int]) -> Value:
        """Welfare of the profile giving every listed element to the first player."""
        sets = [frozenset(elements)] + [frozenset()] * (self.player_count - 1)
        return self.welfare(sets)

    def empty_profile(self) -> Profile:
        return tuple(frozenset() for _ in range(self.player_count))

    def describe(self, profile: ProfileLike) -> str:
        """Human-readable profile using element labels, e.g. "({c1}, {c3})"."""
        parts = []
        for items in profile_key(self.canonical(profile)):
            parts.append("{" + ",".join(self.labels[e] for e in items) + "}")
        return "(" + ", ".join(parts) + ")"

    def element_id(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelError(f"{self.name}: unknown element label {label!r}") from None

    def profile_from_labels(self, sets: Sequence[Iterable[str]]) -> Profile:
        return self.canonical([[self.element_id(label) for label in items] for items in sets])

    @property
    def cache_size(self) -> int:
        return len(self._cache)

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(name='{self.name}', players={self.player_count}, "
            f"ground={self.ground_size}, exact={self.exact})"
        )


class TabularModel(WelfareModel):
    """
    A welfare model given by an explicit table of utility vectors.

    Keys are profiles (any iterable of id iterables); lookups canonicalize
    them, so only one entry per profile is stored. Entries are exact
    rationals.
    """

    def __init__(
        self,
        player_count: int,
        ground_size: int,
        entries: Mapping[Any, Sequence[Any]],
        name: str = "tabular",
        labels: Optional[Sequence[str]] = None,
        disjoint_only: bool = False,
        complete: bool = True
    ) -> None:
        """
        Initialize a tabular model.

        Args:
            player_count: Number of players k
            ground_size: Number of elements n
            entries: Map from profile to its utility vector
            name: Model name used in reports
            labels: Display names of the element ids
            disjoint_only: Whether only pairwise-disjoint profiles are defined
            complete: Require an entry for every profile of the domain

        Raises:
            ModelError: On malformed entries or a missing profile when complete
        """
        super().__init__(player_count, ground_size, name, labels, exact=True, disjoint_only=disjoint_only)
        self._table: Dict[Profile, Utilities] = {}
        for raw_profile, raw_values in entries.items():
            sets = self.canonical(raw_profile)
            if len(raw_values) != player_count:
                raise ModelError(f"{name}: entry {profile_key(sets)} has {len(raw_values)} utilities")
            values = tuple(Fraction(v) for v in raw_values)
            if any(v < 0 for v in values):
                raise ModelError(f"{name}: negative utility in entry {profile_key(sets)}")
            self._table[sets] = values

        if complete:
            for sets in enumerate_profiles(player_count, ground_size, disjoint_only):
                if sets not in self._table:
                    raise ModelError(f"{name}: no entry for reachable profile {profile_key(sets)}")

    @classmethod
    def from_function(
        cls,
        player_count: int,
        ground_size: int,
        function: Callable[[Profile], Sequence[Any]],
        name: str = "tabular",
        labels: Optional[Sequence[str]] = None,
        disjoint_only: bool = False
    ) -> "TabularModel":
        """Tabulate `function` over every profile of the domain."""
        entries = {
            sets: function(sets)
            for sets in enumerate_profiles(player_count, ground_size, disjoint_only)
        }
        return cls(player_count, ground_size, entries, name, labels, disjoint_only)

    @classmethod
    def from_symmetric_function(
        cls,
        player_count: int,
        ground_size: int,
        function: Callable[[ElementSet, Tuple[ElementSet, ...]], Any],
        name: str = "symmetric",
        labels: Optional[Sequence[str]] = None,
        disjoint_only: bool = False
    ) -> "TabularModel":
        """
        Tabulate f_i(S) = g(S_i, others) with the other players' sets passed in
        a canonical order, so the resulting players are anonymous.
        """
        def utilities(sets: Profile) -> List[Any]:
            values = []
            for player, own in enumerate(sets):
                others = sorted(
                    (s for index, s in enumerate(sets) if index != player),
                    key=lambda s: (len(s), tuple(sorted(s)))
                )
                values.append(function(own, tuple(others)))
            return values

        return cls.from_function(player_count, ground_size, utilities, name, labels, disjoint_only)

    @property
    def entries(self) -> Dict[Profile, Utilities]:
        return dict(self._table)

    def _player_utilities(self, sets: Profile) -> Utilities:
        try:
            return self._table[sets]
        except KeyError:
            raise ModelError(f"{self.name}: no entry for profile {profile_key(sets)}") from None


class AdditiveModel(WelfareModel):
    """
    Additive utilities: player i values element e at v_i(e).

    An element held by several players is shared equally among them.
    """

    def __init__(
        self,
        values: Sequence[Sequence[Any]],
        name: str = "additive",
        labels: Optional[Sequence[str]] = None,
        disjoint_only: bool = False
    ) -> None:
        rows = [tuple(Fraction(v) for v in row) for row in values]
        if not rows:
            raise ValueError("additive model needs at least one player")
        ground_size = len(rows[0])
        if any(len(row) != ground_size for row in rows):
            raise ValueError("every player must value every element")
        if any(v < 0 for row in rows for v in row):
            raise ModelError(f"{name}: element values must be non-negative")
        super().__init__(len(rows), ground_size, name, labels, exact=True, disjoint_only=disjoint_only)
        self.values: Tuple[Tuple[Fraction, ...], ...] = tuple(rows)

    @classmethod
    def uniform(
        cls,
        values: Sequence[Any],
        player_count: int,
        name: str = "additive",
        labels: Optional[Sequence[str]] = None,
        disjoint_only: bool = False
    ) -> "AdditiveModel":
        """All players value the elements identically."""
        return cls([list(values)] * player_count, name, labels, disjoint_only)

    def _player_utilities(self, sets: Profile) -> Utilities:
        holders: Dict[int, int] = {}
        for items in sets:
            for element in items:
                holders[element] = holders.get(element, 0) + 1
        return tuple(
            sum((self.values[player][e] / holders[e] for e in items), Fraction(0))
            for player, items in enumerate(sets)
        )


class SymmetricIndifferentModel(WelfareModel):
    """
    Identical elements with union welfare w(|S_1 ∪ ... ∪ S_k|), split in
    proportion to set sizes: f_i(S) = |S_i| * w(m) / m for m allocated elements.

    For a concave non-decreasing w with w(0) = 0 the model is submodular, shows
    adverse competition, and satisfies MeI, AgI and anonymity on disjoint
    profiles.
    """

    def __init__(
        self,
        sequence: Sequence[Any],
        player_count: int,
        name: str = "symmetric-indifferent",
        labels: Optional[Sequence[str]] = None
    ) -> None:
        w = tuple(Fraction(v) for v in sequence)
        if not w or w[0] != 0:
            raise ModelError(f"{name}: the welfare sequence must start at w(0) = 0")
        super().__init__(player_count, len(w) - 1, name, labels, exact=True, disjoint_only=True)
        self.sequence = w

    def _player_utilities(self, sets: Profile) -> Utilities:
        allocated = sum(len(items) for items in sets)
        if allocated == 0:
            return tuple(Fraction(0) for _ in sets)
        share = self.sequence[allocated] / allocated
        return tuple(len(items) * share for items in sets)

    def _total_welfare(self, sets: Profile) -> Fraction:
        return self.sequence[sum(len(items) for items in sets)]


def format_utilities(values: Sequence[Value]) -> List[str]:
    """Serialize a utility vector, keeping floats as their decimal repr."""
    return [format_rational(v) if isinstance(v, (Fraction, int)) else repr(float(v)) for v in values]
