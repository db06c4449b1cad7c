from fractions import Fraction
from typing import Any, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np

from welfare.exceptions import ModelError
from welfare.model import ProfileLike, WelfareModel
from welfare.types import Profile, Utilities

logger = logging.getLogger(__name__)


class CoverageInstance(WelfareModel):
    """
    Communication-zone coverage over pre-discretized cells.

    The ground set is the list of disks. A cell of value α covered by allocated
    disks is split among them in proportion to their owners' weights: with W the
    sum of owner weights over covering disks (a disk held by two players counts
    twice), each covering disk of player j earns α·w_j/W.
    """

    def __init__(
        self,
        disks: Sequence[str],
        cells: Iterable[Tuple[Any, Iterable[str]]],
        player_weights: Sequence[Any] = (1, 1),
        name: str = "coverage",
        disjoint_only: bool = False
    ) -> None:
        """
        Initialize a coverage instance.

        Args:
            disks: Disk ids, in ground-set order
            cells: (value, covering disk ids) pairs
            player_weights: One positive weight per player
            name: Model name used in reports
            disjoint_only: Whether only pairwise-disjoint allocations are defined

        Raises:
            ModelError: On an empty cover, an unknown disk, a negative value or a
                non-positive player weight
        """
        weights = tuple(Fraction(w) for w in player_weights)
        if not weights or any(w <= 0 for w in weights):
            raise ModelError(f"{name}: player weights must be positive")
        if len(set(disks)) != len(disks):
            raise ModelError(f"{name}: duplicate disk ids")
        super().__init__(len(weights), len(disks), name, list(disks), exact=True, disjoint_only=disjoint_only)

        position = {disk: index for index, disk in enumerate(disks)}
        self.cells: List[Tuple[Fraction, frozenset]] = []
        for number, (value, covering) in enumerate(cells):
            value = Fraction(value)
            cover = []
            for disk in covering:
                if disk not in position:
                    raise ModelError(f"{name}: cell {number} names unknown disk {disk!r}")
                cover.append(position[disk])
            if not cover:
                raise ModelError(f"{name}: cell {number} is covered by no disk")
            if value < 0:
                raise ModelError(f"{name}: cell {number} has negative value {value}")
            self.cells.append((value, frozenset(cover)))
        self.player_weights = weights

    @property
    def weighted(self) -> bool:
        return len(set(self.player_weights)) > 1

    def _player_utilities(self, sets: Profile) -> Utilities:
        totals = [Fraction(0)] * self.player_count
        for value, cover in self.cells:
            counts = [len(items & cover) for items in sets]
            denominator = sum(count * weight for count, weight in zip(counts, self.player_weights))
            if denominator == 0:
                continue
            for player, count in enumerate(counts):
                if count:
                    totals[player] += value * count * self.player_weights[player] / denominator
        return tuple(totals)

    def _total_welfare(self, sets: Profile) -> Fraction:
        union = frozenset().union(*sets)
        return sum((value for value, cover in self.cells if cover & union), Fraction(0))


def coverage_welfare(instance: CoverageInstance, profile: ProfileLike) -> Fraction:
    """Total value of the cells covered by at least one allocated disk."""
    sets = instance.canonical(profile)
    return instance._total_welfare(sets)


def coverage_utility(instance: CoverageInstance, profile: ProfileLike) -> Utilities:
    """Per-player share of the covered value."""
    return instance.utilities(profile)


def random_coverage_instance(
    disks: int = 6,
    cells: int = 8,
    max_multiplicity: int = 3,
    rng_seed: int = 0,
    players: int = 2,
    weights: Optional[Sequence[Any]] = None,
    denominator: int = 4,
    disjoint_only: bool = False
) -> CoverageInstance:
    """
    Seeded random cell structure for property tests.

    Each cell gets a value j/denominator with j in 1..2·denominator and is
    covered by 1..max_multiplicity distinct disks chosen uniformly.
    """
    rng = np.random.default_rng(rng_seed)
    names = [f"D{i + 1}" for i in range(disks)]
    cell_list = []
    for _ in range(cells):
        size = int(rng.integers(1, min(max_multiplicity, disks) + 1))
        cover = sorted(int(i) for i in rng.choice(disks, size=size, replace=False))
        value = Fraction(int(rng.integers(1, 2 * denominator + 1)), denominator)
        cell_list.append((value, [names[i] for i in cover]))
    return CoverageInstance(
        names,
        cell_list,
        weights if weights is not None else [1] * players,
        name=f"random-coverage-{rng_seed}",
        disjoint_only=disjoint_only,
    )
