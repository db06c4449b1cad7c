"""
Checkers for the structural assumptions a welfare model must satisfy.

Every checker enumerates the profiles of a small model exhaustively and returns
a `CheckResult`. A failing result carries a witness naming concrete profiles
(as element-id lists) that re-evaluate to the violation.
"""

from fractions import Fraction
from itertools import permutations
from typing import Any, Dict, Iterator, List, Optional, Tuple
import logging

from pydantic import BaseModel, computed_field

from welfare.config import Config
from welfare.exceptions import PreconditionError
from welfare.model import WelfareModel, enumerate_profiles, profile_key
from welfare.types import Profile, format_rational

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    check: str
    model: str
    passed: bool
    profiles_examined: int
    detail: str = ""
    witness: Optional[Dict[str, Any]] = None

    @computed_field
    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


class ImplicationResult(BaseModel):
    """Verdicts of MeI, AgI and anonymity, and whether MeI and AgI imply anonymity."""
    model: str
    mei: CheckResult
    agi: CheckResult
    anonymity: CheckResult
    holds: bool


def _require_checkable(model: WelfareModel, max_ground: int, check: str) -> None:
    if not model.exact:
        raise PreconditionError(f"{check} needs an exact model; {model.name} answers with Monte Carlo estimates")
    if model.ground_size > max_ground:
        raise PreconditionError(
            f"{check}: ground set of {model.name} has {model.ground_size} elements, above the cap of {max_ground}"
        )


def _domain(model: WelfareModel, disjoint: Optional[bool]) -> bool:
    return model.disjoint_only if disjoint is None else disjoint or model.disjoint_only


def _additions(sets: Profile, ground_size: int, disjoint: bool) -> Iterator[Tuple[int, int, Profile]]:
    """Yield (player, element, S + element given to player) staying inside the domain."""
    union = frozenset().union(*sets)
    for player, own in enumerate(sets):
        for element in range(ground_size):
            if element in own or (disjoint and element in union):
                continue
            extended = list(sets)
            extended[player] = own | {element}
            yield player, element, tuple(extended)


def _ids(sets: Profile) -> List[List[int]]:
    return [list(items) for items in profile_key(sets)]


def _result(check: str, model: WelfareModel, examined: int, witness: Optional[Dict[str, Any]] = None,
            detail: str = "") -> CheckResult:
    passed = witness is None
    if not passed:
        logger.info(f"{check} FAIL on {model.name}: {detail}")
    return CheckResult(
        check=check,
        model=model.name,
        passed=passed,
        profiles_examined=examined,
        detail=detail,
        witness=witness,
    )


def check_nondecreasing_submodular(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    max_k: Optional[int] = None,
    disjoint: Optional[bool] = None
) -> CheckResult:
    """
    Check that f is non-decreasing and submodular, and each f_i non-decreasing
    in the player's own set.

    Submodularity is checked in its local form over (player, element) pairs:
    the marginal of giving x to i never grows after another pair (j, y) is
    added first.

    Args:
        model: Exact welfare model
        max_ground: Largest ground set accepted
        max_k: Largest per-player set size examined (None for no limit)
        disjoint: Restrict to disjoint profiles (default: the model's domain)

    Returns:
        CheckResult with a witness on the first violation

    Raises:
        PreconditionError: For a non-exact or oversized model
    """
    check = "nondecreasing_submodular"
    _require_checkable(model, max_ground, check)
    domain_disjoint = _domain(model, disjoint)
    n = model.ground_size
    examined = 0

    for sets in enumerate_profiles(model.player_count, n, domain_disjoint, max_k):
        examined += 1
        base = model.welfare(sets)
        base_utilities = model.utilities(sets)
        for player, element, extended in _additions(sets, n, domain_disjoint):
            gain = model.welfare(extended) - base
            if gain < 0:
                return _result(check, model, examined, {
                    "kind": "welfare_decrease",
                    "player": player, "element": element,
                    "profile": _ids(sets), "extended": _ids(extended),
                    "before": format_rational(base), "after": format_rational(base + gain),
                }, f"f decreases when {model.labels[element]} is added for player {player}")
            own_after = model.utilities(extended)[player]
            if own_after < base_utilities[player]:
                return _result(check, model, examined, {
                    "kind": "own_utility_decrease",
                    "player": player, "element": element,
                    "profile": _ids(sets), "extended": _ids(extended),
                    "before": format_rational(base_utilities[player]), "after": format_rational(own_after),
                }, f"f_{player} decreases in its own set")

            for other, other_element, first in _additions(sets, n, domain_disjoint):
                if (other, other_element) == (player, element):
                    continue
                if element in first[player] or (domain_disjoint and element in frozenset().union(*first)):
                    continue
                both = list(first)
                both[player] = first[player] | {element}
                later_gain = model.welfare(tuple(both)) - model.welfare(first)
                if later_gain > gain:
                    return _result(check, model, examined, {
                        "kind": "increasing_returns",
                        "player": player, "element": element,
                        "profile": _ids(sets), "superset": _ids(first),
                        "marginal": format_rational(gain), "later_marginal": format_rational(later_gain),
                    }, f"marginal of {model.labels[element]} for player {player} grows from "
                       f"{gain} to {later_gain}")

    return _result(check, model, examined)


def check_adverse_competition(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    disjoint: Optional[bool] = None,
    max_k: Optional[int] = None
) -> CheckResult:
    """Check that every f_i is non-increasing in the other players' sets."""
    check = "adverse_competition"
    _require_checkable(model, max_ground, check)
    domain_disjoint = _domain(model, disjoint)
    examined = 0

    for sets in enumerate_profiles(model.player_count, model.ground_size, domain_disjoint, max_k):
        examined += 1
        before = model.utilities(sets)
        for opponent, element, extended in _additions(sets, model.ground_size, domain_disjoint):
            after = model.utilities(extended)
            for player in range(model.player_count):
                if player != opponent and after[player] > before[player]:
                    return _result(check, model, examined, {
                        "player": player, "opponent": opponent, "element": element,
                        "profile": _ids(sets), "extended": _ids(extended),
                        "before": format_rational(before[player]), "after": format_rational(after[player]),
                    }, f"f_{player} increases when player {opponent} receives {model.labels[element]}")

    return _result(check, model, examined)


def check_mei(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    disjoint: Optional[bool] = None
) -> CheckResult:
    """Mechanism indifference: f depends only on the union of the allocated sets."""
    check = "mei"
    _require_checkable(model, max_ground, check)
    seen: Dict[frozenset, Tuple[Profile, Fraction]] = {}
    examined = 0

    for sets in enumerate_profiles(model.player_count, model.ground_size, _domain(model, disjoint)):
        examined += 1
        union = frozenset().union(*sets)
        value = model.welfare(sets)
        if union not in seen:
            seen[union] = (sets, value)
            continue
        first, first_value = seen[union]
        if value != first_value:
            return _result(check, model, examined, {
                "profile": _ids(first), "other": _ids(sets),
                "welfare": format_rational(first_value), "other_welfare": format_rational(value),
            }, f"f{model.describe(first)} = {first_value} but f{model.describe(sets)} = {value}")

    return _result(check, model, examined)


def check_agi(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    disjoint: Optional[bool] = None
) -> CheckResult:
    """Agent indifference: f_i depends on S_{-i} only through its union."""
    check = "agi"
    _require_checkable(model, max_ground, check)
    if model.player_count < 3:
        return _result(check, model, 0, detail="vacuous for fewer than three players")

    seen: Dict[Tuple[int, frozenset, frozenset], Tuple[Profile, Fraction]] = {}
    examined = 0
    for sets in enumerate_profiles(model.player_count, model.ground_size, _domain(model, disjoint)):
        examined += 1
        values = model.utilities(sets)
        for player, own in enumerate(sets):
            others = frozenset().union(*(s for index, s in enumerate(sets) if index != player))
            key = (player, own, others)
            if key not in seen:
                seen[key] = (sets, values[player])
                continue
            first, first_value = seen[key]
            if values[player] != first_value:
                return _result(check, model, examined, {
                    "player": player, "profile": _ids(first), "other": _ids(sets),
                    "utility": format_rational(first_value), "other_utility": format_rational(values[player]),
                }, f"f_{player} differs for opponent allocations with the same union")

    return _result(check, model, examined)


def check_anonymity(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    disjoint: Optional[bool] = None
) -> CheckResult:
    """
    Check f_i(S) = f_{π(i)}(S') for every permutation π, where S'_{π(j)} = S_j.
    """
    check = "anonymity"
    _require_checkable(model, max_ground, check)
    k = model.player_count
    examined = 0

    for sets in enumerate_profiles(k, model.ground_size, _domain(model, disjoint)):
        examined += 1
        values = model.utilities(sets)
        for perm in permutations(range(k)):
            permuted: List[frozenset] = [frozenset()] * k
            for player in range(k):
                permuted[perm[player]] = sets[player]
            permuted_values = model.utilities(tuple(permuted))
            for player in range(k):
                if values[player] != permuted_values[perm[player]]:
                    return _result(check, model, examined, {
                        "player": player, "permutation": list(perm),
                        "profile": _ids(sets), "permuted": _ids(tuple(permuted)),
                        "utility": format_rational(values[player]),
                        "permuted_utility": format_rational(permuted_values[perm[player]]),
                    }, f"f_{player}{model.describe(sets)} != f_{perm[player]}{model.describe(tuple(permuted))}")

    return _result(check, model, examined)


def check_normalization(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    disjoint: Optional[bool] = None
) -> CheckResult:
    """Check f_i(S) = 0 whenever S_i is empty."""
    check = "normalization"
    _require_checkable(model, max_ground, check)
    examined = 0

    for sets in enumerate_profiles(model.player_count, model.ground_size, _domain(model, disjoint)):
        examined += 1
        values = model.utilities(sets)
        for player, own in enumerate(sets):
            if not own and values[player] != 0:
                return _result(check, model, examined, {
                    "player": player, "profile": _ids(sets), "utility": format_rational(values[player]),
                }, f"player {player} has no elements but utility {values[player]}")

    return _result(check, model, examined)


def check_mei_agi_implies_anonymity(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    disjoint: Optional[bool] = None
) -> ImplicationResult:
    """
    Verify that MeI and AgI together imply anonymity for three or more players.

    Raises:
        PreconditionError: If k < 3, the model is not exact, or f_i is not
            normalized to zero on an empty own set
    """
    if model.player_count < 3:
        raise PreconditionError(f"the anonymity implication needs k >= 3 players, {model.name} has {model.player_count}")
    normalization = check_normalization(model, max_ground, disjoint)
    if not normalization.passed:
        raise PreconditionError(f"{model.name} is not normalized: {normalization.detail}")

    mei = check_mei(model, max_ground, disjoint)
    agi = check_agi(model, max_ground, disjoint)
    anonymity = check_anonymity(model, max_ground, disjoint)
    holds = not (mei.passed and agi.passed) or anonymity.passed
    if not holds:
        logger.warning(f"{model.name}: MeI and AgI hold but anonymity fails")
    return ImplicationResult(model=model.name, mei=mei, agi=agi, anonymity=anonymity, holds=holds)


def run_all_checks(
    model: WelfareModel,
    max_ground: int = Config.MAX_CHECK_GROUND,
    disjoint: Optional[bool] = None
) -> List[CheckResult]:
    """Run every structural checker against one model."""
    return [
        check_nondecreasing_submodular(model, max_ground, disjoint=disjoint),
        check_adverse_competition(model, max_ground, disjoint=disjoint),
        check_mei(model, max_ground, disjoint),
        check_agi(model, max_ground, disjoint),
        check_anonymity(model, max_ground, disjoint),
        check_normalization(model, max_ground, disjoint),
    ]
