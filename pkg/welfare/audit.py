"""
Strategyproofness and approximation auditing of allocation mechanisms.

Both audits evaluate exact expected utilities for every bid profile up to a
budget cap; no verdict is ever based on sampling.
"""

from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union
import logging

from pydantic import BaseModel, computed_field

from welfare.config import Config
from welfare.context import AuditContext
from welfare.greedy import brute_force_opt
from welfare.mechanisms import Mechanism, get_mechanism
from welfare.model import BidProfile, WelfareModel
from welfare.types import RationalField, Utilities, format_rational

logger = logging.getLogger(__name__)


class Witness(BaseModel):
    """A player whose expected utility drops when its own bid is raised by one."""
    player: int
    bids: List[int]
    raised_bids: List[int]
    utility: RationalField
    raised_utility: RationalField


class AuditReport(BaseModel):
    mechanism: str
    model: str
    budget_cap: int
    verdicts: List[str]
    witnesses: List[Witness]
    profiles_examined: int
    context: Dict[str, Any] = {}

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.witnesses

    @computed_field
    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


class ApproximationRow(BaseModel):
    bids: List[int]
    welfare: RationalField
    optimum: RationalField
    ratio: Optional[RationalField] = None
    bound_holds: bool


class ApproximationReport(BaseModel):
    mechanism: str
    model: str
    budget_cap: int
    disjoint: bool
    factor: RationalField
    rows: List[ApproximationRow]
    context: Dict[str, Any] = {}

    @computed_field
    @property
    def passed(self) -> bool:
        return all(row.bound_holds for row in self.rows)

    @computed_field
    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def bid_profiles(player_count: int, max_total: int) -> Iterator[BidProfile]:
    """Every bid profile with total at most `max_total`, by total and then lexicographically."""
    def compose(remaining: int, slots: int) -> Iterator[Tuple[int, ...]]:
        if slots == 1:
            yield (remaining,)
            return
        for first in range(remaining, -1, -1):
            for rest in compose(remaining - first, slots - 1):
                yield (first,) + rest

    for total in range(max_total + 1):
        for budgets in sorted(compose(total, player_count)):
            yield BidProfile(budgets)


def _resolve(mechanism: Union[str, Mechanism]) -> Mechanism:
    return get_mechanism(mechanism) if isinstance(mechanism, str) else mechanism


def _sweep_total(model: WelfareModel, budget_cap: int) -> int:
    return min(budget_cap, model.ground_size)


def monotonicity_sweep(
    mechanism: Union[str, Mechanism],
    model: WelfareModel,
    budget_cap: int = Config.DEFAULT_BUDGET_CAP
) -> AuditReport:
    """
    Check u_i(b_i, b_-i) <= u_i(b_i + 1, b_-i) for every player and bid profile.

    Profiles are swept up to a total of `budget_cap` (and never past the ground
    set). Only raises by one are compared: declaring more than the true budget
    is never in a player's interest, so monotonicity in the own bid is exactly
    the absence of a profitable underreport.

    Args:
        mechanism: Mechanism id or instance
        model: Exact welfare model
        budget_cap: Largest total budget swept

    Returns:
        AuditReport with one verdict per player and every violating pair

    Raises:
        EnumerationCapExceeded: If an expectation needs more sequences than allowed
    """
    mechanism = _resolve(mechanism)
    max_total = _sweep_total(model, budget_cap)
    context = AuditContext(
        "monotonicity_sweep",
        parameters={"mechanism": mechanism.mechanism_id, "model": model.name, "budget_cap": budget_cap},
        keep_history=False,
    )
    logger.info(f"sweeping {mechanism.mechanism_id} on {model.name} up to total {max_total}")
    mechanism.prepare(model, max_total)

    utilities: Dict[BidProfile, Utilities] = {}
    for bids in bid_profiles(model.player_count, max_total):
        utilities[bids] = mechanism.expected_utilities(model, bids)
        context.record(str(bids), [format_rational(v) for v in utilities[bids]])

    witnesses: List[Witness] = []
    for bids, values in utilities.items():
        if bids.total >= max_total:
            continue
        for player in range(model.player_count):
            raised = bids.incremented(player)
            raised_values = utilities[raised]
            if raised_values[player] < values[player]:
                witnesses.append(Witness(
                    player=player,
                    bids=list(bids),
                    raised_bids=list(raised),
                    utility=values[player],
                    raised_utility=raised_values[player],
                ))

    violated = {w.player for w in witnesses}
    report = AuditReport(
        mechanism=mechanism.mechanism_id,
        model=model.name,
        budget_cap=budget_cap,
        verdicts=["violated" if player in violated else "monotone" for player in range(model.player_count)],
        witnesses=witnesses,
        profiles_examined=len(utilities),
        context=context.finish().to_dict(),
    )
    if witnesses:
        first = witnesses[0]
        logger.info(
            f"{mechanism.mechanism_id} on {model.name}: {len(witnesses)} violations, first for player "
            f"{first.player} at {first.bids} -> {first.raised_bids}"
        )
    return report


def verify_witness(mechanism: Union[str, Mechanism], model: WelfareModel, witness: Witness) -> bool:
    """Re-evaluate a witness from scratch; True when the utility drop is real."""
    mechanism = _resolve(mechanism)
    before = mechanism.expected_utilities(model, witness.bids)[witness.player]
    after = mechanism.expected_utilities(model, witness.raised_bids)[witness.player]
    return after < before and before == witness.utility and after == witness.raised_utility


def approximation_audit(
    mechanism: Union[str, Mechanism],
    model: WelfareModel,
    budget_cap: int = Config.DEFAULT_BUDGET_CAP,
    disjoint: Optional[bool] = None
) -> ApproximationReport:
    """
    Compare expected mechanism welfare with the brute-force optimum.

    The bound asserted is the mechanism's own factor: 1/2 for the two-player
    table and the fixed orderings, 632/1000 (below 1 - 1/e) for the uniform
    random and covering mechanisms, 1/(k+1) for the disjoint mechanism.

    Args:
        mechanism: Mechanism id or instance
        model: Exact welfare model
        budget_cap: Largest total budget audited
        disjoint: Optimize over disjoint profiles (default: the mechanism's own domain)

    Raises:
        EnumerationCapExceeded: If an optimum or expectation exceeds its cap
    """
    mechanism = _resolve(mechanism)
    if disjoint is None:
        disjoint = mechanism.disjoint_optimum
    disjoint = disjoint or model.disjoint_only
    factor = mechanism.bound_factor(model)
    context = AuditContext(
        "approximation_audit",
        parameters={"mechanism": mechanism.mechanism_id, "model": model.name, "budget_cap": budget_cap},
        keep_history=False,
    )

    mechanism.prepare(model, _sweep_total(model, budget_cap))
    rows: List[ApproximationRow] = []
    for bids in bid_profiles(model.player_count, _sweep_total(model, budget_cap)):
        welfare = sum(mechanism.expected_utilities(model, bids), Fraction(0))
        _, optimum = brute_force_opt(model, bids, disjoint)
        rows.append(ApproximationRow(
            bids=list(bids),
            welfare=welfare,
            optimum=optimum,
            ratio=optimum / welfare if welfare else None,
            bound_holds=welfare >= factor * optimum,
        ))
        context.record(str(bids), format_rational(welfare))

    report = ApproximationReport(
        mechanism=mechanism.mechanism_id,
        model=model.name,
        budget_cap=budget_cap,
        disjoint=disjoint,
        factor=factor,
        rows=rows,
        context=context.finish().to_dict(),
    )
    if not report.passed:
        logger.info(f"{mechanism.mechanism_id} on {model.name}: approximation bound {factor} fails")
    return report


def worst_ratio(report: ApproximationReport) -> Optional[Fraction]:
    """Largest OPT/welfare ratio in a report, None if a profile has zero welfare and positive optimum."""
    worst = Fraction(1)
    for row in report.rows:
        if row.ratio is None:
            if row.optimum > 0:
                return None
            continue
        worst = max(worst, row.ratio)
    return worst

