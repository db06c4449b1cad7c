"""
Counterexamples: Fixed Orderings Are Not Strategyproof

This example sweeps every bid profile up to a small cap on the bundled spread
graphs. Dictatorship, largest-remaining and round robin each let a player gain
by declaring a smaller budget. The two-player table mechanism passes the same
sweep.
"""

from welfare import load_fixture, monotonicity_sweep, reproduce
from welfare.audit import verify_witness
import logging

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

SWEEPS = [
    ("counter1", "dictatorship"),
    ("counter1", "largest-remaining"),
    ("counter2", "round-robin"),
    ("counter1", "two-player"),
    ("counter2", "two-player"),
]


def main() -> None:
    for fixture, mechanism in SWEEPS:
        model = load_fixture(fixture)
        report = monotonicity_sweep(mechanism, model, budget_cap=4)
        print(f"{mechanism:>18} on {fixture}: {report.verdict} ({report.profiles_examined} profiles)")
        for witness in report.witnesses[:2]:
            confirmed = verify_witness(mechanism, model, witness)
            print(
                f"    player {witness.player}: u{tuple(witness.bids)} = {witness.utility}"
                f" > u{tuple(witness.raised_bids)} = {witness.raised_utility}"
                f" (re-checked: {confirmed})"
            )

    print()
    report = reproduce("roundrobin-counter2", epsilon="1/50")
    for printed in report.printed:
        print(f"{printed.name}: printed {printed.printed}, exact {printed.exact}")
    for note in report.notes:
        print(f"note: {note}")


if __name__ == "__main__":
    main()
