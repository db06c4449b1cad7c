"""
Two-Player Table Example: Building and Sampling Table M

Builds the distribution table for a small coverage game, prints the turn
sequences in each entry with their probabilities, checks every construction
condition, and draws a few seeded allocations. The same game is then run
through the covering mechanism (table P), which is available because disk
coverage is indifferent to how the covered disks are split.
"""

from fractions import Fraction
from welfare import CoverageInstance, CoveringMechanism, TwoPlayerMechanism, construct_distributions
from welfare.audit import approximation_audit

game = CoverageInstance(
    disks=["d1", "d2", "d3", "d4"],
    cells=[
        (Fraction(3), ["d1"]),
        (Fraction(2), ["d1", "d2"]),
        (Fraction(2), ["d2", "d3"]),
        (Fraction(1), ["d3", "d4"]),
        (Fraction(1, 2), ["d4"]),
    ],
    name="four-disks",
)


def main() -> None:
    table = construct_distributions(game, 2, 2)
    for (a, b), distribution in sorted(table.entries.items()):
        if a == 0 or b == 0:
            continue
        sequences = ", ".join(f"{entry.sequence.letters}:{entry.probability}" for entry in distribution)
        w_a, w_b = table.w(a, b)
        print(f"M[{a},{b}] alpha={table.alphas.get((a, b))} w=({w_a}, {w_b}) {sequences}")
    print(f"problems: {table.verify() or 'none'}")

    mechanism = TwoPlayerMechanism()
    for seed in range(3):
        outcome = mechanism.run(game, (2, 2), rng_seed=seed)
        print(f"seed {seed}: {outcome.sequence} -> {outcome.labels} utilities {outcome.utilities}")

    covering = CoveringMechanism()
    print(f"covering u(2,2) = {covering.expected_utilities(game, (2, 2))}")
    report = approximation_audit(covering, game, budget_cap=4)
    print(f"covering approximation at factor {report.factor}: {report.verdict}")


if __name__ == "__main__":
    main()
