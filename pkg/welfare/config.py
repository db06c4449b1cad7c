"""Configuration constants for the welfare mechanisms library."""

from fractions import Fraction


class Config:
    """
    Global configuration settings for the welfare mechanisms library.

    Contains default fixture parameters, enumeration caps and sampling
    settings that are referenced throughout the package.
    """

    # Fixture parameters
    DEFAULT_EPSILON: Fraction = Fraction(1, 100)
    DEFAULT_N: Fraction = Fraction(10)
    EPSILON_UPPER_BOUND: Fraction = Fraction(1, 8)

    # Enumeration caps
    MAX_CHECK_GROUND: int = 6
    BRUTE_FORCE_CAP: int = 200_000
    ENUMERATION_CAP: int = 50_000
    DEFAULT_BUDGET_CAP: int = 5
    DISJOINT_SEQUENCE_SAMPLES: int = 64

    # Monte Carlo settings
    MC_DEFAULT_SAMPLES: int = 10_000
    MC_CHUNK_SIZE: int = 2_048

    # Mechanism sampling
    SAMPLING_BITS: int = 64

    # 632/1000 <= 1 - 1/e
    ONE_MINUS_INV_E_LOWER: Fraction = Fraction(632, 1000)
