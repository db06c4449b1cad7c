from .model import AllocationProfile, BidProfile, WelfareModel, TabularModel, AdditiveModel
from .influence import OrModel, SpreadGraph
from .coverage import CoverageInstance
from .greedy import TurnSequence, GreedyState, locally_greedy, uniform_greedy, brute_force_opt
from .mechanisms import (
    Mechanism, TwoPlayerMechanism, CoveringMechanism, UniformRandomMechanism, DisjointMechanism,
    FixedOrderingMechanism, OrderingPolicy, construct_distributions, construct_probability_table,
    get_mechanism, expected_utilities
)
from .audit import monotonicity_sweep, approximation_audit
from .repro import reproduce
from .fixtures import load_fixture
from .instances import load_instance, parse_instance
from .exceptions import WelfareError
from .server import AuditServer

__all__ = [
    "AllocationProfile", "BidProfile", "WelfareModel", "TabularModel", "AdditiveModel",
    "OrModel", "SpreadGraph", "CoverageInstance",
    "TurnSequence", "GreedyState", "locally_greedy", "uniform_greedy", "brute_force_opt",
    "Mechanism", "TwoPlayerMechanism", "CoveringMechanism", "UniformRandomMechanism", "DisjointMechanism",
    "FixedOrderingMechanism", "OrderingPolicy", "construct_distributions", "construct_probability_table",
    "get_mechanism", "expected_utilities",
    "monotonicity_sweep", "approximation_audit", "reproduce",
    "load_fixture", "load_instance", "parse_instance",
    "WelfareError", "AuditServer",
]
