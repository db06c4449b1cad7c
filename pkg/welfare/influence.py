from fractions import Fraction
from itertools import product
from typing import Any, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple
import logging

import networkx as nx
import numpy as np

from welfare.config import Config
from welfare.exceptions import ModelError, PreconditionError
from welfare.model import ProfileLike, WelfareModel
from welfare.types import Profile, Utilities

logger = logging.getLogger(__name__)


class SpreadGraph:
    """
    Weighted directed graph for single-step competitive spread.

    Nodes carry a weight w_v, edges a probability p(u, v). Both are stored as
    exact rationals on a `networkx.DiGraph`.
    """

    def __init__(self, nodes: Iterable[Tuple[str, Any]], edges: Iterable[Tuple[str, str, Any]]) -> None:
        """
        Initialize a spread graph.

        Args:
            nodes: (id, weight) pairs
            edges: (source, target, probability) triples

        Raises:
            ModelError: On duplicate nodes or edges, unknown endpoints, negative
                weights or probabilities outside [0, 1]
        """
        self.graph = nx.DiGraph()
        for node, weight in nodes:
            node = str(node)
            if node in self.graph:
                raise ModelError(f"duplicate node {node!r}")
            weight = Fraction(weight)
            if weight < 0:
                raise ModelError(f"node {node!r} has negative weight {weight}")
            self.graph.add_node(node, weight=weight)

        for source, target, probability in edges:
            source, target = str(source), str(target)
            for endpoint in (source, target):
                if endpoint not in self.graph:
                    raise ModelError(f"edge ({source}, {target}) uses unknown node {endpoint!r}")
            if self.graph.has_edge(source, target):
                raise ModelError(f"duplicate edge ({source}, {target})")
            probability = Fraction(probability)
            if not 0 <= probability <= 1:
                raise ModelError(f"edge ({source}, {target}) has probability {probability} outside [0, 1]")
            self.graph.add_edge(source, target, p=probability)

    @property
    def nodes(self) -> List[str]:
        return list(self.graph.nodes)

    def weight(self, node: str) -> Fraction:
        self._require(node)
        return self.graph.nodes[node]["weight"]

    def probability(self, source: str, target: str) -> Fraction:
        if not self.graph.has_edge(source, target):
            return Fraction(0)
        return self.graph.edges[source, target]["p"]

    def in_edges(self, node: str) -> List[Tuple[str, Fraction]]:
        """Incoming (source, probability) pairs of a node."""
        self._require(node)
        return [(source, data["p"]) for source, _, data in self.graph.in_edges(node, data=True)]

    def sources(self) -> List[str]:
        """Nodes with at least one outgoing edge, in insertion order."""
        return [node for node in self.graph.nodes if self.graph.out_degree(node) > 0]

    def _require(self, node: str) -> None:
        if node not in self.graph:
            raise ModelError(f"unknown node {node!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nodes": [{"id": node, "weight": data["weight"]} for node, data in self.graph.nodes(data=True)],
            "edges": [
                {"from": source, "to": target, "p": data["p"]}
                for source, target, data in self.graph.edges(data=True)
            ],
        }

    def __repr__(self) -> str:
        return f"SpreadGraph(nodes={self.graph.number_of_nodes()}, edges={self.graph.number_of_edges()})"


def reach_probability(graph: SpreadGraph, seed_set: Iterable[str], node: str) -> Fraction:
    """
    Probability that a node is reached in one step from a seed set.

    Each seed with an edge into the node gets one independent attempt, so the
    result is 1 - prod(1 - p(u, node)). A seed reaches itself with probability 1.

    Raises:
        ModelError: If the node or a seed is not in the graph
    """
    seeds = set(seed_set)
    for seed in seeds:
        graph._require(seed)
    graph._require(node)
    if node in seeds:
        return Fraction(1)
    miss = Fraction(1)
    for source, probability in graph.in_edges(node):
        if source in seeds:
            miss *= 1 - probability
    return 1 - miss


class MonteCarloEstimate(NamedTuple):
    means: Tuple[float, ...]
    stderr: Tuple[float, ...]
    samples: int


class OrModel(WelfareModel):
    """
    The single-step OR model of competitive influence.

    Every seed tries once to reach each out-neighbour; a node reached by several
    players is split uniformly among them. A seed held by several players makes
    one attempt that counts for all its owners, so total welfare depends only on
    the union of the seed sets. Seed nodes are credited to their owners, split
    equally when several players hold them.
    """

    def __init__(
        self,
        graph: SpreadGraph,
        player_count: int = 2,
        candidates: Optional[Sequence[str]] = None,
        count_seed_weight: bool = True,
        name: str = "or",
        disjoint_only: bool = False,
        epsilon: Optional[Any] = None
    ) -> None:
        """
        Initialize an OR model.

        Args:
            graph: Spread graph
            player_count: Number of competing players
            candidates: Node ids forming the allocatable ground set (default:
                every node with an outgoing edge)
            count_seed_weight: Whether a seed's own weight is credited to its owners
            name: Model name used in reports
            disjoint_only: Whether only pairwise-disjoint seed sets are defined
            epsilon: The ε the graph was drawn with, kept for reports and exports
        """
        candidates = list(candidates) if candidates is not None else graph.sources()
        for node in candidates:
            graph._require(node)
        if len(set(candidates)) != len(candidates):
            raise ModelError(f"{name}: duplicate candidate nodes")
        super().__init__(player_count, len(candidates), name, candidates, exact=True, disjoint_only=disjoint_only)
        self.graph = graph
        self.candidates: Tuple[str, ...] = tuple(candidates)
        self.count_seed_weight = count_seed_weight
        self.epsilon: Optional[Fraction] = Fraction(epsilon) if epsilon is not None else None

    def _owners(self, sets: Profile) -> Dict[str, FrozenSet[int]]:
        owners: Dict[str, set] = {}
        for player, items in enumerate(sets):
            for element in items:
                owners.setdefault(self.candidates[element], set()).add(player)
        return {node: frozenset(players) for node, players in owners.items()}

    def _player_utilities(self, sets: Profile) -> Utilities:
        owners = self._owners(sets)
        totals = [Fraction(0)] * self.player_count

        for node in self.graph.nodes:
            weight = self.graph.weight(node)
            if weight == 0:
                continue
            if node in owners:
                if self.count_seed_weight:
                    share = weight / len(owners[node])
                    for player in owners[node]:
                        totals[player] += share
                continue

            # seeds with an edge into the node, grouped by their owner set
            misses: Dict[FrozenSet[int], Fraction] = {}
            for source, probability in self.graph.in_edges(node):
                if source in owners and probability > 0:
                    group = owners[source]
                    misses[group] = misses.get(group, Fraction(1)) * (1 - probability)
            if not misses:
                continue

            groups = list(misses.items())
            for pattern in product((False, True), repeat=len(groups)):
                chance = Fraction(1)
                reachers: set = set()
                for fired, (group, miss) in zip(pattern, groups):
                    if fired:
                        chance *= 1 - miss
                        reachers |= group
                    else:
                        chance *= miss
                if chance == 0 or not reachers:
                    continue
                share = chance * weight / len(reachers)
                for player in reachers:
                    totals[player] += share

        return tuple(totals)

    def _total_welfare(self, sets: Profile) -> Fraction:
        seeds = {self.candidates[e] for items in sets for e in items}
        total = Fraction(0)
        for node in self.graph.nodes:
            if node in seeds:
                if self.count_seed_weight:
                    total += self.graph.weight(node)
            else:
                total += self.graph.weight(node) * reach_probability(self.graph, seeds, node)
        return total

    def sampled(self, samples: int = Config.MC_DEFAULT_SAMPLES, rng_seed: int = 0) -> "SampledOrModel":
        """A Monte Carlo view of this model with common random numbers across queries."""
        return SampledOrModel(self, samples, rng_seed)


def expected_utility(model: OrModel, profile: ProfileLike) -> Utilities:
    """Exact expected utility vector of a profile under the OR model."""
    return model.utilities(profile)


def monte_carlo_utility(
    model: OrModel,
    profile: ProfileLike,
    samples: int = Config.MC_DEFAULT_SAMPLES,
    rng_seed: int = 0
) -> MonteCarloEstimate:
    """
    Estimate expected utilities by simulating the spread.

    Samples are drawn in chunks, each from its own substream spawned from
    `rng_seed`, so the estimate is reproducible. Contested nodes are credited
    fractionally to their reachers, which keeps the estimator unbiased.

    Args:
        model: OR model
        profile: Allocation profile
        samples: Number of simulated spreads
        rng_seed: Seed of the sampling stream

    Returns:
        Per-player means and standard errors

    Raises:
        PreconditionError: If samples < 1
    """
    if samples < 1:
        raise PreconditionError(f"samples must be at least 1, got {samples}")
    sets = model.canonical(profile)
    k = model.player_count
    owners = model._owners(sets)
    nodes = [node for node in model.graph.nodes if node not in owners]
    index = {node: position for position, node in enumerate(nodes)}

    # seed weights are deterministic
    base = np.zeros(k)
    if model.count_seed_weight:
        for node, players in owners.items():
            for player in players:
                base[player] += float(model.graph.weight(node)) / len(players)

    edges = [
        (source, target, float(data["p"]))
        for source, target, data in model.graph.graph.edges(data=True)
        if source in owners and target in index
    ]
    weights = np.array([float(model.graph.weight(node)) for node in nodes])
    probabilities = np.array([p for _, _, p in edges])
    incidence = np.zeros((k, len(edges), len(nodes)))
    for position, (source, target, _) in enumerate(edges):
        for player in owners[source]:
            incidence[player, position, index[target]] = 1.0

    chunks = -(-samples // Config.MC_CHUNK_SIZE)
    streams = np.random.SeedSequence(rng_seed).spawn(chunks)
    draws: List[np.ndarray] = []
    remaining = samples
    for stream in streams:
        size = min(Config.MC_CHUNK_SIZE, remaining)
        remaining -= size
        rng = np.random.default_rng(stream)
        fired = (rng.random((size, len(edges))) < probabilities).astype(float)
        reached = np.stack([(fired @ incidence[player]) > 0 for player in range(k)])
        counts = reached.sum(axis=0)
        shares = np.where(counts > 0, reached / np.maximum(counts, 1), 0.0)
        draws.append((shares @ weights).T + base)

    values = np.concatenate(draws, axis=0)
    means = values.mean(axis=0)
    if samples > 1:
        stderr = values.std(axis=0, ddof=1) / np.sqrt(samples)
    else:
        stderr = np.zeros(k)
    return MonteCarloEstimate(
        means=tuple(float(v) for v in means),
        stderr=tuple(float(v) for v in stderr),
        samples=samples,
    )


class SampledOrModel(WelfareModel):
    """
    Non-exact OR model answering with Monte Carlo estimates.

    Every query reuses the same seed, so comparisons between profiles see
    common random numbers. Used by the greedy allocator's Monte Carlo mode.
    """

    def __init__(self, base: OrModel, samples: int, rng_seed: int) -> None:
        super().__init__(
            base.player_count,
            base.ground_size,
            f"{base.name}~mc{samples}",
            base.labels,
            exact=False,
            disjoint_only=base.disjoint_only,
        )
        self.base = base
        self.samples = samples
        self.rng_seed = rng_seed

    def _player_utilities(self, sets: Profile) -> Tuple[float, ...]:
        return monte_carlo_utility(self.base, sets, self.samples, self.rng_seed).means


def random_or_graph(
    rng_seed: int,
    candidates: int = 6,
    targets: int = 6,
    player_count: int = 2,
    edge_density: float = 0.5,
    denominator: int = 10,
    candidate_weight: Any = Fraction(1, 100)
) -> OrModel:
    """
    Seeded random OR instance for property tests.

    Candidates c1..cm get weight `candidate_weight`, targets u1..un get integer
    weights 1..3, and each candidate-target edge is present with probability
    `edge_density` with a rational probability j/denominator.
    """
    rng = np.random.default_rng(rng_seed)
    nodes: List[Tuple[str, Any]] = [(f"c{i + 1}", Fraction(candidate_weight)) for i in range(candidates)]
    nodes += [(f"u{j + 1}", Fraction(int(rng.integers(1, 4)))) for j in range(targets)]
    edges = []
    for i in range(candidates):
        for j in range(targets):
            if rng.random() < edge_density:
                edges.append((f"c{i + 1}", f"u{j + 1}", Fraction(int(rng.integers(1, denominator + 1)), denominator)))
    graph = SpreadGraph(nodes, edges)
    names = [f"c{i + 1}" for i in range(candidates)]
    logger.debug(f"random OR graph {rng_seed}: {len(edges)} edges")
    return OrModel(graph, player_count, candidates=names, name=f"random-or-{rng_seed}")
