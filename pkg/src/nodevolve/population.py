"""Niched pools of scoring functions grouped by structural similarity.

Each expression gets a fixed-length feature vector summarizing which
primitives it uses and how it is shaped. Expressions land in the pool whose
centroid they resemble most (cosine similarity above a threshold) or found a
new pool, so structurally distinct search directions evolve side by side
instead of collapsing into one crowd.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from nodevolve.dsl import (
    AGG_OPS,
    METRIC_NAMES,
    UNARY_OPS,
    Binary,
    Const,
    Metric,
    NeighborAgg,
    ScoreExpr,
    Unary,
    expr_depth,
    expr_size,
    iter_nodes,
    parse,
    print_canonical,
)

EMBED_DIM = 24

# Binary operators collapse into three behavior groups so the vector stays
# compact: additive, multiplicative, and order/power shaping.
_BINARY_GROUP = {
    "add": 0,
    "sub": 0,
    "mul": 1,
    "div": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}

INITIAL_FUNCTION_TEXTS = (
    "degree",
    "khop(2)",
    "betweenness",
    "closeness",
    "eigenvector",
    "pagerank",
    "coreness + 0.001 * degree",
    "degree * (1 - clustering)",
    "(degree - 1) * nsum(degree - 1)",
    "normalize(degree) + normalize(pagerank)",
)


def initial_functions() -> list[ScoreExpr]:
    """Hand-written starting points covering the classic centrality heuristics."""
    return [parse(t) for t in INITIAL_FUNCTION_TEXTS]


def embed(e: ScoreExpr) -> np.ndarray:
    """Map an expression to a unit-norm feature vector of primitive usage.

    Layout: 7 metric counts, khop count, 6 unary counts, 3 aggregation
    counts, 3 binary-group counts, then tree size, depth, constant count,
    and number of distinct metric kinds. L2-normalized (never all-zero:
    size and depth are at least 1).
    """
    raw = np.zeros(EMBED_DIM, dtype=np.float64)
    metric_kinds: set[str] = set()
    const_count = 0
    for node in iter_nodes(e):
        if isinstance(node, Metric):
            if node.name == "khop":
                raw[7] += 1.0
                metric_kinds.add("khop")
            else:
                raw[METRIC_NAMES.index(node.name)] += 1.0
                metric_kinds.add(node.name)
        elif isinstance(node, Unary):
            raw[8 + UNARY_OPS.index(node.op)] += 1.0
        elif isinstance(node, NeighborAgg):
            raw[14 + AGG_OPS.index(node.op)] += 1.0
        elif isinstance(node, Binary):
            raw[17 + _BINARY_GROUP[node.op]] += 1.0
        elif isinstance(node, Const):
            const_count += 1
    raw[20] = float(expr_size(e))
    raw[21] = float(expr_depth(e))
    raw[22] = float(const_count)
    raw[23] = float(len(metric_kinds))
    norm = float(np.linalg.norm(raw))
    out = raw / norm
    out.flags.writeable = False
    return out


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class Individual:
    """One scored expression with its identity and placement features."""

    id: int
    expr: ScoreExpr
    fitness: float
    embedding: np.ndarray
    epoch: int = 0

    @property
    def text(self) -> str:
        return print_canonical(self.expr)


@dataclass
class PlacementReport:
    """Where classify() put an individual and what that displaced."""

    individual_id: int
    population_index: int
    created_population: bool
    inserted: bool
    evicted_id: int | None = None


@dataclass
class Population:
    """A capacity-bounded pool of similar individuals plus their centroid."""

    capacity: int
    members: list[Individual] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def centroid(self) -> np.ndarray:
        if not self.members:
            return np.zeros(EMBED_DIM, dtype=np.float64)
        return np.mean([m.embedding for m in self.members], axis=0)

    def mean_fitness(self) -> float:
        if not self.members:
            return 0.0
        return float(np.mean([m.fitness for m in self.members]))

    def best(self) -> Individual:
        return min(self.members, key=lambda m: (-m.fitness, m.id))

    def worst(self) -> Individual:
        # Eviction target: lowest fitness, oldest id on ties.
        return min(self.members, key=lambda m: (m.fitness, m.id))

    def insert(self, ind: Individual) -> tuple[bool, int | None]:
        """Add if there is room or the worst member is strictly weaker."""
        if len(self.members) < self.capacity:
            self.members.append(ind)
            return True, None
        victim = self.worst()
        if ind.fitness > victim.fitness:
            self.members.remove(victim)
            self.members.append(ind)
            return True, victim.id
        return False, None


class PopulationSet:
    """All pools plus the classification rule that routes new individuals."""

    def __init__(
        self,
        tau: float = 0.93,
        capacity: int = 10,
        max_populations: int = 32,
        unmanaged: bool = False,
    ):
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if capacity < 1 or max_populations < 1:
            raise ValueError("capacity and max_populations must be positive")
        self.tau = tau
        self.capacity = capacity
        self.max_populations = max_populations
        self.unmanaged = unmanaged
        self.populations: list[Population] = []
        self._next_id = 0

    def new_individual(self, expr: ScoreExpr, fitness: float, epoch: int = 0) -> Individual:
        ind = Individual(
            id=self._next_id, expr=expr, fitness=fitness, embedding=embed(expr), epoch=epoch
        )
        self._next_id += 1
        return ind

    def install(self, ind: Individual) -> PlacementReport:
        """Seed a brand-new pool with this individual, skipping classification."""
        cap = self.capacity if not self.unmanaged else 10**9
        self.populations.append(Population(capacity=cap, members=[ind]))
        return PlacementReport(
            individual_id=ind.id,
            population_index=len(self.populations) - 1,
            created_population=True,
            inserted=True,
        )

    def classify(self, ind: Individual) -> PlacementReport:
        """Route to the most similar pool, or found a new one below threshold.

        The nearest pool wins when its centroid similarity exceeds tau or
        when the pool budget is exhausted. Insertion into a full pool only
        happens when the newcomer beats the pool's weakest member.
        """
        if self.unmanaged:
            if not self.populations:
                self.install(ind)
                return PlacementReport(ind.id, 0, True, True)
            self.populations[0].members.append(ind)
            return PlacementReport(ind.id, 0, False, True)
        if not self.populations:
            return self.install(ind)
        sims = [cosine_similarity(ind.embedding, p.centroid) for p in self.populations]
        target = int(np.argmax(sims))
        if sims[target] > self.tau or len(self.populations) >= self.max_populations:
            inserted, evicted = self.populations[target].insert(ind)
            return PlacementReport(ind.id, target, False, inserted, evicted)
        return self.install(ind)

    def individuals(self) -> list[Individual]:
        return [m for p in self.populations for m in p.members]

    def best(self) -> Individual:
        everyone = self.individuals()
        if not everyone:
            raise ValueError("no individuals yet")
        return min(everyone, key=lambda m: (-m.fitness, m.id))

    def snapshot(self) -> list[dict]:
        """JSON-friendly dump of every pool, members ordered by id."""
        out = []
        for p in self.populations:
            out.append(
                {
                    "capacity": p.capacity,
                    "mean_fitness": p.mean_fitness(),
                    "members": [
                        {
                            "id": m.id,
                            "expr": m.text,
                            "fitness": m.fitness,
                            "epoch": m.epoch,
                        }
                        for m in sorted(p.members, key=lambda m: m.id)
                    ],
                }
            )
        return out


def _sample_weighted(rng: random.Random, items: list, weights: list[float]):
    """Draw one item proportional to weight; uniform when all weights are 0."""
    total = float(sum(weights))
    if total <= 0.0:
        return items[rng.randrange(len(items))]
    r = rng.random() * total
    acc = 0.0
    for item, w in zip(items, weights):
        acc += w
        if r < acc:
            return item
    return items[-1]


def select_parents(pset: PopulationSet, seed: int, inter_pairs: int = 1) -> list[Individual]:
    """Pick crossover parents: one per pool, the global best, and cross-pool pairs.

    One member is drawn from each pool proportional to fitness, the overall
    best individual is appended when not already drawn, and for each
    requested cross-pool pair a pool with at least two members is drawn
    proportional to mean fitness and two distinct members are drawn from it
    proportional to fitness.
    """
    rng = random.Random(seed)
    parents: list[Individual] = []
    for pop in pset.populations:
        if not pop.members:
            continue
        pick = _sample_weighted(rng, pop.members, [m.fitness for m in pop.members])
        parents.append(pick)
    if not parents:
        return []
    elite = pset.best()
    if elite.id not in {p.id for p in parents}:
        parents.append(elite)
    eligible = [p for p in pset.populations if len(p) >= 2]
    for _ in range(inter_pairs):
        if not eligible:
            break
        pop = _sample_weighted(rng, eligible, [p.mean_fitness() for p in eligible])
        first = _sample_weighted(rng, pop.members, [m.fitness for m in pop.members])
        rest = [m for m in pop.members if m.id != first.id]
        second = _sample_weighted(rng, rest, [m.fitness for m in rest])
        parents.extend([first, second])
    return parents
