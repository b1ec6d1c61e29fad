"""Classic adaptive dismantling heuristics used as reference opponents.

All three re-inspect the surviving structure before every removal:

- dc: highest surviving degree, ties to the smallest index
- corehd: highest surviving coreness, then highest degree, remaining ties
  broken uniformly at random (seeded); once no 2-core is left it degrades
  to the dc rule
- wn: corehd with deterministic tie-breaking instead of random: among
  degree ties prefer the one whose weakest surviving neighbor has the
  smallest degree, then the smallest index
"""

from __future__ import annotations

import random

import numpy as np

from nodevolve.dismantle import AncCurve, anc, dismantle_adaptive
from nodevolve.graph import Graph, core_decomposition, degrees

BASELINE_NAMES = ("dc", "corehd", "wn")


def _dc_pick(g: Graph, mask: np.ndarray) -> int:
    deg = degrees(g, mask)
    return int(np.argmax(np.where(mask, -1, deg)))


def _max_core_degree_ties(g: Graph, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Surviving nodes of the deepest core at maximal degree, or None if no 2-core."""
    core = np.where(mask, -1, core_decomposition(g, mask))
    kmax = int(core.max())
    if kmax <= 1:
        return None
    deg = degrees(g, mask)
    deg_in_core = np.where(core == kmax, deg, -1)
    ties = np.flatnonzero(deg_in_core == deg_in_core.max())
    return ties, deg


class DegreeAdaptive:
    """Remove the highest-degree survivor each step."""

    name = "dc"

    def __init__(self, seed: int = 0):
        pass

    def next_node(self, g: Graph, mask: np.ndarray) -> int:
        return _dc_pick(g, mask)


class CoreHdAdaptive:
    """Peel the deepest core by degree; random among exact ties."""

    name = "corehd"

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)

    def next_node(self, g: Graph, mask: np.ndarray) -> int:
        picked = _max_core_degree_ties(g, mask)
        if picked is None:
            return _dc_pick(g, mask)
        ties, _ = picked
        return int(ties[self._rng.randrange(len(ties))])


class WeakNeighborAdaptive:
    """CoreHD with weakest-neighbor tie-breaking, fully deterministic."""

    name = "wn"

    def __init__(self, seed: int = 0):
        pass

    def next_node(self, g: Graph, mask: np.ndarray) -> int:
        picked = _max_core_degree_ties(g, mask)
        if picked is None:
            return _dc_pick(g, mask)
        ties, deg = picked
        if len(ties) == 1:
            return int(ties[0])
        adjacency = g.adjacency_lists()
        best = -1
        best_weakest = None
        for v in ties.tolist():
            alive = [int(deg[u]) for u in adjacency[v] if not mask[u]]
            # A node in a 2-core or deeper always has surviving neighbors.
            weakest = min(alive)
            if best_weakest is None or weakest < best_weakest:
                best_weakest = weakest
                best = v
        return best


_STRATEGIES = {
    "dc": DegreeAdaptive,
    "corehd": CoreHdAdaptive,
    "wn": WeakNeighborAdaptive,
}


def make_strategy(name: str, seed: int = 0):
    if name not in _STRATEGIES:
        raise ValueError(f"unknown baseline '{name}', expected one of {BASELINE_NAMES}")
    return _STRATEGIES[name](seed=seed)


def run_baseline(
    g: Graph,
    name: str,
    fraction: float = 0.2,
    seed: int = 0,
    denominator: str = "removal",
) -> tuple[list[int], AncCurve]:
    """Dismantle adaptively with a named heuristic and score the schedule."""
    strategy = make_strategy(name, seed=seed)
    removal = dismantle_adaptive(g, strategy, fraction)
    return removal, anc(g, removal, denominator=denominator)
