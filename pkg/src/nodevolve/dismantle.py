"""Removal schedules and the connectivity curves that score them.

A candidate scoring function is judged by removing its top-scored nodes and
watching how fast pairwise connectivity collapses: the accumulated normalized
connectivity (mean of the per-step connectivity ratios) is the quality
measure, and fitness is one minus it, so higher is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from nodevolve.dsl import MetricCache, ScoreExpr, evaluate
from nodevolve.graph import DismantleError, Graph, new_mask, pairwise_connectivity


def removal_size(node_count: int, fraction: float) -> int:
    """Number of nodes a fraction maps to: round half up, clamped to 1..V-1."""
    if node_count < 2:
        raise DismantleError("need at least two nodes to dismantle")
    if not 0.0 < fraction <= 1.0:
        raise DismantleError("fraction must be in (0, 1]")
    l = math.floor(fraction * node_count + 0.5)
    return min(max(l, 1), node_count - 1)


def top_l_by_score(scores: np.ndarray, l: int) -> list[int]:
    """Indices of the l highest scores, ties broken by ascending index."""
    scores = np.asarray(scores)
    if not 1 <= l <= len(scores):
        raise ValueError(f"l must be in 1..{len(scores)}")
    order = np.argsort(-scores, kind="stable")
    return order[:l].tolist()


@dataclass
class AncCurve:
    """Connectivity ratios after each removal step of one schedule.

    ratios[i] is pairwise connectivity after removing the first i+1 nodes,
    divided by the intact graph's connectivity sigma0.
    """

    sigma0: int
    ratios: np.ndarray
    denominator: str = "removal"
    node_total: int = 0

    @property
    def value(self) -> float:
        """Accumulated normalized connectivity (lower means faster collapse)."""
        total = float(np.sum(self.ratios))
        if self.denominator == "removal":
            return total / len(self.ratios)
        return total / self.node_total

    @property
    def terminal_ratio(self) -> float:
        return float(self.ratios[-1])

    def write_csv(self, path: str | Path) -> None:
        lines = ["k,sigma_ratio"]
        lines += [f"{k},{r!r}" for k, r in enumerate(self.ratios.tolist(), start=1)]
        Path(path).write_text("\n".join(lines) + "\n")


def anc(g: Graph, removal: list[int], denominator: str = "removal") -> AncCurve:
    """Remove the given nodes in order, recounting connectivity each step.

    Requires a non-empty duplicate-free removal list over valid node ids and
    a graph with at least one edge (sigma would be 0 otherwise).
    """
    if len(removal) == 0:
        raise DismantleError("removal list is empty")
    if len(set(removal)) != len(removal):
        raise DismantleError("removal list has duplicates")
    if denominator not in ("removal", "nodes"):
        raise DismantleError(f"unknown denominator '{denominator}'")
    v = g.node_count
    if any(not 0 <= int(x) < v for x in removal):
        raise DismantleError("removal id out of range")
    sigma0 = pairwise_connectivity(g)
    if sigma0 == 0:
        raise DismantleError("graph has no connected pair; connectivity ratio undefined")
    mask = new_mask(g)
    ratios = np.empty(len(removal), dtype=np.float64)
    for i, node in enumerate(removal):
        mask[int(node)] = True
        ratios[i] = pairwise_connectivity(g, mask) / sigma0
    return AncCurve(sigma0=sigma0, ratios=ratios, denominator=denominator, node_total=v)


def fitness(
    g: Graph,
    expr: ScoreExpr,
    fraction: float = 0.2,
    mode: str = "anc",
    cache: MetricCache | None = None,
    denominator: str = "removal",
) -> float:
    """Score an expression by one-shot dismantling: higher is better, in [0, 1].

    The expression is evaluated once on the intact graph, the top-fraction
    nodes are removed in score order, and the collapse curve is folded into
    1 - ANC (mode "anc") or 1 - final connectivity ratio (mode "terminal").
    """
    if mode not in ("anc", "terminal"):
        raise DismantleError(f"unknown fitness mode '{mode}'")
    scores = evaluate(expr, g, cache)
    l = removal_size(g.node_count, fraction)
    curve = anc(g, top_l_by_score(scores, l), denominator=denominator)
    if mode == "anc":
        return 1.0 - curve.value
    return 1.0 - curve.terminal_ratio


class Strategy(Protocol):
    """Adaptive node picker: returns the next surviving node id to remove."""

    def next_node(self, g: Graph, mask: np.ndarray) -> int: ...


def dismantle_adaptive(g: Graph, strategy: Strategy, fraction: float = 0.2) -> list[int]:
    """Remove nodes one at a time, re-consulting the strategy after each removal."""
    l = removal_size(g.node_count, fraction)
    mask = new_mask(g)
    removal = []
    for _ in range(l):
        v = int(strategy.next_node(g, mask))
        if not 0 <= v < g.node_count or mask[v]:
            raise DismantleError(f"strategy returned invalid node {v}")
        mask[v] = True
        removal.append(v)
    return removal
