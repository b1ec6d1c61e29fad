"""Crossover and mutation operators over scoring expressions.

Two interchangeable implementations: a deterministic seeded one built from
subtree surgery, and one that asks a chat endpoint to propose offspring.
Both funnel every candidate through the same gate (parse, bounds check,
dry-run on a tiny probe structure) so nothing malformed reaches the search
loop, and both return a report of what was kept and what was discarded.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Protocol

from nodevolve.dsl import (
    BINARY_OPS,
    KHOP_RANGE,
    METRIC_NAMES,
    UNARY_OPS,
    Binary,
    Const,
    DslError,
    Metric,
    NeighborAgg,
    ScoreExpr,
    Unary,
    evaluate,
    expr_size,
    iter_nodes,
    parse,
    print_canonical,
    validate_expr,
)
from nodevolve.graph import Graph
from nodevolve.llm import ChatClient, LlmTransportError

_PROBE_EDGES = (
    (0, 1), (0, 2), (0, 3), (1, 2), (3, 4), (4, 5),
    (5, 6), (6, 7), (7, 8), (8, 9), (2, 5), (1, 9),
)


@lru_cache(maxsize=1)
def probe_graph() -> Graph:
    """Small fixed structure used to dry-run candidates before acceptance."""
    return Graph.from_edges(list(_PROBE_EDGES))


# Optional language tag only counts when it sits alone on the fence line;
# single-line blocks like ```degree``` keep their content.
_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_+-]+\n)?(.*?)```", re.DOTALL)


def extract_code_blocks(text: str) -> list[str]:
    """Every fenced block's contents, stripped, empties dropped."""
    return [m.strip() for m in _FENCE_RE.findall(text) if m.strip()]


@dataclass
class VariationReport:
    """What one operator call produced and why the rest was dropped.

    parsed_ok always equals len(accepted): a candidate only counts once it
    clears every gate, including the dedupe and the cap.
    """

    requested: int = 0
    parsed_ok: int = 0
    accepted: list[ScoreExpr] = field(default_factory=list)
    discarded: list[tuple[str, str]] = field(default_factory=list)


def validate_offspring(texts: list[str], max_keep: int) -> VariationReport:
    """Gate candidate texts: parse, bounds, probe evaluation, dedupe, cap.

    Discard reasons are the parse error kind, "evaluation" for anything
    that parses but blows up when run, "duplicate" for repeats within the
    batch, and "surplus" past the max_keep cap.
    """
    report = VariationReport(requested=len(texts))
    seen: set[str] = set()
    for raw in texts:
        try:
            expr = parse(raw)
        except DslError as exc:
            report.discarded.append((raw, exc.kind))
            continue
        except RecursionError:
            report.discarded.append((raw, "depth_bound"))
            continue
        try:
            evaluate(expr, probe_graph())
        except (DslError, RecursionError, FloatingPointError, ValueError):
            report.discarded.append((raw, "evaluation"))
            continue
        canonical = print_canonical(expr)
        if canonical in seen:
            report.discarded.append((raw, "duplicate"))
            continue
        if len(report.accepted) >= max_keep:
            report.discarded.append((raw, "surplus"))
            continue
        seen.add(canonical)
        report.accepted.append(expr)
        report.parsed_ok += 1
    return report


class VariationOperator(Protocol):
    """Offspring factory: recombine two parents or perturb one expression."""

    def crossover(
        self, a: ScoreExpr, fitness_a: float, b: ScoreExpr, fitness_b: float, seed: int
    ) -> VariationReport: ...

    def mutate(self, e: ScoreExpr, seed: int) -> VariationReport: ...


def _preorder(e: ScoreExpr) -> list[ScoreExpr]:
    return list(iter_nodes(e))


def subtree_at(e: ScoreExpr, index: int) -> ScoreExpr:
    for i, node in enumerate(iter_nodes(e)):
        if i == index:
            return node
    raise IndexError(index)


def replace_at(e: ScoreExpr, index: int, replacement: ScoreExpr) -> ScoreExpr:
    """Rebuild the tree with the preorder-indexed subtree swapped out."""
    counter = [0]

    def rec(node: ScoreExpr) -> ScoreExpr:
        i = counter[0]
        counter[0] += 1
        if i == index:
            return replacement
        if isinstance(node, (Const, Metric)):
            return node
        if isinstance(node, Unary):
            return Unary(node.op, rec(node.child))
        if isinstance(node, NeighborAgg):
            return NeighborAgg(node.op, rec(node.child))
        return Binary(node.op, rec(node.left), rec(node.right))

    out = rec(e)
    if counter[0] <= index:
        raise IndexError(index)
    return out


def _random_metric(rng: random.Random) -> Metric:
    name = rng.choice(METRIC_NAMES + ("khop",))
    if name == "khop":
        return Metric("khop", k=rng.randint(*KHOP_RANGE))
    return Metric(name)


def _swapped_child(rng: random.Random, a: ScoreExpr, b: ScoreExpr) -> ScoreExpr | None:
    """Graft a random subtree of b onto a random spot in a; few redraws allowed."""
    for _ in range(5):
        ia = rng.randrange(expr_size(a))
        ib = rng.randrange(expr_size(b))
        candidate = replace_at(a, ia, subtree_at(b, ib))
        try:
            validate_expr(candidate)
        except DslError:
            continue
        return candidate
    return None


def _point_edit(rng: random.Random, e: ScoreExpr) -> ScoreExpr | None:
    """One small structural edit; a few redraws before giving up."""
    for _ in range(5):
        kind = rng.randrange(5)
        nodes = _preorder(e)
        try:
            if kind == 0:
                spots = [i for i, n in enumerate(nodes) if isinstance(n, Metric)]
                if not spots:
                    continue
                candidate = replace_at(e, rng.choice(spots), _random_metric(rng))
            elif kind == 1:
                spots = [i for i, n in enumerate(nodes) if isinstance(n, Const)]
                if not spots:
                    continue
                i = rng.choice(spots)
                scaled = nodes[i].value * rng.uniform(0.5, 2.0)
                candidate = replace_at(e, i, Const(scaled))
            elif kind == 2:
                i = rng.randrange(len(nodes))
                op = rng.choice(UNARY_OPS)
                candidate = replace_at(e, i, Unary(op, nodes[i]))
            elif kind == 3:
                spots = [i for i, n in enumerate(nodes) if isinstance(n, Unary)]
                if not spots:
                    continue
                i = rng.choice(spots)
                candidate = replace_at(e, i, nodes[i].child)
            else:
                spots = [i for i, n in enumerate(nodes) if isinstance(n, Binary)]
                if not spots:
                    continue
                i = rng.choice(spots)
                node = nodes[i]
                new_op = rng.choice([op for op in BINARY_OPS if op != node.op])
                candidate = replace_at(e, i, Binary(new_op, node.left, node.right))
            validate_expr(candidate)
        except DslError:
            continue
        if candidate != e:
            return candidate
    return None


class MockVariation:
    """Seeded offline operator: subtree grafts, a normalized blend, point edits.

    Stands in for the chat-backed operator wherever runs must be cheap and
    reproducible; same interface, same validation gate.
    """

    def __init__(self, max_offspring: int = 2):
        if max_offspring < 1:
            raise ValueError("max_offspring must be positive")
        self.max_offspring = max_offspring

    def crossover(
        self, a: ScoreExpr, fitness_a: float, b: ScoreExpr, fitness_b: float, seed: int
    ) -> VariationReport:
        rng = random.Random(seed)
        candidates = []
        grafted = _swapped_child(rng, a, b)
        if grafted is not None:
            candidates.append(print_canonical(grafted))
        blend = Binary("add", Unary("normalize", a), Unary("normalize", b))
        candidates.append(print_canonical(blend))
        return validate_offspring(candidates, self.max_offspring)

    def mutate(self, e: ScoreExpr, seed: int) -> VariationReport:
        rng = random.Random(seed)
        mutant = _point_edit(rng, e)
        texts = [print_canonical(mutant)] if mutant is not None else []
        return validate_offspring(texts, 1)


def load_template(name: str) -> str:
    path = resources.files("nodevolve") / "templates" / f"{name}.txt"
    return path.read_text()


class LlmVariation:
    """Chat-backed operator: render a prompt, harvest fenced code blocks.

    Every reply block runs through the shared validation gate. Transport
    failures raise unless mock_fallback is set, in which case the seeded
    offline operator answers instead. An optional on_exchange hook sees
    every (kind, prompt, reply) for transcript capture.
    """

    def __init__(
        self,
        client: ChatClient,
        max_offspring: int = 2,
        mock_fallback: bool = False,
        on_exchange: Callable[[str, str, str], None] | None = None,
    ):
        if max_offspring < 1:
            raise ValueError("max_offspring must be positive")
        self._client = client
        self.max_offspring = max_offspring
        # callers fan independent calls out across this many workers
        self.parallelism = client.config.parallelism
        self._fallback = MockVariation(max_offspring) if mock_fallback else None
        self._on_exchange = on_exchange

    def crossover(
        self, a: ScoreExpr, fitness_a: float, b: ScoreExpr, fitness_b: float, seed: int
    ) -> VariationReport:
        prompt = load_template("crossover").format(
            parent_a=print_canonical(a),
            fitness_a=f"{fitness_a:.6f}",
            parent_b=print_canonical(b),
            fitness_b=f"{fitness_b:.6f}",
            max_offspring=self.max_offspring,
        )
        try:
            reply = self._client.complete(
                prompt, self._client.config.temperature_crossover
            )
        except LlmTransportError:
            if self._fallback is not None:
                return self._fallback.crossover(a, fitness_a, b, fitness_b, seed)
            raise
        if self._on_exchange is not None:
            self._on_exchange("crossover", prompt, reply)
        return validate_offspring(extract_code_blocks(reply), self.max_offspring)

    def mutate(self, e: ScoreExpr, seed: int) -> VariationReport:
        prompt = load_template("mutation").format(expression=print_canonical(e))
        try:
            reply = self._client.complete(
                prompt, self._client.config.temperature_mutation
            )
        except LlmTransportError:
            if self._fallback is not None:
                return self._fallback.mutate(e, seed)
            raise
        if self._on_exchange is not None:
            self._on_exchange("mutation", prompt, reply)
        return validate_offspring(extract_code_blocks(reply), 1)
