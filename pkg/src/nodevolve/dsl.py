"""A small closed expression language for scoring the nodes of a graph.

Grammar (lowercase, case-sensitive):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | METRIC | FUNC '(' args ')' | '(' expr ')' | '-' factor

Metrics: degree, coreness, betweenness, closeness, pagerank, eigenvector,
clustering, khop(K) with an integer literal K in 1..4.  Unary functions:
abs, sqrt, log1p, normalize, rank (plus prefix minus).  Neighbor
aggregations: nsum, nmean, nmax.  Binary functions: min, max, pow; the
arithmetic operators are written infix.  pow's exponent must be a numeric
literal in [-4, 4].  Trees are bounded at 200 nodes and depth 12.

Evaluation is total: division by zero yields 0, sqrt and log1p clamp
negative inputs to 0, pow preserves sign for fractional exponents, and any
non-finite entry an operation produces is replaced with 0.  Every expression
therefore maps any non-empty graph to a finite float vector.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.stats import rankdata

from nodevolve import graph as graphmod
from nodevolve.graph import Graph, sorted_segment_sum

MAX_SIZE = 200
MAX_DEPTH = 12
KHOP_RANGE = (1, 4)
POW_RANGE = (-4.0, 4.0)

METRIC_NAMES = ("degree", "coreness", "betweenness", "closeness", "pagerank", "eigenvector", "clustering")
UNARY_OPS = ("neg", "abs", "sqrt", "log1p", "normalize", "rank")
AGG_OPS = ("nsum", "nmean", "nmax")
BINARY_OPS = ("add", "sub", "mul", "div", "min", "max", "pow")

_UNARY_FUNCS = ("abs", "sqrt", "log1p", "normalize", "rank")
_BINARY_FUNCS = ("min", "max", "pow")
_INFIX = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


class DslError(ValueError):
    """Base class for expression errors; `kind` names the failure category."""

    kind = "error"


class DslSyntaxError(DslError):
    kind = "syntax"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DslNameError(DslError):
    kind = "unknown_identifier"


class DslArityError(DslError):
    kind = "arity"


class DslBoundsError(DslError):
    """Structural invariant violation; `kind` is set per instance."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Metric:
    name: str
    k: int | None = None


@dataclass(frozen=True)
class Unary:
    op: str
    child: "ScoreExpr"


@dataclass(frozen=True)
class NeighborAgg:
    op: str
    child: "ScoreExpr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ScoreExpr"
    right: "ScoreExpr"


ScoreExpr = Union[Const, Metric, Unary, NeighborAgg, Binary]


def iter_nodes(e: ScoreExpr):
    """Preorder traversal."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (Unary, NeighborAgg)):
            stack.append(node.child)
        elif isinstance(node, Binary):
            stack.append(node.right)
            stack.append(node.left)


def expr_size(e: ScoreExpr) -> int:
    return sum(1 for _ in iter_nodes(e))


def expr_depth(e: ScoreExpr) -> int:
    if isinstance(e, (Const, Metric)):
        return 1
    if isinstance(e, (Unary, NeighborAgg)):
        return 1 + expr_depth(e.child)
    return 1 + max(expr_depth(e.left), expr_depth(e.right))


def validate_expr(e: ScoreExpr) -> ScoreExpr:
    """Check every structural invariant; returns the expression unchanged."""
    size = 0
    for node in iter_nodes(e):
        size += 1
        if isinstance(node, Const):
            if not math.isfinite(node.value):
                raise DslBoundsError("const_range", "constants must be finite")
        elif isinstance(node, Metric):
            if node.name == "khop":
                if node.k is None or not KHOP_RANGE[0] <= node.k <= KHOP_RANGE[1]:
                    raise DslBoundsError("khop_range", f"khop k must be an integer in {KHOP_RANGE[0]}..{KHOP_RANGE[1]}")
            elif node.name not in METRIC_NAMES:
                raise DslNameError(f"unknown metric '{node.name}'")
            elif node.k is not None:
                raise DslArityError(f"{node.name} takes no argument")
        elif isinstance(node, Unary):
            if node.op not in UNARY_OPS:
                raise DslNameError(f"unknown unary op '{node.op}'")
        elif isinstance(node, NeighborAgg):
            if node.op not in AGG_OPS:
                raise DslNameError(f"unknown aggregation '{node.op}'")
        elif isinstance(node, Binary):
            if node.op not in BINARY_OPS:
                raise DslNameError(f"unknown binary op '{node.op}'")
            if node.op == "pow":
                if not isinstance(node.right, Const):
                    raise DslBoundsError("pow_exponent", "pow exponent must be a numeric literal")
                if not POW_RANGE[0] <= node.right.value <= POW_RANGE[1]:
                    raise DslBoundsError("pow_exponent", f"pow exponent must lie in [{POW_RANGE[0]:g}, {POW_RANGE[1]:g}]")
        else:
            raise DslError(f"foreign node {node!r}")
    if size > MAX_SIZE:
        raise DslBoundsError("size_bound", f"tree has {size} nodes, limit is {MAX_SIZE}")
    depth = expr_depth(e)
    if depth > MAX_DEPTH:
        raise DslBoundsError("depth_bound", f"tree depth {depth} exceeds limit {MAX_DEPTH}")
    return e


_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[a-z][a-z0-9_]*)|(?P<sym>[-+*/(),])"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise DslSyntaxError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup
        tokens.append((kind, m.group(), i))
        i = m.end()
    return tokens


class _Parser:
    # hard nesting cap so hostile input fails cleanly instead of overflowing
    # the interpreter stack; real trees are limited to MAX_DEPTH anyway
    MAX_NESTING = 128

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.nesting = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise DslSyntaxError("unexpected end of input", len(self.text))
        self.pos += 1
        return tok

    def expect(self, sym: str):
        tok = self.peek()
        if tok is None or tok[0] != "sym" or tok[1] != sym:
            at = tok[2] if tok else len(self.text)
            raise DslSyntaxError(f"expected '{sym}'", at)
        self.pos += 1

    def parse(self) -> ScoreExpr:
        e = self.expr()
        tok = self.peek()
        if tok is not None:
            raise DslSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expr(self) -> ScoreExpr:
        left = self.term()
        while True:
            tok = self.peek()
            if tok and tok[0] == "sym" and tok[1] in "+-":
                self.pos += 1
                left = Binary(_INFIX[tok[1]], left, self.term())
            else:
                return left

    def term(self) -> ScoreExpr:
        left = self.factor()
        while True:
            tok = self.peek()
            if tok and tok[0] == "sym" and tok[1] in "*/":
                self.pos += 1
                left = Binary(_INFIX[tok[1]], left, self.factor())
            else:
                return left

    def factor(self) -> ScoreExpr:
        self.nesting += 1
        if self.nesting > self.MAX_NESTING:
            raise DslBoundsError("depth_bound", f"nesting exceeds {self.MAX_NESTING}")
        try:
            return self._factor_inner()
        finally:
            self.nesting -= 1

    def _factor_inner(self) -> ScoreExpr:
        tok = self.next()
        kind, text, at = tok
        if kind == "sym" and text == "-":
            nxt = self.peek()
            if nxt and nxt[0] == "num":
                self.pos += 1
                return Const(-float(nxt[1]))
            return Unary("neg", self.factor())
        if kind == "num":
            return Const(float(text))
        if kind == "sym" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "name":
            nxt = self.peek()
            if nxt and nxt[0] == "sym" and nxt[1] == "(":
                return self.call(text, at)
            if text in METRIC_NAMES:
                return Metric(text)
            if text == "khop":
                raise DslArityError("khop requires one integer argument")
            if text in _UNARY_FUNCS or text in AGG_OPS or text in _BINARY_FUNCS:
                raise DslArityError(f"{text} requires arguments")
            raise DslNameError(f"unknown identifier '{text}'")
        raise DslSyntaxError(f"unexpected token {text!r}", at)

    def call(self, name: str, at: int) -> ScoreExpr:
        self.expect("(")
        args = [self.expr()]
        while True:
            tok = self.peek()
            if tok and tok[0] == "sym" and tok[1] == ",":
                self.pos += 1
                args.append(self.expr())
            else:
                break
        self.expect(")")
        if name == "khop":
            if len(args) != 1:
                raise DslArityError(f"khop takes one argument, got {len(args)}")
            arg = args[0]
            if not isinstance(arg, Const):
                raise DslSyntaxError("khop expects an integer literal", at)
            if arg.value != int(arg.value) or not KHOP_RANGE[0] <= arg.value <= KHOP_RANGE[1]:
                raise DslBoundsError("khop_range", f"khop k must be an integer in {KHOP_RANGE[0]}..{KHOP_RANGE[1]}")
            return Metric("khop", int(arg.value))
        if name in _UNARY_FUNCS:
            if len(args) != 1:
                raise DslArityError(f"{name} takes one argument, got {len(args)}")
            return Unary(name, args[0])
        if name in AGG_OPS:
            if len(args) != 1:
                raise DslArityError(f"{name} takes one argument, got {len(args)}")
            return NeighborAgg(name, args[0])
        if name in _BINARY_FUNCS:
            if len(args) != 2:
                raise DslArityError(f"{name} takes two arguments, got {len(args)}")
            if name == "pow":
                if not isinstance(args[1], Const):
                    raise DslBoundsError("pow_exponent", "pow exponent must be a numeric literal")
            return Binary(name, args[0], args[1])
        if name in METRIC_NAMES:
            raise DslArityError(f"{name} takes no arguments")
        raise DslNameError(f"unknown identifier '{name}'")


def parse(text: str) -> ScoreExpr:
    """Parse and validate a scoring expression."""
    return validate_expr(_Parser(text).parse())


def print_canonical(e: ScoreExpr) -> str:
    """Canonical text form; parse(print_canonical(e)) reproduces e exactly."""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Metric):
        return f"khop({e.k})" if e.name == "khop" else e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"-({print_canonical(e.child)})"
        return f"{e.op}({print_canonical(e.child)})"
    if isinstance(e, NeighborAgg):
        return f"{e.op}({print_canonical(e.child)})"
    if e.op in ("min", "max", "pow"):
        return f"{e.op}({print_canonical(e.left)}, {print_canonical(e.right)})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[e.op]
    return f"({print_canonical(e.left)} {sym} {print_canonical(e.right)})"


class MetricCache:
    """Lazily computed per-graph metric vectors, shared across evaluations.

    Entries are read-only float arrays.  Lookups are idempotent and every
    metric is deterministic, so concurrent readers racing on a miss would
    simply store identical arrays; a cache never changes an evaluation.
    """

    def __init__(self, g: Graph):
        self.graph = g
        self._store: dict[tuple[str, int | None], np.ndarray] = {}

    def get(self, name: str, k: int | None = None) -> np.ndarray:
        key = (name, k)
        arr = self._store.get(key)
        if arr is None:
            arr = self._compute(name, k).astype(np.float64)
            arr.setflags(write=False)
            self._store[key] = arr
        return arr

    def _compute(self, name: str, k: int | None) -> np.ndarray:
        g = self.graph
        if name == "degree":
            return graphmod.degrees(g).astype(np.float64)
        if name == "coreness":
            return graphmod.core_decomposition(g).astype(np.float64)
        if name == "betweenness":
            return graphmod.betweenness(g)
        if name == "closeness":
            return graphmod.harmonic_closeness(g)
        if name == "pagerank":
            return graphmod.pagerank(g)
        if name == "eigenvector":
            return graphmod.eigenvector_centrality(g)
        if name == "clustering":
            return graphmod.clustering_coefficients(g)
        if name == "khop":
            return graphmod.khop_counts(g, k).astype(np.float64)
        raise DslNameError(f"unknown metric '{name}'")


def _finite(arr: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(arr), arr, 0.0)


def evaluate(e: ScoreExpr, g: Graph, cache: MetricCache | None = None) -> np.ndarray:
    """Evaluate an expression to one finite float per node.

    Results are pure functions of (expression, graph); an external cache only
    saves recomputation of the metric vectors.
    """
    if g.node_count == 0:
        raise ValueError("cannot score an empty graph")
    if cache is None:
        cache = MetricCache(g)
    elif cache.graph is not g:
        raise ValueError("cache belongs to a different graph")
    out = _eval(e, g, cache)
    return out.copy() if not out.flags.writeable else out


def _eval(e: ScoreExpr, g: Graph, cache: MetricCache) -> np.ndarray:
    v = g.node_count
    if isinstance(e, Const):
        return np.full(v, float(e.value), dtype=np.float64)
    if isinstance(e, Metric):
        return cache.get(e.name, e.k)
    with np.errstate(all="ignore"):
        if isinstance(e, Unary):
            x = _eval(e.child, g, cache)
            if e.op == "neg":
                return _finite(-x)
            if e.op == "abs":
                return _finite(np.abs(x))
            if e.op == "sqrt":
                return _finite(np.sqrt(np.maximum(x, 0.0)))
            if e.op == "log1p":
                return _finite(np.log1p(np.maximum(x, 0.0)))
            if e.op == "normalize":
                lo, hi = x.min(), x.max()
                if hi > lo:
                    return _finite((x - lo) / (hi - lo))
                return np.zeros(v, dtype=np.float64)
            if e.op == "rank":
                return _finite((rankdata(x, method="average") - 1.0) / max(v - 1, 1))
            raise DslNameError(f"unknown unary op '{e.op}'")
        if isinstance(e, NeighborAgg):
            x = _eval(e.child, g, cache)
            esrc, edst = g.edge_arrays()
            deg = np.diff(g.indptr)
            if e.op == "nsum":
                return _finite(sorted_segment_sum(x[edst], esrc, v))
            if e.op == "nmean":
                total = sorted_segment_sum(x[edst], esrc, v)
                return _finite(np.where(deg > 0, total / np.maximum(deg, 1), 0.0))
            if e.op == "nmax":
                out = np.full(v, -np.inf)
                np.maximum.at(out, esrc, x[edst])
                out[deg == 0] = 0.0
                return _finite(out)
            raise DslNameError(f"unknown aggregation '{e.op}'")
        if isinstance(e, Binary):
            a = _eval(e.left, g, cache)
            if e.op == "pow":
                c = float(e.right.value)
                if c == int(c):
                    r = a ** c
                else:
                    r = np.sign(a) * np.abs(a) ** c
                return _finite(r)
            b = _eval(e.right, g, cache)
            if e.op == "add":
                return _finite(a + b)
            if e.op == "sub":
                return _finite(a - b)
            if e.op == "mul":
                return _finite(a * b)
            if e.op == "div":
                safe = np.where(b == 0.0, 1.0, b)
                return _finite(np.where(b == 0.0, 0.0, a / safe))
            if e.op == "min":
                return _finite(np.minimum(a, b))
            if e.op == "max":
                return _finite(np.maximum(a, b))
            raise DslNameError(f"unknown binary op '{e.op}'")
    raise DslError(f"cannot evaluate {e!r}")


_CONST_POOL = (0.001, 0.01, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0)
_POW_POOL = (-4.0, -3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0, 4.0)


def random_expr(seed: int, max_depth: int = 5) -> ScoreExpr:
    """Seeded random expression; always valid against every invariant."""
    if not 1 <= max_depth <= MAX_DEPTH:
        raise ValueError(f"max_depth must be in 1..{MAX_DEPTH}")
    rng = random.Random(seed)
    while True:
        e = _random_tree(rng, max_depth)
        try:
            return validate_expr(e)
        except DslError:
            continue


def _random_leaf(rng: random.Random) -> ScoreExpr:
    if rng.random() < 0.75:
        name = rng.choice(METRIC_NAMES + ("khop",))
        if name == "khop":
            return Metric("khop", rng.randint(*KHOP_RANGE))
        return Metric(name)
    return Const(rng.choice(_CONST_POOL))


def _random_tree(rng: random.Random, depth_left: int) -> ScoreExpr:
    if depth_left <= 1:
        return _random_leaf(rng)
    roll = rng.random()
    if roll < 0.30:
        return _random_leaf(rng)
    if roll < 0.55:
        op = rng.choice(UNARY_OPS)
        return Unary(op, _random_tree(rng, depth_left - 1))
    if roll < 0.70:
        op = rng.choice(AGG_OPS)
        return NeighborAgg(op, _random_tree(rng, depth_left - 1))
    op = rng.choice(BINARY_OPS)
    if op == "pow":
        return Binary("pow", _random_tree(rng, depth_left - 1), Const(rng.choice(_POW_POOL)))
    return Binary(op, _random_tree(rng, depth_left - 1), _random_tree(rng, depth_left - 1))
