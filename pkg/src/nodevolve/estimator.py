"""Estimator facade: fit discovers a scoring expression, predict flags nodes.

fit() runs the evolutionary search on one structure; the fitted expression
then scores or flags nodes on any structure, so a function learned on a
small instance can be applied to larger ones.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from nodevolve.dismantle import removal_size, top_l_by_score
from nodevolve.dsl import evaluate
from nodevolve.engine import EvolutionConfig, run
from nodevolve.graph import Graph, read_edge_list


def as_graph(X) -> Graph:
    """Coerce common inputs to a Graph.

    Accepts a Graph, a path to an edge-list file, a square 0/1 adjacency
    matrix (dense or scipy sparse), an (n, 2) integer array of edges, or a
    sequence of edge pairs.
    """
    if isinstance(X, Graph):
        return X
    if isinstance(X, (str, Path)):
        return read_edge_list(X)
    if sparse.issparse(X):
        return Graph.from_adjacency(X.toarray())
    if isinstance(X, np.ndarray):
        if X.ndim == 2 and X.shape[0] == X.shape[1] and X.shape[0] != 2:
            return Graph.from_adjacency(X)
        if X.ndim == 2 and X.shape[1] == 2:
            if not np.issubdtype(X.dtype, np.integer):
                raise TypeError("edge arrays must be integer-valued")
            return Graph.from_edges([(int(a), int(b)) for a, b in X])
        if X.ndim == 2 and X.shape == (2, 2):
            return Graph.from_adjacency(X)
        raise TypeError(f"cannot interpret array of shape {X.shape} as a structure")
    if isinstance(X, (list, tuple)):
        return Graph.from_edges([(int(a), int(b)) for a, b in X])
    raise TypeError(f"cannot interpret {type(X).__name__} as a structure")


class EvolvedNodeScorer(BaseEstimator):
    """Discovers a node-scoring expression by evolutionary search.

    Parameters mirror EvolutionConfig; `operator` optionally injects a
    variation operator (the seeded offline one is used when omitted).

    Fitted attributes: best_expr_, best_text_, best_fitness_, records_,
    result_.
    """

    def __init__(
        self,
        epochs: int = 100,
        theta: float = 0.3,
        tau: float = 0.93,
        capacity: int = 10,
        max_populations: int = 32,
        fraction: float = 0.2,
        fitness_mode: str = "anc",
        denominator: str = "removal",
        master_seed: int = 0,
        inter_pairs: int = 1,
        max_offspring: int = 2,
        no_population_mgmt: bool = False,
        single_epoch: bool = False,
        no_manual_init: bool = False,
        no_mgmt_parents: int = 5,
        wall_clock_budget: float | None = None,
        operator=None,
    ):
        self.epochs = epochs
        self.theta = theta
        self.tau = tau
        self.capacity = capacity
        self.max_populations = max_populations
        self.fraction = fraction
        self.fitness_mode = fitness_mode
        self.denominator = denominator
        self.master_seed = master_seed
        self.inter_pairs = inter_pairs
        self.max_offspring = max_offspring
        self.no_population_mgmt = no_population_mgmt
        self.single_epoch = single_epoch
        self.no_manual_init = no_manual_init
        self.no_mgmt_parents = no_mgmt_parents
        self.wall_clock_budget = wall_clock_budget
        self.operator = operator

    def _config(self) -> EvolutionConfig:
        return EvolutionConfig(
            epochs=self.epochs,
            theta=self.theta,
            tau=self.tau,
            capacity=self.capacity,
            max_populations=self.max_populations,
            fraction=self.fraction,
            fitness_mode=self.fitness_mode,
            denominator=self.denominator,
            master_seed=self.master_seed,
            inter_pairs=self.inter_pairs,
            max_offspring=self.max_offspring,
            no_population_mgmt=self.no_population_mgmt,
            single_epoch=self.single_epoch,
            no_manual_init=self.no_manual_init,
            no_mgmt_parents=self.no_mgmt_parents,
            wall_clock_budget=self.wall_clock_budget,
        )

    def fit(self, X, y=None):
        """Run the search on one structure; y is ignored."""
        g = as_graph(X)
        result = run(g, self._config(), operator=self.operator)
        self.best_expr_ = result.best.expr
        self.best_text_ = result.best.text
        self.best_fitness_ = result.best.fitness
        self.records_ = result.records
        self.result_ = result
        return self

    def transform(self, X) -> np.ndarray:
        """Score every node of X with the fitted expression."""
        check_is_fitted(self, "best_expr_")
        return evaluate(self.best_expr_, as_graph(X))

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)

    def predict(self, X) -> np.ndarray:
        """Flag the top-scored fraction of nodes with 1, the rest with 0."""
        check_is_fitted(self, "best_expr_")
        g = as_graph(X)
        scores = evaluate(self.best_expr_, g)
        l = removal_size(g.node_count, self.fraction)
        flags = np.zeros(g.node_count, dtype=np.int64)
        flags[top_l_by_score(scores, l)] = 1
        return flags

    def score(self, X, y=None) -> float:
        """Dismantling quality of the fitted expression on X (higher is better)."""
        check_is_fitted(self, "best_expr_")
        from nodevolve.dismantle import fitness

        return fitness(
            as_graph(X),
            self.best_expr_,
            fraction=self.fraction,
            mode=self.fitness_mode,
            denominator=self.denominator,
        )
