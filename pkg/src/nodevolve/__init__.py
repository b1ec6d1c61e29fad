"""Evolutionary search over a metric-expression DSL for network dismantling."""

from nodevolve.baselines import (
    BASELINE_NAMES,
    CoreHdAdaptive,
    DegreeAdaptive,
    WeakNeighborAdaptive,
    make_strategy,
    run_baseline,
)
from nodevolve.dismantle import (
    AncCurve,
    DismantleError,
    Strategy,
    anc,
    dismantle_adaptive,
    fitness,
    removal_size,
    top_l_by_score,
)
from nodevolve.dsl import (
    AGG_OPS,
    BINARY_OPS,
    METRIC_NAMES,
    UNARY_OPS,
    Binary,
    Const,
    DslArityError,
    DslBoundsError,
    DslError,
    DslNameError,
    DslSyntaxError,
    Metric,
    MetricCache,
    NeighborAgg,
    ScoreExpr,
    Unary,
    evaluate,
    expr_depth,
    expr_size,
    parse,
    print_canonical,
    random_expr,
    validate_expr,
)
from nodevolve.engine import (
    EpochRecord,
    EvolutionConfig,
    RunResult,
    run,
    subseed,
    write_run_dir,
)
from nodevolve.estimator import EvolvedNodeScorer, as_graph
from nodevolve.graph import (
    ComponentPartition,
    EdgeListParseError,
    Graph,
    betweenness,
    clustering_coefficients,
    connected_components,
    core_decomposition,
    degrees,
    eigenvector_centrality,
    generate_ba,
    harmonic_closeness,
    khop_counts,
    load_edge_list,
    new_mask,
    pagerank,
    pairwise_connectivity,
    read_edge_list,
    write_edge_list,
)
from nodevolve.llm import ChatClient, LlmEndpointConfig, LlmTransportError
from nodevolve.population import (
    EMBED_DIM,
    Individual,
    PlacementReport,
    Population,
    PopulationSet,
    cosine_similarity,
    embed,
    initial_functions,
    select_parents,
)
from nodevolve.variation import (
    LlmVariation,
    MockVariation,
    VariationOperator,
    VariationReport,
    extract_code_blocks,
    validate_offspring,
)

__version__ = "0.1.0"
