"""Command-line interface.

Four subcommands:

* ``evolve``    -- run the evolutionary search on a graph and write a run dir.
* ``dismantle`` -- remove a node fraction with one method, write curve + list.
* ``compare``   -- rank several removal methods on one graph.
* ``synth``     -- generate a preferential-attachment benchmark graph.

Exit codes: 0 success, 2 argument/config problems (including missing input
files and a missing API key, checked before any network traffic), 1 runtime
failure.

Settings resolve in three layers: built-in defaults, then an optional JSON
config file (``--config``), then explicit command-line flags.  Unknown config
keys are rejected.  Every run writes the fully resolved configuration to
``config.json`` in its output directory, sufficient to reproduce the run in
mock mode.  API keys come only from the environment (``NODEVOLVE_API_KEY``,
falling back to ``OPENAI_API_KEY``) and are never written to disk; only the
name of the variable that supplied the key is recorded.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Callable, Sequence

from .baselines import BASELINE_NAMES, run_baseline
from .dismantle import AncCurve, DismantleError, anc, removal_size, top_l_by_score
from .dsl import DslError, MetricCache, evaluate, parse, print_canonical
from .engine import EvolutionConfig, run
from .graph import EdgeListParseError, Graph, generate_ba, read_edge_list, write_edge_list
from .llm import ChatClient, LlmEndpointConfig, LlmTransportError
from .variation import LlmVariation, MockVariation, VariationOperator

API_KEY_ENV = "NODEVOLVE_API_KEY"
API_KEY_FALLBACK_ENV = "OPENAI_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"

_ENGINE_KEYS = tuple(f.name for f in fields(EvolutionConfig))
_LLM_KEYS = (
    "base_url",
    "model_name",
    "temperature_crossover",
    "temperature_mutation",
    "timeout",
    "max_retries",
    "parallelism",
)
_APP_KEYS = (
    "graph",
    "out",
    "operator",
    "mock_fallback",
    "transcripts",
    "llm",
    "method",
    "methods",
    "expr_file",
    "seed",
    "seeds",
)
_CONFIG_KEYS = frozenset(_ENGINE_KEYS) | frozenset(_APP_KEYS)


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit code 2."""


def _load_config_file(path: str) -> dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {p} must hold a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise UsageError("unknown config keys: " + ", ".join(unknown))
    llm = data.get("llm")
    if llm is not None:
        if not isinstance(llm, dict):
            raise UsageError("config key 'llm' must be an object")
        if "api_key" in llm:
            raise UsageError(
                "api keys are read from the environment "
                f"({API_KEY_ENV} or {API_KEY_FALLBACK_ENV}), never from config files"
            )
        bad = sorted(set(llm) - set(_LLM_KEYS))
        if bad:
            raise UsageError("unknown llm config keys: " + ", ".join(bad))
    return data


def _pick(flag_value: Any, cfg: dict[str, Any], key: str, default: Any) -> Any:
    """Flag beats config file beats default; None marks an unset flag."""
    if flag_value is not None:
        return flag_value
    if key in cfg and cfg[key] is not None:
        return cfg[key]
    return default


def _resolve_api_key() -> tuple[str, str]:
    for name in (API_KEY_ENV, API_KEY_FALLBACK_ENV):
        value = os.environ.get(name, "")
        if value:
            return value, name
    raise UsageError(
        f"--operator llm needs an api key in {API_KEY_ENV} "
        f"(or {API_KEY_FALLBACK_ENV}); refusing to start without one"
    )


def _load_graph(path: str | Path) -> Graph:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"graph file not found: {p}")
    try:
        return read_edge_list(p)
    except EdgeListParseError as exc:
        raise UsageError(f"cannot parse edge list {p}: {exc}") from exc


def _load_expr_file(path: str | Path):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"expression file not found: {p}")
    text = p.read_text().strip()
    if not text:
        raise UsageError(f"expression file is empty: {p}")
    try:
        return parse(text)
    except DslError as exc:
        raise UsageError(f"cannot parse expression in {p}: {exc}") from exc


def _check_fraction(fraction: float) -> float:
    fraction = float(fraction)
    if not 0.0 < fraction <= 1.0:
        raise UsageError(f"fraction must be in (0, 1], got {fraction!r}")
    return fraction


def _check_denominator(denominator: str) -> str:
    if denominator not in ("removal", "nodes"):
        raise UsageError(f"unknown denominator {denominator!r}")
    return denominator


def _write_app_config(out_dir: Path, app: dict[str, Any]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = json.dumps({"app": app}, indent=2, sort_keys=True) + "\n"
    (out_dir / "config.json").write_text(payload)


def _transcript_writer(run_dir: Path) -> Callable[[str, str, str], None]:
    folder = run_dir / "transcripts"
    folder.mkdir(parents=True, exist_ok=True)
    counter = itertools.count()
    def record(kind: str, prompt: str, reply: str) -> None:
        path = folder / f"{next(counter):04d}-{kind}.txt"
        path.write_text(f"=== prompt ===\n{prompt}\n=== reply ===\n{reply}\n")
    return record


def _build_operator(
    operator_name: str,
    args: argparse.Namespace,
    cfg: dict[str, Any],
    max_offspring: int,
    run_dir: Path,
    transcripts: bool,
    mock_fallback: bool,
) -> tuple[VariationOperator, dict[str, Any] | None, str | None]:
    """Returns (operator, serializable llm settings or None, key env name or None)."""
    if operator_name == "mock":
        return MockVariation(max_offspring=max_offspring), None, None
    if operator_name != "llm":
        raise UsageError(f"unknown operator {operator_name!r}")
    llm_cfg = dict(cfg.get("llm") or {})
    settings = {
        "base_url": _pick(args.base_url, llm_cfg, "base_url", DEFAULT_BASE_URL),
        "model_name": _pick(args.model, llm_cfg, "model_name", ""),
        "temperature_crossover": float(
            _pick(args.temperature_crossover, llm_cfg, "temperature_crossover", 1.0)
        ),
        "temperature_mutation": float(
            _pick(args.temperature_mutation, llm_cfg, "temperature_mutation", 1.5)
        ),
        "timeout": float(_pick(args.timeout, llm_cfg, "timeout", 60.0)),
        "max_retries": int(_pick(args.max_retries, llm_cfg, "max_retries", 3)),
        "parallelism": int(_pick(args.parallelism, llm_cfg, "parallelism", 4)),
    }
    if not settings["model_name"]:
        raise UsageError("--operator llm needs --model (or config llm.model_name)")
    api_key, key_env = _resolve_api_key()
    try:
        endpoint = LlmEndpointConfig(api_key=api_key, **settings)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    on_exchange = _transcript_writer(run_dir) if transcripts else None
    operator = LlmVariation(
        ChatClient(endpoint),
        max_offspring=max_offspring,
        mock_fallback=mock_fallback,
        on_exchange=on_exchange,
    )
    return operator, settings, key_env


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config) if args.config else {}
    engine_kwargs: dict[str, Any] = {}
    for field in fields(EvolutionConfig):
        flag_attr = "seed" if field.name == "master_seed" else field.name
        value = getattr(args, flag_attr, None)
        if value is None:
            value = cfg.get(field.name)
        if value is not None:
            engine_kwargs[field.name] = value
    try:
        config = EvolutionConfig(**engine_kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc

    graph_path = _pick(args.graph, cfg, "graph", None)
    if not graph_path:
        raise UsageError("evolve needs --graph (or config key 'graph')")
    g = _load_graph(graph_path)

    operator_name = _pick(args.operator, cfg, "operator", "mock")
    mock_fallback = bool(_pick(args.mock_fallback, cfg, "mock_fallback", False))
    transcripts = bool(_pick(args.transcripts, cfg, "transcripts", False))
    if transcripts and operator_name != "llm":
        raise UsageError("--transcripts only applies to --operator llm")
    stem = Path(graph_path).stem or "graph"
    out = _pick(
        args.out, cfg, "out", f"runs/evolve-{stem}-{operator_name}-seed{config.master_seed}"
    )
    run_dir = Path(out)
    operator, llm_settings, key_env = _build_operator(
        operator_name, args, cfg, config.max_offspring, run_dir, transcripts, mock_fallback
    )
    app = {
        "command": "evolve",
        "graph": str(graph_path),
        "out": str(run_dir),
        "operator": operator_name,
        "mock_fallback": mock_fallback,
        "transcripts": transcripts,
        "llm": llm_settings,
        "api_key_env": key_env,
    }
    result = run(g, config=config, operator=operator, run_dir=run_dir, extra_config={"app": app})
    best = result.best
    print(f"best {best.text}")
    print(f"fitness {best.fitness!r}")
    print(f"run dir {run_dir}")
    return 0


def _expr_removal(g: Graph, expr, fraction: float, denominator: str) -> tuple[list[int], AncCurve]:
    try:
        count = removal_size(g.node_count, fraction)
    except DismantleError as exc:
        raise UsageError(str(exc)) from exc
    scores = evaluate(expr, g, MetricCache(g))
    removal = top_l_by_score(scores, count)
    return removal, anc(g, removal, denominator=denominator)


def cmd_dismantle(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config) if args.config else {}
    graph_path = _pick(args.graph, cfg, "graph", None)
    if not graph_path:
        raise UsageError("dismantle needs --graph (or config key 'graph')")
    method = _pick(args.method, cfg, "method", None)
    if not method:
        raise UsageError("dismantle needs --method (dc, corehd, wn, or expr)")
    if method not in BASELINE_NAMES + ("expr",):
        raise UsageError(f"unknown method {method!r}")
    fraction = _check_fraction(_pick(args.fraction, cfg, "fraction", 0.2))
    denominator = _check_denominator(_pick(args.denominator, cfg, "denominator", "removal"))
    seed = int(_pick(args.seed, cfg, "seed", 0))
    expr_file = _pick(args.expr_file, cfg, "expr_file", None)
    expr_text = None
    if method == "expr":
        if not expr_file:
            raise UsageError("--method expr needs --expr-file")
        expr = _load_expr_file(expr_file)
        expr_text = print_canonical(expr)
    g = _load_graph(graph_path)

    if method == "expr":
        try:
            removal, curve = _expr_removal(g, expr, fraction, denominator)
        except DismantleError as exc:
            raise UsageError(str(exc)) from exc
    else:
        try:
            removal, curve = run_baseline(
                g, method, fraction=fraction, seed=seed, denominator=denominator
            )
        except DismantleError as exc:
            raise UsageError(str(exc)) from exc

    stem = Path(graph_path).stem or "graph"
    out_dir = Path(_pick(args.out, cfg, "out", f"runs/dismantle-{stem}-{method}"))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "removal.txt").write_text(
        "\n".join(g.labels[i] for i in removal) + "\n"
    )
    curve.write_csv(out_dir / "anc.csv")
    _write_app_config(
        out_dir,
        {
            "command": "dismantle",
            "graph": str(graph_path),
            "method": method,
            "expr_file": str(expr_file) if expr_file else None,
            "expr": expr_text,
            "fraction": fraction,
            "denominator": denominator,
            "seed": seed,
            "out": str(out_dir),
            "removed": len(removal),
        },
    )
    print(f"method {method}")
    print(f"removed {len(removal)} of {g.node_count} nodes")
    print(f"anc {curve.value!r}")
    print(f"out dir {out_dir}")
    return 0


def _competition_ranks(values: Sequence[float]) -> list[int]:
    """Ascending competition ranking: ties share the smallest rank."""
    return [1 + sum(1 for other in values if other < value) for value in values]


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config) if args.config else {}
    graph_path = _pick(args.graph, cfg, "graph", None)
    if not graph_path:
        raise UsageError("compare needs --graph (or config key 'graph')")
    methods = _pick(args.methods, cfg, "methods", list(BASELINE_NAMES))
    if not isinstance(methods, (list, tuple)):
        raise UsageError("config key 'methods' must be a list")
    methods = [str(m) for m in methods]
    if not methods:
        raise UsageError("compare needs at least one method")
    for m in methods:
        if m not in BASELINE_NAMES:
            raise UsageError(f"unknown method {m!r} (choose from {', '.join(BASELINE_NAMES)})")
    if len(set(methods)) != len(methods):
        raise UsageError("duplicate methods in list")
    fraction = _check_fraction(_pick(args.fraction, cfg, "fraction", 0.2))
    denominator = _check_denominator(_pick(args.denominator, cfg, "denominator", "removal"))
    seed = int(_pick(args.seed, cfg, "seed", 0))
    seeds = int(_pick(args.seeds, cfg, "seeds", 1))
    if seeds < 1:
        raise UsageError(f"seeds must be >= 1, got {seeds}")
    expr_file = _pick(args.expr_file, cfg, "expr_file", None)
    expr = _load_expr_file(expr_file) if expr_file else None
    g = _load_graph(graph_path)

    rows: list[dict[str, Any]] = []
    for name in methods:
        values = []
        for offset in range(seeds):
            _, curve = run_baseline(
                g, name, fraction=fraction, seed=seed + offset, denominator=denominator
            )
            values.append(curve.value)
        rows.append({"name": name, "anc": sum(values) / len(values)})
    if expr is not None:
        try:
            _, curve = _expr_removal(g, expr, fraction, denominator)
        except DismantleError as exc:
            raise UsageError(str(exc)) from exc
        rows.append({"name": "evolved", "anc": curve.value})

    ranks = _competition_ranks([row["anc"] for row in rows])
    for row, rank in zip(rows, ranks):
        row["rank"] = rank
    rows.sort(key=lambda row: (row["anc"], row["name"]))

    stem = Path(graph_path).stem or "graph"
    out_dir = Path(_pick(args.out, cfg, "out", f"runs/compare-{stem}"))
    report = {
        "graph": {"path": str(graph_path), "nodes": g.node_count, "edges": g.edge_count},
        "fraction": fraction,
        "denominator": denominator,
        "seed": seed,
        "seeds": seeds,
        "methods": rows,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_app_config(
        out_dir,
        {
            "command": "compare",
            "graph": str(graph_path),
            "methods": methods,
            "expr_file": str(expr_file) if expr_file else None,
            "fraction": fraction,
            "denominator": denominator,
            "seed": seed,
            "seeds": seeds,
            "out": str(out_dir),
        },
    )
    width = max(len(row["name"]) for row in rows)
    print(f"{'method'.ljust(width)}  {'anc'.ljust(10)}  rank")
    for row in rows:
        print(f"{row['name'].ljust(width)}  {row['anc']:<10.6f}  {row['rank']}")
    print(f"out dir {out_dir}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    n, m, seed = args.n, args.m, args.seed
    try:
        g = generate_ba(n, m, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out or f"ba-n{n}-m{m}-seed{seed}.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, out, header=f"synth ba n={n} m={m} seed={seed}")
    print(f"wrote {out} ({g.node_count} nodes, {g.edge_count} edges)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodevolve",
        description="Evolve and evaluate node-scoring functions for network dismantling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    evolve = sub.add_parser("evolve", help="run the evolutionary search on a graph")
    evolve.add_argument("--graph", help="edge-list file")
    evolve.add_argument("--operator", choices=("mock", "llm"), help="variation operator")
    evolve.add_argument("--seed", type=int, help="master seed")
    evolve.add_argument("--epochs", type=int, help="number of evolution epochs")
    evolve.add_argument("--theta", type=float, help="mutation probability per offspring")
    evolve.add_argument("--tau", type=float, help="population similarity threshold")
    evolve.add_argument("--capacity", type=int, help="individuals per population")
    evolve.add_argument("--max-populations", dest="max_populations", type=int)
    evolve.add_argument("--fraction", type=float, help="node fraction to remove")
    evolve.add_argument("--fitness-mode", dest="fitness_mode", choices=("anc", "terminal"))
    evolve.add_argument("--denominator", choices=("removal", "nodes"))
    evolve.add_argument("--inter-pairs", dest="inter_pairs", type=int)
    evolve.add_argument("--max-offspring", dest="max_offspring", type=int)
    evolve.add_argument(
        "--no-population-mgmt", dest="no_population_mgmt", action="store_true", default=None
    )
    evolve.add_argument("--single-epoch", dest="single_epoch", action="store_true", default=None)
    evolve.add_argument(
        "--no-manual-init", dest="no_manual_init", action="store_true", default=None
    )
    evolve.add_argument("--no-mgmt-parents", dest="no_mgmt_parents", type=int)
    evolve.add_argument("--wall-clock-budget", dest="wall_clock_budget", type=float)
    evolve.add_argument("--out", help="run directory (default under runs/)")
    evolve.add_argument("--config", help="JSON config file; flags override it")
    evolve.add_argument("--base-url", dest="base_url", help="chat-completions endpoint base")
    evolve.add_argument("--model", help="model name for --operator llm")
    evolve.add_argument("--temperature-crossover", dest="temperature_crossover", type=float)
    evolve.add_argument("--temperature-mutation", dest="temperature_mutation", type=float)
    evolve.add_argument("--timeout", type=float, help="request timeout in seconds")
    evolve.add_argument("--max-retries", dest="max_retries", type=int)
    evolve.add_argument("--parallelism", type=int, help="concurrent llm requests")
    evolve.add_argument(
        "--mock-fallback", dest="mock_fallback", action="store_true", default=None,
        help="fall back to the mock operator when the llm endpoint fails",
    )
    evolve.add_argument(
        "--transcripts", action="store_true", default=None,
        help="record llm prompts and replies under the run directory",
    )
    evolve.set_defaults(handler=cmd_evolve)

    dismantle = sub.add_parser("dismantle", help="remove a node fraction with one method")
    dismantle.add_argument("--graph", help="edge-list file")
    dismantle.add_argument("--method", choices=BASELINE_NAMES + ("expr",))
    dismantle.add_argument("--expr-file", dest="expr_file", help="scoring expression file")
    dismantle.add_argument("--fraction", type=float, help="node fraction to remove")
    dismantle.add_argument("--denominator", choices=("removal", "nodes"))
    dismantle.add_argument("--seed", type=int, help="tie-break seed for corehd")
    dismantle.add_argument("--out", help="output directory")
    dismantle.add_argument("--config", help="JSON config file; flags override it")
    dismantle.set_defaults(handler=cmd_dismantle)

    compare = sub.add_parser("compare", help="rank several removal methods on one graph")
    compare.add_argument("--graph", help="edge-list file")
    compare.add_argument(
        "--methods", nargs="*", default=None,
        help=f"methods to compare (default: {' '.join(BASELINE_NAMES)})",
    )
    compare.add_argument("--expr-file", dest="expr_file", help="adds an 'evolved' row")
    compare.add_argument("--fraction", type=float, help="node fraction to remove")
    compare.add_argument("--denominator", choices=("removal", "nodes"))
    compare.add_argument("--seed", type=int, help="base seed for stochastic methods")
    compare.add_argument("--seeds", type=int, help="average each method over this many seeds")
    compare.add_argument("--out", help="output directory")
    compare.add_argument("--config", help="JSON config file; flags override it")
    compare.set_defaults(handler=cmd_compare)

    synth = sub.add_parser("synth", help="generate a preferential-attachment graph")
    synth.add_argument("--n", type=int, required=True, help="node count")
    synth.add_argument("--m", type=int, required=True, help="edges per new node")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", help="output file (default ba-n<n>-m<m>-seed<seed>.txt)")
    synth.set_defaults(handler=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DslError, DismantleError, EdgeListParseError, LlmTransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
