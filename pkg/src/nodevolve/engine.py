"""The evolutionary search loop over scoring expressions.

Epoch 0 measures ten starting expressions and installs each as its own
pool. Every later epoch first measures and routes the offspring produced by
the previous epoch, then selects parents, recombines them, and mutates each
offspring with a fixed probability; that batch waits for the next epoch.
The loop ends after a fixed epoch count (the last batch is left unmeasured)
or when an optional wall-clock budget runs out.

Every random draw is keyed by a hash of the master seed and the draw's
coordinates, so identical configurations replay identical runs and the
run.jsonl log is byte-identical across repeats.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from nodevolve.dismantle import fitness
from nodevolve.dsl import MetricCache, ScoreExpr, random_expr
from nodevolve.graph import Graph
from nodevolve.population import (
    Individual,
    PopulationSet,
    initial_functions,
    select_parents,
)
from nodevolve.variation import MockVariation, VariationOperator, VariationReport

INITIAL_COUNT = 10
SELECTION_RETRIES = 3


def subseed(master_seed: int, *parts) -> int:
    """Stable child seed for one named draw within a run."""
    key = ":".join([str(master_seed)] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


@dataclass
class EvolutionConfig:
    epochs: int = 100
    theta: float = 0.3
    tau: float = 0.93
    capacity: int = 10
    max_populations: int = 32
    fraction: float = 0.2
    fitness_mode: str = "anc"
    denominator: str = "removal"
    master_seed: int = 0
    inter_pairs: int = 1
    max_offspring: int = 2
    no_population_mgmt: bool = False
    single_epoch: bool = False
    no_manual_init: bool = False
    no_mgmt_parents: int = 5
    wall_clock_budget: float | None = None

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.capacity < 1 or self.max_populations < 1:
            raise ValueError("capacity and max_populations must be positive")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if self.fitness_mode not in ("anc", "terminal"):
            raise ValueError("fitness_mode must be 'anc' or 'terminal'")
        if self.denominator not in ("removal", "nodes"):
            raise ValueError("denominator must be 'removal' or 'nodes'")
        if self.inter_pairs < 0:
            raise ValueError("inter_pairs must be non-negative")
        if self.max_offspring < 1:
            raise ValueError("max_offspring must be positive")
        if self.no_mgmt_parents < 2:
            raise ValueError("no_mgmt_parents must be at least 2")
        if self.wall_clock_budget is not None and self.wall_clock_budget <= 0:
            raise ValueError("wall_clock_budget must be positive when set")


@dataclass
class EpochRecord:
    """One epoch's activity, JSON-friendly and free of timestamps.

    counts.generated/accepted/discarded cover this epoch's variation work
    (discarded also folds in this epoch's capacity rejections, since the
    two discard sources share one key); evaluated/inserted describe the
    incoming batch measured at epoch start. Fitness figures are the state
    after that measurement.
    """

    epoch: int
    counts: dict[str, int]
    evaluated: int
    inserted: int
    new_populations: int
    mutations_applied: int
    selection_attempts: int
    population_count: int
    individual_count: int
    best_fitness: float
    best_text: str
    mean_fitness: float
    population_stats: list[dict] = field(default_factory=list)


@dataclass
class RunResult:
    best: Individual
    populations: PopulationSet
    records: list[EpochRecord]
    config: EvolutionConfig


def _population_stats(pset: PopulationSet) -> list[dict]:
    stats = []
    for i, pop in enumerate(pset.populations):
        if not pop.members:
            continue
        stats.append(
            {
                "population": i,
                "size": len(pop),
                "mean_fitness": pop.mean_fitness(),
                "best_fitness": pop.best().fitness,
            }
        )
    return stats


def _snapshot_record(pset: PopulationSet, **kwargs) -> EpochRecord:
    everyone = pset.individuals()
    best = pset.best()
    mean = sum(m.fitness for m in everyone) / len(everyone)
    return EpochRecord(
        population_count=len(pset.populations),
        individual_count=len(everyone),
        best_fitness=best.fitness,
        best_text=best.text,
        mean_fitness=mean,
        population_stats=_population_stats(pset),
        **kwargs,
    )


class _Tally:
    """Accumulates the four shared counters across variation and routing."""

    def __init__(self):
        self.generated = 0
        self.accepted = 0
        self.discarded = 0
        self.evicted = 0

    def add_report(self, report: VariationReport) -> None:
        self.generated += report.requested
        self.accepted += len(report.accepted)
        self.discarded += len(report.discarded)

    def as_counts(self) -> dict[str, int]:
        return {
            "generated": self.generated,
            "accepted": self.accepted,
            "discarded": self.discarded,
            "evicted": self.evicted,
        }


def _map_ordered(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _pair_up(parents: list[Individual]) -> list[tuple[Individual, Individual]]:
    return [(parents[i], parents[i + 1]) for i in range(0, len(parents) - 1, 2)]


def _uniform_parents(pset: PopulationSet, rng: random.Random, count: int) -> list[Individual]:
    pool = pset.individuals()
    if len(pool) >= count:
        return rng.sample(pool, count)
    return [pool[rng.randrange(len(pool))] for _ in range(count)]


class _Evolution:
    def __init__(self, g: Graph, config: EvolutionConfig, operator: VariationOperator):
        self.g = g
        self.config = config
        self.operator = operator
        self.cache = MetricCache(g)
        self.pset = PopulationSet(
            tau=config.tau,
            capacity=config.capacity,
            max_populations=config.max_populations,
            unmanaged=config.no_population_mgmt,
        )
        self.workers = int(getattr(operator, "parallelism", 1))

    def fitness_of(self, expr: ScoreExpr) -> float:
        return fitness(
            self.g,
            expr,
            fraction=self.config.fraction,
            mode=self.config.fitness_mode,
            cache=self.cache,
            denominator=self.config.denominator,
        )

    def seed_initials(self) -> EpochRecord:
        cfg = self.config
        if cfg.no_manual_init:
            exprs = [random_expr(subseed(cfg.master_seed, "init", i)) for i in range(INITIAL_COUNT)]
        else:
            exprs = initial_functions()
        for expr in exprs:
            ind = self.pset.new_individual(expr, self.fitness_of(expr), epoch=0)
            if cfg.no_population_mgmt:
                self.pset.classify(ind)
            else:
                self.pset.install(ind)
        return _snapshot_record(
            self.pset,
            epoch=0,
            counts=_Tally().as_counts(),
            evaluated=len(exprs),
            inserted=len(exprs),
            new_populations=len(self.pset.populations),
            mutations_applied=0,
            selection_attempts=0,
        )

    def classify_batch(self, exprs: list[ScoreExpr], epoch: int, tally: _Tally) -> tuple[int, int, int]:
        evaluated = inserted = new_pops = 0
        for expr in exprs:
            ind = self.pset.new_individual(expr, self.fitness_of(expr), epoch=epoch)
            report = self.pset.classify(ind)
            evaluated += 1
            if report.inserted:
                inserted += 1
            else:
                tally.discarded += 1
            if report.created_population:
                new_pops += 1
            if report.evicted_id is not None:
                tally.evicted += 1
        return evaluated, inserted, new_pops

    def select(self, epoch: int, attempt: int) -> list[Individual]:
        cfg = self.config
        seed = subseed(cfg.master_seed, "select", epoch, attempt)
        if cfg.single_epoch:
            return sorted(self.pset.individuals(), key=lambda m: m.id)
        if cfg.no_population_mgmt:
            return _uniform_parents(self.pset, random.Random(seed), cfg.no_mgmt_parents)
        return select_parents(self.pset, seed=seed, inter_pairs=cfg.inter_pairs)

    def generate(self, epoch: int, tally: _Tally) -> tuple[list[ScoreExpr], int, int]:
        """Crossover with retries on an empty yield, then probabilistic mutation."""
        cfg = self.config
        offspring: list[ScoreExpr] = []
        attempts = 0
        for attempt in range(SELECTION_RETRIES + 1):
            attempts = attempt + 1
            parents = self.select(epoch, attempt)
            pairs = _pair_up(parents)
            if not pairs:
                break

            def cross(job):
                i, (a, b) = job
                return self.operator.crossover(
                    a.expr,
                    a.fitness,
                    b.expr,
                    b.fitness,
                    seed=subseed(cfg.master_seed, "xover", epoch, attempt, i),
                )

            reports = _map_ordered(cross, list(enumerate(pairs)), self.workers)
            for report in reports:
                tally.add_report(report)
                offspring.extend(report.accepted)
            if offspring:
                break
        theta_rng = random.Random(subseed(cfg.master_seed, "theta", epoch))
        flips = [theta_rng.random() < cfg.theta for _ in offspring]
        mutated = 0

        def mutate(job):
            j, expr = job
            return self.operator.mutate(expr, seed=subseed(cfg.master_seed, "mutate", epoch, j))

        jobs = [(j, expr) for j, (expr, flip) in enumerate(zip(offspring, flips)) if flip]
        for (j, _), report in zip(jobs, _map_ordered(mutate, jobs, self.workers)):
            tally.add_report(report)
            if report.accepted:
                offspring[j] = report.accepted[0]
                mutated += 1
        return offspring, mutated, attempts


def run(
    g: Graph,
    config: EvolutionConfig | None = None,
    operator: VariationOperator | None = None,
    run_dir: str | Path | None = None,
    extra_config: dict | None = None,
) -> RunResult:
    """Execute the full search and optionally persist a run directory."""
    config = config if config is not None else EvolutionConfig()
    operator = operator if operator is not None else MockVariation(config.max_offspring)
    state = _Evolution(g, config, operator)
    started = time.monotonic()
    records = [state.seed_initials()]

    if config.single_epoch:
        tally = _Tally()
        offspring, mutated, attempts = state.generate(1, tally)
        evaluated, inserted, new_pops = state.classify_batch(offspring, 1, tally)
        records.append(
            _snapshot_record(
                state.pset,
                epoch=1,
                counts=tally.as_counts(),
                evaluated=evaluated,
                inserted=inserted,
                new_populations=new_pops,
                mutations_applied=mutated,
                selection_attempts=attempts,
            )
        )
    else:
        incoming: list[ScoreExpr] = []
        for epoch in range(1, config.epochs + 1):
            budget = config.wall_clock_budget
            if budget is not None and time.monotonic() - started > budget:
                break
            tally = _Tally()
            evaluated, inserted, new_pops = state.classify_batch(incoming, epoch, tally)
            offspring, mutated, attempts = state.generate(epoch, tally)
            incoming = offspring
            records.append(
                _snapshot_record(
                    state.pset,
                    epoch=epoch,
                    counts=tally.as_counts(),
                    evaluated=evaluated,
                    inserted=inserted,
                    new_populations=new_pops,
                    mutations_applied=mutated,
                    selection_attempts=attempts,
                )
            )

    result = RunResult(
        best=state.pset.best(), populations=state.pset, records=records, config=config
    )
    if run_dir is not None:
        write_run_dir(Path(run_dir), result, extra_config=extra_config)
    return result


def export_telemetry(records: list[EpochRecord], out_dir: str | Path) -> None:
    """Write per-epoch and per-pool progress as long-format CSV tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "epochs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "epoch",
                "best_fitness",
                "mean_fitness",
                "population_count",
                "individual_count",
                "generated",
                "accepted",
                "discarded",
                "evicted",
                "evaluated",
                "inserted",
                "mutations_applied",
            ]
        )
        for r in records:
            writer.writerow(
                [
                    r.epoch,
                    repr(r.best_fitness),
                    repr(r.mean_fitness),
                    r.population_count,
                    r.individual_count,
                    r.counts["generated"],
                    r.counts["accepted"],
                    r.counts["discarded"],
                    r.counts["evicted"],
                    r.evaluated,
                    r.inserted,
                    r.mutations_applied,
                ]
            )
    with open(out / "populations.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "population", "size", "mean_fitness", "best_fitness"])
        for r in records:
            for s in r.population_stats:
                writer.writerow(
                    [
                        r.epoch,
                        s["population"],
                        s["size"],
                        repr(s["mean_fitness"]),
                        repr(s["best_fitness"]),
                    ]
                )


def write_run_dir(run_dir: Path, result: RunResult, extra_config: dict | None = None) -> None:
    """Persist one run: config, per-epoch log, best expression, final pools.

    Everything written here is a pure function of the run's inputs, so two
    identical runs produce byte-identical files. Secrets never pass through
    this path: the engine config has none, and callers must keep
    credentials out of extra_config.
    """
    run_dir.mkdir(parents=True, exist_ok=True)
    payload = {"engine": asdict(result.config)}
    if extra_config:
        payload.update(extra_config)
    (run_dir / "config.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    with open(run_dir / "run.jsonl", "w") as fh:
        for record in result.records:
            fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")
    (run_dir / "best.dsl").write_text(result.best.text + "\n")
    pools = {
        "tau": result.config.tau,
        "capacity": result.config.capacity,
        "best": {"id": result.best.id, "expr": result.best.text, "fitness": result.best.fitness},
        "populations": result.populations.snapshot(),
    }
    (run_dir / "populations.json").write_text(json.dumps(pools, indent=2, sort_keys=True) + "\n")
    export_telemetry(result.records, run_dir)
