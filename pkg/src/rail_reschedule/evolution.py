"""
Permutation evolutionary loop.

Every parent produces ``offspring_per_parent`` mutants in turn (ordered
selection), so selection pressure comes only from replacement: either
(mu + lambda) truncation or an evolutionary programming tournament. The
mutation applies a number of swaps driven by a temperature that is either
constant or annealed after a plateau, optionally drawn from a binomial law
around it.

Each offspring draws its randomness from its own seed substream, so
decoding offspring on a thread pool gives the same trace as decoding them
sequentially.
"""

import math
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
import pandas as pd
from rich.progress import Progress, SpinnerColumn, TextColumn

from rail_reschedule.model import PerturbedProblem, TrainId
from rail_reschedule.scheduler import (
    ConfigurationError,
    ScheduleResult,
    SchedulerConfig,
    schedule,
    validate_permutation,
)
from rail_reschedule.utils import console


__all__ = [
    "TRACE_COLUMNS",
    "ConfigurationError",
    "EAConfig",
    "GenerationRecord",
    "Individual",
    "Replacement",
    "RunTrace",
    "TemperatureSchedule",
    "draw_transposition_count",
    "ept_replacement",
    "evolve",
    "first_hit_generation",
    "plus_replacement",
    "swap_mutation",
    "temperature",
]

TRACE_COLUMNS = ["generation", "best_fitness", "mean_fitness", "elapsed_s", "evals"]

# Binomial draws use N = BINOMIAL_WIDTH * ceil(T) trials
BINOMIAL_WIDTH = 4

Permutation = tuple[TrainId, ...]


def temperature(
    generation: int, plateau: int, initial: float, final: float, decay: float
) -> float:
    """
    Annealed mutation strength at a generation.

    Parameters
    ----------
    generation : int
        Generation number ``n >= 0``.
    plateau : int
        Number of generations ``n0`` during which the strength stays at
        ``initial``.
    initial : float
        Starting strength ``T0``.
    final : float
        Asymptotic strength ``T_inf``.
    decay : float
        Sigmoid steepness ``gamma``.

    Returns
    -------
    float
        ``T0`` for ``n <= n0``, otherwise
        ``T_inf + 2 (T0 - T_inf) (1 - 1 / (1 + exp(-gamma (n - n0))))``.
    """
    if generation <= plateau:
        return initial
    x = math.exp(-decay * (generation - plateau))
    return final + 2.0 * (initial - final) * x / (1.0 + x)


@dataclass(frozen=True)
class TemperatureSchedule:
    """
    Constant or annealed mutation strength.

    A constant schedule has ``final = None`` and uses ``initial`` forever.
    ``binomial`` draws the swap count from a binomial law whose mean is the
    current strength instead of using the rounded strength itself.
    """

    initial: float = 4.0
    final: float | None = None
    plateau: int = 0
    decay: float = 0.0
    binomial: bool = False

    def __post_init__(self) -> None:
        """Validate the parameters."""
        if self.initial < 0:
            raise ConfigurationError("temperature must be non-negative")
        if self.final is not None:
            if self.final < 1:
                raise ConfigurationError("final temperature must be at least 1")
            if self.initial < self.final:
                raise ConfigurationError("initial temperature must be >= final")
            if self.plateau < 0 or self.decay < 0:
                raise ConfigurationError("plateau and decay must be non-negative")

    @classmethod
    def constant(cls, value: float, binomial: bool = False) -> "TemperatureSchedule":
        """Build a constant schedule."""
        return cls(initial=value, binomial=binomial)

    @classmethod
    def annealed(
        cls,
        plateau: int,
        initial: float,
        final: float,
        decay: float,
        binomial: bool = False,
    ) -> "TemperatureSchedule":
        """Build an annealed schedule from the ``(n0, T0, T_inf, gamma)`` tuple."""
        return cls(initial, final, plateau, decay, binomial)

    @property
    def is_annealed(self) -> bool:
        """Whether the strength decreases over time."""
        return self.final is not None

    def at(self, generation: int) -> float:
        """Return the strength used to breed offspring of ``generation + 1``."""
        if self.final is None:
            return self.initial
        return temperature(generation, self.plateau, self.initial, self.final, self.decay)


class Replacement(StrEnum):
    """Survivor selection scheme."""

    PLUS = "plus"
    EPT = "ept"


@dataclass(frozen=True)
class EAConfig:
    """
    Evolutionary loop settings.

    Parameters
    ----------
    mu : int
        Number of parents.
    offspring_per_parent : int
        Mutants bred by each parent per generation.
    replacement : Replacement
        Survivor selection scheme.
    tournament_size : int
        Opponents per individual in the tournament replacement.
    radius : int | None
        Maximum distance between swapped positions; ``None`` is unlimited.
    temperature : TemperatureSchedule
        Mutation strength schedule.
    generations : int
        Generations to run after generation 0.
    seed : int
        Root seed of every random stream in the run.
    time_budget : float | None
        Optional wall-clock limit in seconds.
    workers : int
        Threads decoding offspring; results do not depend on it.
    """

    mu: int = 10
    offspring_per_parent: int = 7
    replacement: Replacement = Replacement.PLUS
    tournament_size: int = 10
    radius: int | None = None
    temperature: TemperatureSchedule = field(default_factory=TemperatureSchedule)
    generations: int = 100
    seed: int = 0
    time_budget: float | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        """Validate sizes."""
        if self.mu < 1:
            raise ConfigurationError("mu must be at least 1")
        if self.offspring_per_parent < 1:
            raise ConfigurationError("offspring_per_parent must be at least 1")
        if self.tournament_size < 1:
            raise ConfigurationError("tournament_size must be at least 1")
        if self.radius is not None and self.radius < 1:
            raise ConfigurationError("radius must be at least 1")
        if self.generations < 0:
            raise ConfigurationError("generations must be non-negative")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

    @property
    def lam(self) -> int:
        """Offspring per generation."""
        return self.mu * self.offspring_per_parent


@dataclass(frozen=True)
class Individual:
    """An evaluated genotype; ``created`` orders individuals by birth."""

    permutation: Permutation
    fitness: int
    created: int
    result: ScheduleResult = field(compare=False, repr=False)


def draw_transposition_count(
    mean: float, rng: np.random.Generator, binomial: bool = True
) -> int:
    """
    Number of swaps applied by one mutation.

    Parameters
    ----------
    mean : float
        Current mutation strength ``T >= 0``.
    rng : np.random.Generator
        Random stream.
    binomial : bool, optional
        Draw from ``Binomial(4 ceil(T), T / (4 ceil(T)))`` when True, else
        return ``T`` rounded half up, so 2.5 gives 3.

    Returns
    -------
    int
        Non-negative swap count.
    """
    if mean <= 0:
        return 0
    if not binomial:
        return math.floor(mean + 0.5)
    trials = BINOMIAL_WIDTH * math.ceil(mean)
    return int(rng.binomial(trials, mean / trials))


def swap_mutation(
    permutation: Sequence[TrainId],
    radius: int | None,
    count: int,
    rng: np.random.Generator,
) -> Permutation:
    """
    Apply ``count`` radius-limited transpositions to a copy of a permutation.

    Position ``i`` is uniform; its partner ``j`` is uniform over
    ``[i - radius, i + radius]`` clipped to the sequence, ``i`` excluded.
    """
    genes = list(permutation)
    size = len(genes)
    if size < 2:
        return tuple(genes)
    for _ in range(count):
        i = int(rng.integers(size))
        low = 0 if radius is None else max(0, i - radius)
        high = size - 1 if radius is None else min(size - 1, i + radius)
        j = int(rng.integers(low, high))
        if j >= i:
            j += 1
        genes[i], genes[j] = genes[j], genes[i]
    return tuple(genes)


def plus_replacement(
    parents: Sequence[Individual], offspring: Sequence[Individual], mu: int
) -> list[Individual]:
    """
    Keep the ``mu`` best of parents and offspring.

    Ties go to the older individual, then the lower creation index.
    """
    pool = [*parents, *offspring]
    return sorted(pool, key=lambda item: (item.fitness, item.created))[:mu]


def ept_replacement(
    pool: Sequence[Individual], tournament_size: int, mu: int, rng: np.random.Generator
) -> list[Individual]:
    """
    Evolutionary programming tournament.

    Each individual meets ``tournament_size`` opponents drawn with
    replacement from the rest of the pool and scores one point per strictly
    better fitness. The ``mu`` highest scores survive; equal scores are
    ordered at random.

    Parameters
    ----------
    pool : Sequence[Individual]
        Parents and offspring.
    tournament_size : int
        Encounters per individual.
    mu : int
        Survivors.
    rng : np.random.Generator
        Random stream.

    Returns
    -------
    list[Individual]
        Survivors, best score first.
    """
    size = len(pool)
    if size <= mu:
        return list(pool)
    fitness = np.array([item.fitness for item in pool])
    scores = np.zeros(size, dtype=np.int64)
    for k in range(size):
        opponents = rng.integers(0, size - 1, size=tournament_size)
        opponents[opponents >= k] += 1
        scores[k] = int(np.count_nonzero(fitness[k] < fitness[opponents]))
    keys = rng.random(size)
    order = np.lexsort((keys, -scores))
    return [pool[int(k)] for k in order[:mu]]


@dataclass(frozen=True)
class GenerationRecord:
    """Statistics of the parent population after one generation."""

    generation: int
    best_fitness: int
    mean_fitness: float
    elapsed_s: float
    evals: int


@dataclass
class RunTrace:
    """Per-generation records and the best surviving individual of a run."""

    records: list[GenerationRecord]
    best: Individual

    @property
    def best_so_far(self) -> list[int]:
        """Running minimum of the per-generation best fitness."""
        values = [record.best_fitness for record in self.records]
        return [int(v) for v in np.minimum.accumulate(values)] if values else []

    def to_frame(self) -> pd.DataFrame:
        """Return the records as a DataFrame with the trace CSV columns."""
        return pd.DataFrame(
            [
                (r.generation, r.best_fitness, r.mean_fitness, r.elapsed_s, r.evals)
                for r in self.records
            ],
            columns=TRACE_COLUMNS,
        )

    def to_csv(self, path: str | Path) -> Path:
        """Write the trace CSV and return its path."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(target, index=False, float_format="%.6f")
        return target


def first_hit_generation(trace: RunTrace, threshold: float) -> int | None:
    """
    First generation whose best fitness is at most ``threshold``.

    Returns ``None`` when the run never reaches it.
    """
    for record in trace.records:
        if record.best_fitness <= threshold:
            return record.generation
    return None


def _select(
    config: EAConfig,
    parents: Sequence[Individual],
    offspring: Sequence[Individual],
    rng: np.random.Generator,
) -> list[Individual]:
    if config.replacement is Replacement.EPT:
        return ept_replacement([*parents, *offspring], config.tournament_size, config.mu, rng)
    return plus_replacement(parents, offspring, config.mu)


def evolve(
    problem: PerturbedProblem,
    initial_population: Sequence[Sequence[TrainId]],
    ea_config: EAConfig,
    scheduler_config: SchedulerConfig | None = None,
    *,
    quiet: bool = True,
    timed: bool = True,
) -> RunTrace:
    """
    Run the evolutionary loop.

    Parameters
    ----------
    problem : PerturbedProblem
        Problem whose permutations are evolved.
    initial_population : Sequence[Sequence[TrainId]]
        At least ``mu`` permutations. Larger pools are cut down to ``mu`` by
        the configured replacement before the first generation.
    ea_config : EAConfig
        Loop settings.
    scheduler_config : SchedulerConfig | None, optional
        Decoder settings.
    quiet : bool, optional
        Suppress the progress spinner, by default True.
    timed : bool, optional
        Record wall-clock seconds; when False ``elapsed_s`` is always 0.0.

    Returns
    -------
    RunTrace
        One record for generation 0 and one per completed generation.

    Raises
    ------
    ConfigurationError
        If the population is smaller than ``mu`` or holds an invalid
        permutation.
    """
    scheduler_config = scheduler_config or SchedulerConfig()
    if len(initial_population) < ea_config.mu:
        raise ConfigurationError(
            f"Initial population of {len(initial_population)} is smaller than "
            f"mu={ea_config.mu}"
        )
    for genotype in initial_population:
        is_valid, errors = validate_permutation(problem, genotype)
        if not is_valid:
            raise ConfigurationError(f"Invalid initial genotype: {errors[0]}")

    seed = ea_config.seed
    start = time.perf_counter()
    executor = (
        ThreadPoolExecutor(max_workers=ea_config.workers)
        if ea_config.workers > 1
        else None
    )
    created = 0

    def decode(permutation: Permutation) -> ScheduleResult:
        return schedule(problem, permutation, scheduler_config)

    def evaluate(genotypes: list[Permutation]) -> list[Individual]:
        nonlocal created
        if executor is not None:
            results = list(executor.map(decode, genotypes))
        else:
            results = [decode(genotype) for genotype in genotypes]
        batch = []
        for genotype, result in zip(genotypes, results):
            batch.append(Individual(genotype, result.fitness, created, result))
            created += 1
        return batch

    def record(generation: int, population: list[Individual], evals: int) -> GenerationRecord:
        return GenerationRecord(
            generation=generation,
            best_fitness=min(item.fitness for item in population),
            mean_fitness=float(np.mean([item.fitness for item in population])),
            elapsed_s=round(time.perf_counter() - start, 6) if timed else 0.0,
            evals=evals,
        )

    try:
        pool = evaluate([tuple(genotype) for genotype in initial_population])
        parents = _select(ea_config, [], pool, np.random.default_rng([seed, 0, 1, 0]))
        evals = len(pool)
        best = min(parents, key=lambda item: (item.fitness, item.created))
        records = [record(0, parents, evals)]

        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            disable=quiet,
        ) as progress:
            task = progress.add_task("[cyan]Evolving...", total=ea_config.generations)
            for generation in range(1, ea_config.generations + 1):
                if (
                    ea_config.time_budget is not None
                    and time.perf_counter() - start >= ea_config.time_budget
                ):
                    break
                strength = ea_config.temperature.at(generation - 1)
                children = []
                for k, parent in enumerate(parents):
                    for o in range(ea_config.offspring_per_parent):
                        index = k * ea_config.offspring_per_parent + o
                        rng = np.random.default_rng([seed, generation, 0, index])
                        count = draw_transposition_count(
                            strength, rng, ea_config.temperature.binomial
                        )
                        children.append(
                            swap_mutation(parent.permutation, ea_config.radius, count, rng)
                        )
                offspring = evaluate(children)
                evals += len(offspring)
                parents = _select(
                    ea_config,
                    parents,
                    offspring,
                    np.random.default_rng([seed, generation, 1, 0]),
                )
                best = min(
                    [best, *parents], key=lambda item: (item.fitness, item.created)
                )
                records.append(record(generation, parents, evals))
                progress.update(
                    task,
                    advance=1,
                    description=(
                        f"[cyan]Generation {generation}: best {records[-1].best_fitness}"
                    ),
                )
    finally:
        if executor is not None:
            executor.shutdown()

    return RunTrace(records=records, best=best)
