"""
Inoculated initial populations.

The inoculant is the best permutation found for the empty perturbation of
an instance. Initial populations for a perturbed problem are built from
copies of it disturbed by a number ``pR`` of random transpositions: the
same ``pR`` for everyone (mass mutation), a linearly increasing ``pR``
(gradual perturbation), or stratified layers with one ``pR`` each.
"""

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from filelock import FileLock

from rail_reschedule.evolution import ConfigurationError, EAConfig, evolve
from rail_reschedule.instance_io import instance_digest
from rail_reschedule.model import (
    Instance,
    PerturbationError,
    PerturbedProblem,
    TrainId,
    empty_problem,
)
from rail_reschedule.scheduler import SchedulerConfig
from rail_reschedule.utils import config_digest, warn


# Constants
INOCULANT_HEADER = "# rail-inoculant 1"
INOCULANT_SUFFIX = ".inoculant"
RANDOM_PR = 500
RANDOM_PR_PER_TRAIN = 10

Permutation = tuple[TrainId, ...]


@dataclass(frozen=True)
class Provenance:
    """Where an inoculant comes from."""

    instance_hash: str
    config_hash: str
    generations: int
    fitness: int
    unscheduled: int


@dataclass(frozen=True)
class Inoculant:
    """Pre-computed solution of the empty perturbation."""

    permutation: Permutation
    provenance: Provenance

    @property
    def feasible(self) -> bool:
        """Whether the inoculant schedules every train."""
        return self.provenance.unscheduled == 0


@dataclass(frozen=True)
class MassMutation:
    """Every individual is the inoculant plus ``pr`` transpositions."""

    pr: int


@dataclass(frozen=True)
class GradualPerturbation:
    """Individual ``k`` (from 0) gets ``start + k * increment`` transpositions."""

    start: int = 0
    increment: int = 1


@dataclass(frozen=True)
class Layers:
    """Stratified population: ``(percent, pr)`` per layer."""

    layers: tuple[tuple[float, int], ...]


InitScheme = MassMutation | GradualPerturbation | Layers

PRESET_T = Layers(((33, 0), (33, 10), (33, RANDOM_PR)))
PRESET_H = Layers(((50, 3), (50, RANDOM_PR)))
DEFAULT_SCHEME = MassMutation(3)


def validate_scheme(scheme: InitScheme) -> tuple[bool, list[str]]:
    """
    Validate initialisation scheme parameters.

    Parameters
    ----------
    scheme : InitScheme
        Scheme to check.

    Returns
    -------
    tuple[bool, list[str]]
        Tuple of (is_valid, list of error messages).
    """
    errors = []
    if isinstance(scheme, MassMutation):
        if scheme.pr < 0:
            errors.append("Mass mutation pR must be non-negative")
    elif isinstance(scheme, GradualPerturbation):
        if scheme.start < 0 or scheme.increment < 0:
            errors.append("Gradual perturbation pR values must be non-negative")
    else:
        if not scheme.layers:
            errors.append("Layer scheme needs at least one layer")
        for percent, pr in scheme.layers:
            if percent <= 0:
                errors.append(f"Layer share {percent} must be positive")
            if pr < 0:
                errors.append(f"Layer pR {pr} must be non-negative")
        total = sum(percent for percent, _ in scheme.layers)
        if scheme.layers and abs(total - 100) > 1:
            errors.append(f"Layer shares sum to {total}, expected 100")
    return len(errors) == 0, errors


def effective_pr(pr: int, size: int) -> int:
    """Cap "completely random" transposition counts at ten per train."""
    if pr >= RANDOM_PR:
        return min(pr, RANDOM_PR_PER_TRAIN * size)
    return pr


def perturb(permutation: Permutation, pr: int, rng: np.random.Generator) -> Permutation:
    """
    Apply ``pr`` uniformly random transpositions to a copy of a permutation.

    Positions are unrestricted, unlike the radius-limited mutation.
    """
    genes = list(permutation)
    size = len(genes)
    if size < 2:
        return tuple(genes)
    for _ in range(pr):
        i = int(rng.integers(size))
        j = int(rng.integers(size - 1))
        if j >= i:
            j += 1
        genes[i], genes[j] = genes[j], genes[i]
    return tuple(genes)


def layer_sizes(layers: tuple[tuple[float, int], ...], size: int) -> list[int]:
    """Split ``size`` individuals across layers, the remainder going last."""
    counts = []
    remaining = size
    for percent, _ in layers[:-1]:
        count = min(remaining, round(percent * size / 100))
        counts.append(count)
        remaining -= count
    counts.append(remaining)
    return counts


def init_population(
    inoculant: Permutation,
    scheme: InitScheme,
    size: int,
    rng: np.random.Generator,
) -> list[Permutation]:
    """
    Build an inoculated initial population.

    Parameters
    ----------
    inoculant : Permutation
        The inoculant permutation.
    scheme : InitScheme
        Mass mutation, gradual perturbation or layers.
    size : int
        Number of individuals.
    rng : np.random.Generator
        Random stream.

    Returns
    -------
    list[Permutation]
        The population, in layer order for layered schemes.

    Raises
    ------
    ConfigurationError
        If the scheme parameters or the size are invalid.
    """
    if size < 1:
        raise ConfigurationError("Population size must be at least 1")
    is_valid, errors = validate_scheme(scheme)
    if not is_valid:
        raise ConfigurationError("; ".join(errors))

    n = len(inoculant)
    if isinstance(scheme, MassMutation):
        pr = effective_pr(scheme.pr, n)
        return [perturb(inoculant, pr, rng) for _ in range(size)]
    if isinstance(scheme, GradualPerturbation):
        return [
            perturb(inoculant, effective_pr(scheme.start + k * scheme.increment, n), rng)
            for k in range(size)
        ]
    population = []
    for (_, pr), count in zip(scheme.layers, layer_sizes(scheme.layers, size)):
        population.extend(perturb(inoculant, effective_pr(pr, n), rng) for _ in range(count))
    return population


def init_random(
    size: int, train_ids: tuple[TrainId, ...], rng: np.random.Generator
) -> list[Permutation]:
    """Draw ``size`` uniformly random permutations of the trains."""
    if size < 1:
        raise ConfigurationError("Population size must be at least 1")
    return [tuple(train_ids[int(i)] for i in rng.permutation(len(train_ids))) for _ in range(size)]


def inoculant_config_hash(ea_config: EAConfig, scheduler_config: SchedulerConfig) -> str:
    """Hash the settings that determine an inoculant; thread count excluded."""
    return config_digest(replace(ea_config, workers=1), scheduler_config)


def compute_inoculant(
    problem: PerturbedProblem,
    ea_config: EAConfig,
    scheduler_config: SchedulerConfig | None = None,
    *,
    quiet: bool = True,
) -> Inoculant:
    """
    Solve the empty perturbation from a random population.

    Parameters
    ----------
    problem : PerturbedProblem
        Problem carrying a zero delay.
    ea_config : EAConfig
        Settings of the pre-solve run.
    scheduler_config : SchedulerConfig | None, optional
        Decoder settings.
    quiet : bool, optional
        Suppress progress output, by default True.

    Returns
    -------
    Inoculant
        Best permutation found with its provenance. An inoculant that leaves
        trains unscheduled is returned with a warning.

    Raises
    ------
    PerturbationError
        If the problem carries a non-zero delay.
    """
    if problem.perturbation.delay != 0:
        raise PerturbationError("The inoculant is computed for the empty perturbation")
    scheduler_config = scheduler_config or SchedulerConfig()
    population = init_random(
        ea_config.mu,
        problem.train_ids,
        np.random.default_rng([ea_config.seed, 0, 2, 0]),
    )
    trace = evolve(problem, population, ea_config, scheduler_config, quiet=quiet, timed=False)
    best = trace.best
    inoculant = Inoculant(
        permutation=best.permutation,
        provenance=Provenance(
            instance_hash=instance_digest(problem.instance),
            config_hash=inoculant_config_hash(ea_config, scheduler_config),
            generations=len(trace.records) - 1,
            fitness=best.fitness,
            unscheduled=len(best.result.unscheduled),
        ),
    )
    if not inoculant.feasible:
        warn(
            f"Inoculant leaves {inoculant.provenance.unscheduled} trains unscheduled "
            "on the empty perturbation"
        )
    return inoculant


def dump_inoculant(inoculant: Inoculant) -> str:
    """Serialize an inoculant with its provenance comment block."""
    provenance = inoculant.provenance
    lines = [
        INOCULANT_HEADER,
        f"# instance_hash: {provenance.instance_hash}",
        f"# config_hash: {provenance.config_hash}",
        f"# generations: {provenance.generations}",
        f"# fitness: {provenance.fitness}",
        f"# unscheduled: {provenance.unscheduled}",
        " ".join(inoculant.permutation),
    ]
    return "\n".join(lines) + "\n"


def parse_inoculant(text: str) -> Inoculant:
    """
    Parse an inoculant file.

    Raises
    ------
    ValueError
        If the header, a provenance field or the permutation is missing.
    """
    lines = text.splitlines()
    if not lines or lines[0] != INOCULANT_HEADER:
        raise ValueError("Missing inoculant header")
    fields: dict[str, str] = {}
    genes: list[TrainId] = []
    for line in lines[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            fields[key.strip()] = value.strip()
        else:
            genes.extend(line.split())
    if not genes:
        raise ValueError("Inoculant file holds no permutation")
    try:
        provenance = Provenance(
            instance_hash=fields["instance_hash"],
            config_hash=fields["config_hash"],
            generations=int(fields["generations"]),
            fitness=int(fields["fitness"]),
            unscheduled=int(fields["unscheduled"]),
        )
    except KeyError as e:
        raise ValueError(f"Missing provenance field {e}") from e
    return Inoculant(tuple(genes), provenance)


def inoculant_path(instance_path: str | Path) -> Path:
    """Cache file stored beside an instance file."""
    path = Path(instance_path)
    return path.with_name(path.name + INOCULANT_SUFFIX)


def load_or_compute_inoculant(
    instance: Instance,
    instance_path: str | Path,
    ea_config: EAConfig,
    scheduler_config: SchedulerConfig | None = None,
    *,
    quiet: bool = True,
) -> Inoculant:
    """
    Return the cached inoculant of an instance, computing it when needed.

    A cache written for another instance or other settings is rejected
    with a warning and replaced. Concurrent callers are serialised by a
    lock file next to the cache.

    Parameters
    ----------
    instance : Instance
        The loaded instance; its perturbation is ignored.
    instance_path : str | Path
        Path of the instance file, used to locate the cache.
    ea_config : EAConfig
        Settings of the pre-solve run.
    scheduler_config : SchedulerConfig | None, optional
        Decoder settings.
    quiet : bool, optional
        Suppress progress output, by default True.

    Returns
    -------
    Inoculant
        The cached or freshly computed inoculant.
    """
    scheduler_config = scheduler_config or SchedulerConfig()
    cache = inoculant_path(instance_path)
    expected_instance = instance_digest(instance)
    expected_config = inoculant_config_hash(ea_config, scheduler_config)

    with FileLock(str(cache) + ".lock"):
        if cache.exists():
            try:
                cached = parse_inoculant(cache.read_text(encoding="utf-8"))
            except ValueError as e:
                warn(f"Ignoring unreadable inoculant cache {cache}: {e}")
            else:
                if (
                    cached.provenance.instance_hash == expected_instance
                    and cached.provenance.config_hash == expected_config
                ):
                    return cached
                warn(f"Inoculant cache {cache} is stale; recomputing")

        inoculant = compute_inoculant(
            empty_problem(instance), ea_config, scheduler_config, quiet=quiet
        )
        cache.write_text(dump_inoculant(inoculant), encoding="utf-8")
        return inoculant
