"""
Execution of experiment plans.

Each (instance, variant, run) cell writes one trace CSV and the schedule
of its best individual. ``manifest.json`` ties every output to its seed
and config hash. Unless ``timing = wall``, a rerun of the same plan writes
byte-identical files, whatever the number of concurrent cells.
"""

import json
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from rich.progress import Progress, SpinnerColumn, TextColumn

from rail_reschedule.bench.plan import ExperimentPlan, Timing, Variant
from rail_reschedule.evolution import (
    ConfigurationError,
    EAConfig,
    Replacement,
    TemperatureSchedule,
    evolve,
)
from rail_reschedule.inoculation import (
    GradualPerturbation,
    Inoculant,
    InitScheme,
    Layers,
    MassMutation,
    init_population,
    init_random,
    load_or_compute_inoculant,
)
from rail_reschedule.instance_io import (
    dump_schedule,
    instance_digest,
    load_problem,
)
from rail_reschedule.model import Instance, PerturbedProblem, apply_perturbation
from rail_reschedule.scheduler import SchedulerConfig
from rail_reschedule.utils import config_digest, console, pretty_json


# Constants
MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "rail-manifest 1"
TRACE_DIR = "traces"
SCHEDULE_DIR = "schedules"


@dataclass(frozen=True)
class Cell:
    """One seeded run of one variant on one instance."""

    instance: str
    variant: Variant
    run: int
    seed: int

    def trace_path(self) -> Path:
        """Trace location relative to the results directory."""
        return Path(TRACE_DIR, self.instance, self.variant.slug, f"run-{self.run:02d}.csv")

    def schedule_path(self) -> Path:
        """Schedule location relative to the results directory."""
        return Path(
            SCHEDULE_DIR, self.instance, self.variant.slug, f"run-{self.run:02d}.schedule"
        )


@dataclass(frozen=True)
class CellOutcome:
    """Manifest entry of a finished or failed cell."""

    cell: Cell
    config_hash: str
    final_fitness: int | None = None
    unscheduled: int | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        """Whether the cell produced its outputs."""
        return self.error is None

    def to_manifest(self) -> dict[str, object]:
        """Return the JSON-ready manifest record."""
        return {
            "instance": self.cell.instance,
            "variant": self.cell.variant.variant_id,
            "run": self.cell.run,
            "seed": self.cell.seed,
            "config_hash": self.config_hash,
            "status": "ok" if self.ok else "failed",
            "trace": self.cell.trace_path().as_posix() if self.ok else None,
            "schedule": self.cell.schedule_path().as_posix() if self.ok else None,
            "final_fitness": self.final_fitness,
            "unscheduled": self.unscheduled,
            "error": self.error,
        }


@dataclass
class RunSummary:
    """What ``run_plan`` produced."""

    out_dir: Path
    manifest_path: Path
    outcomes: list[CellOutcome] = field(default_factory=list)

    @property
    def completed(self) -> int:
        """Number of cells that produced their outputs."""
        return sum(1 for outcome in self.outcomes if outcome.ok)

    @property
    def failures(self) -> list[CellOutcome]:
        """Cells that failed."""
        return [outcome for outcome in self.outcomes if not outcome.ok]


@dataclass(frozen=True)
class _PreparedInstance:
    name: str
    path: Path
    instance: Instance | None
    problem: PerturbedProblem | None
    inoculant: Inoculant | None
    error: str | None = None


def _prepare(plan: ExperimentPlan, path: Path, quiet: bool) -> _PreparedInstance:
    """Load an instance, apply its perturbation and fetch its inoculant."""
    name = path.stem
    try:
        instance = load_problem(path)
        problem = apply_perturbation(instance)
        inoculant = None
        if any(variant.init is not None for variant in plan.variants):
            inoculant = load_or_compute_inoculant(
                instance, path, plan.inoculant_ea, plan.scheduler, quiet=quiet
            )
    except Exception as e:
        console.print(f"[red]✗ Could not prepare instance {name}: {e}[/red]")
        return _PreparedInstance(name, path, None, None, None, str(e))
    return _PreparedInstance(name, path, instance, problem, inoculant)


def cell_config_hash(plan: ExperimentPlan, cell: Cell) -> str:
    """Hash of every setting that determines a cell's outputs."""
    return config_digest(
        cell.variant,
        cell.variant.ea_config(plan.ea, cell.seed),
        plan.scheduler,
        plan.inoculant_ea,
        plan.timing,
    )


def _run_cell(
    plan: ExperimentPlan,
    prepared: _PreparedInstance,
    cell: Cell,
    out_dir: Path,
) -> CellOutcome:
    """Evolve one cell and write its trace and schedule; never raises."""
    config_hash = cell_config_hash(plan, cell)
    if prepared.problem is None:
        return CellOutcome(cell, config_hash, error=prepared.error)
    try:
        ea_config = cell.variant.ea_config(plan.ea, cell.seed)
        rng = np.random.default_rng([cell.seed, 0, 3, 0])
        if cell.variant.init is None:
            population = init_random(ea_config.mu, prepared.problem.train_ids, rng)
        else:
            if prepared.inoculant is None:
                raise ValueError("Inoculated variant without an inoculant")
            population = init_population(
                prepared.inoculant.permutation, cell.variant.init, ea_config.mu, rng
            )
        trace = evolve(
            prepared.problem,
            population,
            ea_config,
            plan.scheduler,
            quiet=True,
            timed=plan.timing is Timing.WALL,
        )
        trace.to_csv(out_dir / cell.trace_path())
        schedule_file = out_dir / cell.schedule_path()
        schedule_file.parent.mkdir(parents=True, exist_ok=True)
        schedule_file.write_text(
            dump_schedule(trace.best.result, prepared.problem), encoding="utf-8"
        )
    except Exception as e:
        console.print(
            f"[red]✗ {cell.instance} / {cell.variant.variant_id} / run {cell.run} "
            f"failed: {e}[/red]"
        )
        return CellOutcome(cell, config_hash, error=str(e))
    return CellOutcome(
        cell,
        config_hash,
        final_fitness=trace.best.fitness,
        unscheduled=len(trace.best.result.unscheduled),
    )


def build_manifest(
    plan: ExperimentPlan,
    prepared: list[_PreparedInstance],
    outcomes: list[CellOutcome],
) -> dict[str, object]:
    """Assemble the manifest document; key order is fixed by serialisation."""
    instances = []
    for item in prepared:
        record: dict[str, object] = {
            "name": item.name,
            "path": item.path.as_posix(),
            "instance_hash": (
                instance_digest(item.instance) if item.instance is not None else None
            ),
            "perturbation": (
                item.problem.perturbation if item.problem is not None else None
            ),
            "inoculant": item.inoculant.provenance if item.inoculant is not None else None,
            "error": item.error,
        }
        instances.append(record)
    return {
        "format": MANIFEST_FORMAT,
        "plan": {
            "runs": plan.runs,
            "base_seed": plan.base_seed,
            "ea": plan.ea,
            "scheduler": plan.scheduler,
            "inoculant_ea": plan.inoculant_ea,
            "timing": plan.timing,
            "variants": list(plan.variants),
        },
        "instances": instances,
        "cells": [outcome.to_manifest() for outcome in outcomes],
    }


def _init_from_manifest(value: Mapping[str, Any] | None) -> InitScheme | None:
    if value is None:
        return None
    if "pr" in value:
        return MassMutation(int(value["pr"]))
    if "layers" in value:
        return Layers(tuple((share, int(pr)) for share, pr in value["layers"]))
    return GradualPerturbation(int(value["start"]), int(value["increment"]))


def _temperature_from_manifest(value: Mapping[str, Any]) -> TemperatureSchedule:
    # Numbers pass through untouched so the config hashes are reproduced.
    return TemperatureSchedule(
        initial=value["initial"],
        final=value["final"],
        plateau=int(value["plateau"]),
        decay=value["decay"],
        binomial=bool(value["binomial"]),
    )


def _ea_from_manifest(value: Mapping[str, Any]) -> EAConfig:
    return EAConfig(
        mu=int(value["mu"]),
        offspring_per_parent=int(value["offspring_per_parent"]),
        replacement=Replacement(value["replacement"]),
        tournament_size=int(value["tournament_size"]),
        radius=None if value["radius"] is None else int(value["radius"]),
        temperature=_temperature_from_manifest(value["temperature"]),
        generations=int(value["generations"]),
        seed=int(value["seed"]),
        time_budget=value["time_budget"],
        workers=int(value["workers"]),
    )


def _variant_from_manifest(value: Mapping[str, Any]) -> Variant:
    return Variant(
        variant_id=str(value["variant_id"]),
        temperature=_temperature_from_manifest(value["temperature"]),
        init=_init_from_manifest(value["init"]),
        replacement=Replacement(value["replacement"]),
        tournament_size=int(value["tournament_size"]),
        radius=None if value["radius"] is None else int(value["radius"]),
    )


def plan_from_manifest(
    manifest: Mapping[str, Any], cell_workers: int = 1
) -> ExperimentPlan:
    """
    Rebuild the plan that wrote a manifest.

    Instance paths are taken as recorded, so relative paths resolve against
    the current directory.

    Parameters
    ----------
    manifest : Mapping[str, Any]
        Parsed ``manifest.json``.
    cell_workers : int, optional
        Cells run concurrently; not recorded because it does not change the
        outputs. By default 1.

    Returns
    -------
    ExperimentPlan
        A plan whose cells have the same seeds and config hashes.

    Raises
    ------
    ConfigurationError
        If the document is not a manifest or its plan section is incomplete.
    """
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigurationError(
            f"Not a {MANIFEST_FORMAT!r} manifest: format is {manifest.get('format')!r}"
        )
    try:
        section = manifest["plan"]
        scheduler = section["scheduler"]
        return ExperimentPlan(
            instances=tuple(Path(item["path"]) for item in manifest["instances"]),
            variants=tuple(_variant_from_manifest(item) for item in section["variants"]),
            runs=int(section["runs"]),
            base_seed=int(section["base_seed"]),
            ea=_ea_from_manifest(section["ea"]),
            scheduler=SchedulerConfig(
                kick_limit=int(scheduler["kick_limit"]),
                penalty=(
                    None if scheduler["penalty"] is None else int(scheduler["penalty"])
                ),
                iteration_cap=int(scheduler["iteration_cap"]),
            ),
            inoculant_ea=_ea_from_manifest(section["inoculant_ea"]),
            timing=Timing(section["timing"]),
            cell_workers=cell_workers,
        )
    except (KeyError, TypeError) as e:
        raise ConfigurationError(f"Incomplete manifest plan: missing {e}") from e


def load_plan_manifest(
    manifest_file: str | Path, cell_workers: int = 1
) -> ExperimentPlan:
    """
    Read a ``manifest.json`` (or the results directory holding one) as a plan.

    Raises
    ------
    FileNotFoundError
        If there is no manifest at that location.
    ConfigurationError
        If the file is not valid JSON or not a complete manifest.
    """
    path = Path(manifest_file)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"Unreadable manifest {path}: {e}") from e
    return plan_from_manifest(manifest, cell_workers=cell_workers)


def run_plan(plan: ExperimentPlan, out_dir: str | Path, *, quiet: bool = True) -> RunSummary:
    """
    Execute every cell of a plan.

    Parameters
    ----------
    plan : ExperimentPlan
        A plan that passed ``validate_plan``.
    out_dir : str | Path
        Results directory; created when missing.
    quiet : bool, optional
        Suppress progress output, by default True.

    Returns
    -------
    RunSummary
        Outcomes in cell order (instance, variant, run). Failed cells are
        recorded and do not stop the others.
    """
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)

    prepared = [_prepare(plan, Path(path), quiet) for path in plan.instances]
    jobs = [
        (item, Cell(item.name, variant, run, plan.seed_for(run)))
        for item in prepared
        for variant in plan.variants
        for run in range(plan.runs)
    ]

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        disable=quiet,
    ) as progress:
        task = progress.add_task("[cyan]Running cells...", total=len(jobs))
        with ThreadPoolExecutor(max_workers=plan.cell_workers) as executor:
            futures = [
                executor.submit(_run_cell, plan, item, cell, target) for item, cell in jobs
            ]
            outcomes = []
            for future in futures:
                outcomes.append(future.result())
                progress.update(task, advance=1)

    manifest_path = target / MANIFEST_NAME
    manifest_path.write_text(
        pretty_json(build_manifest(plan, prepared, outcomes)), encoding="utf-8"
    )
    return RunSummary(target, manifest_path, outcomes)
