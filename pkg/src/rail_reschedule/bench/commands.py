"""Command handlers behind the ``rail-reschedule`` subcommands."""

from dataclasses import replace
from pathlib import Path

from rich.panel import Panel
from rich.table import Table

from rail_reschedule.bench.plan import ExperimentPlan, validate_plan
from rail_reschedule.bench.report import summarize
from rail_reschedule.bench.runner import run_plan
from rail_reschedule.bench.space_time import DiagramOptions, emit_space_time
from rail_reschedule.evolution import EAConfig
from rail_reschedule.generator import (
    GenerationError,
    GeneratorParams,
    classify,
    generate,
    make_instance_pair,
    save_generated,
    validate_params,
)
from rail_reschedule.inoculation import inoculant_path, load_or_compute_inoculant
from rail_reschedule.instance_io import (
    InstanceParseError,
    InstanceValidationError,
    load_problem,
    parse_schedule,
    save_instance,
)
from rail_reschedule.model import NodeId, apply_perturbation, timetable_order
from rail_reschedule.scheduler import SchedulerConfig, schedule
from rail_reschedule.utils import console


# Constants
INSTANCE_SUFFIX = ".rail"

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2


def _print_errors(title: str, errors: list[str]) -> None:
    console.print(f"[red]✗ {title}:[/red]")
    for error in errors:
        console.print(f"  [red]•[/red] {error}")


def generate_instances(
    out_dir: str,
    params: GeneratorParams,
    count: int = 1,
    pair_delays: tuple[int, int] | None = None,
    classify_budget: int = 0,
) -> int:
    """
    Generate seeded instances into a directory.

    Parameters
    ----------
    out_dir : str
        Output directory.
    params : GeneratorParams
        Generator parameters; instance ``k`` uses seed ``params.seed + k``.
    count : int, optional
        Number of instances, by default 1.
    pair_delays : tuple[int, int] | None, optional
        When given, write an easy and a hard variant of every instance with
        these delays instead of the drawn one.
    classify_budget : int, optional
        Decode budget of the difficulty check; 0 skips it.

    Returns
    -------
    int
        Exit code (0 for success, 1 if some instances failed, 2 for invalid
        parameters).
    """
    console.print(
        Panel.fit(
            "[bold cyan]Instance Generation[/bold cyan]\n"
            f"{count} instance(s) with {params.n_trains} trains on {params.n_nodes} nodes",
            border_style="cyan",
        )
    )
    is_valid, errors = validate_params(params)
    if count < 1:
        errors.append("count must be at least 1")
        is_valid = False
    if pair_delays is not None and not 0 <= pair_delays[0] <= pair_delays[1]:
        errors.append("pair delays must satisfy 0 <= easy <= hard")
        is_valid = False
    if not is_valid:
        _print_errors("Invalid generator parameters", errors)
        return EXIT_INVALID

    target = Path(out_dir)
    table = Table(title="Generated Instances", show_header=True, header_style="bold cyan")
    table.add_column("File", style="yellow", no_wrap=True)
    table.add_column("Perturbation")
    table.add_column("Violations", justify="right")
    table.add_column("Difficulty", justify="center")

    failures = 0
    for k in range(count):
        seed = params.seed + k
        try:
            generated = generate(replace(params, seed=seed))
        except GenerationError as e:
            failures += 1
            console.print(f"[red]✗ Seed {seed} failed:[/red] {e}")
            for line in e.diagnostics:
                console.print(f"  [dim]{line}[/dim]")
            continue

        stem = f"instance-{seed:04d}"
        violations = str(len(generated.metadata.injected_violations))
        if pair_delays is None:
            outputs = [(target / f"{stem}{INSTANCE_SUFFIX}", generated.instance)]
            save_generated(generated, outputs[0][0])
        else:
            easy, hard = make_instance_pair(generated.instance, *pair_delays)
            outputs = [
                (target / f"{stem}-easy{INSTANCE_SUFFIX}", easy),
                (target / f"{stem}-hard{INSTANCE_SUFFIX}", hard),
            ]
            save_generated(generated, target / f"{stem}{INSTANCE_SUFFIX}")
            for path, instance in outputs:
                save_instance(instance, path)

        for path, instance in outputs:
            site = instance.perturbation
            perturbation = f"{site.train}@{site.node} +{site.delay}s" if site else "-"
            label = "-"
            if classify_budget > 0:
                label = str(classify(instance, classify_budget, seed=seed).label)
            table.add_row(path.name, perturbation, violations, label)

    console.print(table)
    if failures:
        console.print(f"[yellow]⚠ {failures} of {count} instance(s) failed[/yellow]")
        return EXIT_PARTIAL
    console.print(f"[green]✓ Instances written to {target}[/green]")
    return EXIT_OK


def inoculate_instances(
    instance_paths: list[str],
    ea_config: EAConfig,
    scheduler_config: SchedulerConfig,
    force: bool = False,
    quiet: bool = False,
) -> int:
    """
    Compute or refresh the cached inoculant of every instance.

    Parameters
    ----------
    instance_paths : list[str]
        Instance files.
    ea_config : EAConfig
        Settings of the pre-solve run.
    scheduler_config : SchedulerConfig
        Decoder settings.
    force : bool, optional
        Discard existing caches first.
    quiet : bool, optional
        Suppress progress output.

    Returns
    -------
    int
        Exit code (0 for success, 1 if some instances failed).
    """
    console.print(
        Panel.fit(
            "[bold cyan]Inoculant Pre-solve[/bold cyan]\n"
            f"Empty perturbation, {ea_config.generations} generations",
            border_style="cyan",
        )
    )
    table = Table(title="Inoculants", show_header=True, header_style="bold cyan")
    table.add_column("Instance", style="yellow", no_wrap=True)
    table.add_column("Fitness", justify="right")
    table.add_column("Unscheduled", justify="right")
    table.add_column("Cache")

    failures = 0
    for raw_path in instance_paths:
        path = Path(raw_path)
        try:
            instance = load_problem(path)
            cache = inoculant_path(path)
            if force:
                cache.unlink(missing_ok=True)
            inoculant = load_or_compute_inoculant(
                instance, path, ea_config, scheduler_config, quiet=quiet
            )
        except Exception as e:
            failures += 1
            console.print(f"[red]✗ {path}:[/red] {e}")
            continue
        unscheduled = inoculant.provenance.unscheduled
        table.add_row(
            path.name,
            str(inoculant.provenance.fitness),
            f"[red]{unscheduled}[/red]" if unscheduled else "0",
            cache.name,
        )

    console.print(table)
    if failures:
        return EXIT_PARTIAL
    console.print("[green]✓ Inoculants ready[/green]")
    return EXIT_OK


def run_experiments(plan: ExperimentPlan, out_dir: str, quiet: bool = False) -> int:
    """
    Validate and execute an experiment plan.

    Parameters
    ----------
    plan : ExperimentPlan
        The plan.
    out_dir : str
        Results directory.
    quiet : bool, optional
        Suppress progress output.

    Returns
    -------
    int
        Exit code (0 for success, 1 if some cells failed, 2 for an invalid
        plan).
    """
    console.print(
        Panel.fit(
            "[bold cyan]Experiment Run[/bold cyan]\n"
            f"{len(plan.instances)} instance(s) × {len(plan.variants)} variant(s) × "
            f"{plan.runs} run(s)",
            border_style="cyan",
        )
    )
    console.print("[cyan]Validating plan...[/cyan]")
    is_valid, errors = validate_plan(plan)
    if not is_valid:
        _print_errors("Plan validation failed", errors)
        return EXIT_INVALID
    console.print("[green]✓ Plan validation passed![/green]\n")

    summary = run_plan(plan, out_dir, quiet=quiet)

    summary_text = (
        f"[bold]Run Summary[/bold]\n\n"
        f"Cells: [cyan]{len(summary.outcomes)}[/cyan]\n"
        f"Completed: [green]{summary.completed}[/green]\n"
        f"Failed: [red]{len(summary.failures)}[/red]\n"
        f"Manifest: [dim]{summary.manifest_path}[/dim]"
    )
    console.print(Panel.fit(summary_text, border_style="cyan", title="Summary"))
    return EXIT_PARTIAL if summary.failures else EXIT_OK


def report_results(results_dir: str, out_dir: str | None = None) -> int:
    """
    Summarize a results directory and print the verdicts.

    Parameters
    ----------
    results_dir : str
        Directory written by ``run``.
    out_dir : str | None, optional
        Where to write the aggregate CSVs; defaults to ``results_dir``.

    Returns
    -------
    int
        Exit code (0 for success, 1 if traces were excluded, 2 if nothing
        could be summarized).
    """
    console.print(
        Panel.fit(
            "[bold cyan]Comparison Report[/bold cyan]\n"
            "Rank-sum verdicts on final fitness at the 99% level",
            border_style="cyan",
        )
    )
    try:
        report = summarize(results_dir, out_dir)
    except (FileNotFoundError, ValueError) as e:
        console.print(f"[red]✗ Cannot summarize {results_dir}:[/red] {e}")
        return EXIT_INVALID

    finals = Table(title="Final Fitness", show_header=True, header_style="bold cyan")
    finals.add_column("Instance", style="yellow", no_wrap=True)
    finals.add_column("Variant", style="blue")
    finals.add_column("Runs", justify="right")
    finals.add_column("Mean", justify="right")
    finals.add_column("Median", justify="right")
    finals.add_column("Best", justify="right")
    for item in report.summaries:
        finals.add_row(
            item.instance,
            item.variant,
            str(item.runs),
            f"{item.mean_final:.1f}",
            f"{item.median_final:.1f}",
            str(item.best_final),
        )
    console.print(finals)

    if report.comparisons:
        pairs = Table(title="Pairwise Comparisons", show_header=True, header_style="bold cyan")
        pairs.add_column("Instance", style="yellow", no_wrap=True)
        pairs.add_column("A", style="blue")
        pairs.add_column("B", style="blue")
        pairs.add_column("W", justify="right")
        pairs.add_column("p", justify="right")
        pairs.add_column("Verdict", justify="center")
        for item in report.comparisons:
            pairs.add_row(
                item.instance,
                item.variant_a,
                item.variant_b,
                f"{item.statistic:g}",
                f"{item.p_value:.4g}",
                item.verdict,
            )
        console.print(pairs)

    for item in report.excluded:
        console.print(
            f"[yellow]⚠ Excluded {item.instance} / {item.variant} / run {item.run}: "
            f"{item.reason}[/yellow]"
        )
    console.print(f"[green]✓ Report written to {out_dir or results_dir}[/green]")
    return EXIT_PARTIAL if report.excluded else EXIT_OK


def plot_schedule(
    instance_file: str,
    output: str,
    schedule_file: str | None = None,
    node_path: list[NodeId] | None = None,
    options: DiagramOptions | None = None,
    scheduler_config: SchedulerConfig | None = None,
) -> int:
    """
    Draw the space/time diagram of a schedule.

    Parameters
    ----------
    instance_file : str
        Instance the schedule belongs to.
    output : str
        SVG file to write.
    schedule_file : str | None, optional
        Schedule document; without it the timetable-order decode is drawn.
    node_path : list[NodeId] | None, optional
        Nodes on the vertical axis; defaults to the perturbed train's
        itinerary.
    options : DiagramOptions | None, optional
        Layout settings; the perturbed train is highlighted by default.
    scheduler_config : SchedulerConfig | None, optional
        Decoder settings of the timetable-order decode.

    Returns
    -------
    int
        Exit code (0 for success, 2 for unreadable input).
    """
    try:
        instance = load_problem(instance_file)
        problem = apply_perturbation(instance)
        if schedule_file is not None:
            assignments = parse_schedule(
                Path(schedule_file).read_text(encoding="utf-8")
            ).assignments
        else:
            decoded = schedule(problem, timetable_order(problem), scheduler_config)
            assignments = {
                train_id: dict(entries) for train_id, entries in decoded.assignments.items()
            }
    except (OSError, InstanceParseError, InstanceValidationError, ValueError) as e:
        console.print(f"[red]✗ Cannot read input:[/red] {e}")
        return EXIT_INVALID

    site = problem.perturbation
    path = node_path or list(problem.train(site.train).itinerary)
    options = options or DiagramOptions()
    if not options.highlight and not site.is_empty:
        options = replace(options, highlight=frozenset({site.train}))
    try:
        emit_space_time(assignments, path, options, output)
    except ValueError as e:
        console.print(f"[red]✗ Cannot draw diagram:[/red] {e}")
        return EXIT_INVALID
    console.print(f"[green]✓ Diagram written to {output}[/green]")
    return EXIT_OK
