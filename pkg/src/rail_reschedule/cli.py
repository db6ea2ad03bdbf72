"""
Command-line interface for rail-reschedule.

Every option can also be set in a KEY=VALUE config file given with
``--config``; keys are the upper-snake form of the long flags. Flags win
over the config file, which wins over the built-in defaults.
"""

import argparse
import sys
from collections.abc import Mapping
from importlib.metadata import version
from pathlib import Path

from rail_reschedule.bench.commands import (
    EXIT_INVALID,
    generate_instances,
    inoculate_instances,
    plot_schedule,
    report_results,
    run_experiments,
)
from rail_reschedule.bench.plan import (
    DEFAULT_RUNS,
    ExperimentPlan,
    Timing,
    Variant,
    load_variants_csv,
    select_presets,
)
from rail_reschedule.bench.runner import load_plan_manifest
from rail_reschedule.bench.space_time import DiagramOptions
from rail_reschedule.evolution import (
    ConfigurationError,
    EAConfig,
    Replacement,
    TemperatureSchedule,
)
from rail_reschedule.generator import GeneratorParams, Topology
from rail_reschedule.scheduler import DEFAULT_KICK_LIMIT, SchedulerConfig
from rail_reschedule.utils import console, load_config, parse_bool, resolve_option, warn


# Config keys understood by at least one subcommand
CONFIG_KEYS = {
    "MU",
    "LAMBDA",
    "GENERATIONS",
    "TEMPERATURE",
    "BINOMIAL",
    "REPLACEMENT",
    "TOURNAMENT_SIZE",
    "RADIUS",
    "KICK_LIMIT",
    "RUNS",
    "WORKERS",
    "CELL_WORKERS",
    "SEED",
    "TIME_BUDGET",
    "TIMING",
    "VARIANTS",
    "VARIANTS_CSV",
    "INOCULANT_GENERATIONS",
    "TRAINS",
    "NODES",
    "TOPOLOGY",
    "GATE_DENSITY",
    "TRAFFIC_DENSITY",
    "VIOLATION_RATE",
    "CONNECTION_RATE",
    "COUNT",
}
DEFAULT_VARIANTS = "MM,RANDOM"


def get_version() -> str:
    """
    Get the installed version of the package.

    Returns
    -------
    str
        Version string from package metadata.
    """
    try:
        return version("rail-reschedule")
    except Exception:
        return "unknown"


def _add_ea_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by the commands that run the evolutionary loop."""
    parser.add_argument("--mu", type=int, help="Number of parents (default: 10)")
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=int,
        help="Offspring per generation, a multiple of mu (default: 70)",
    )
    parser.add_argument("--generations", type=int, help="Generations per run (default: 100)")
    parser.add_argument(
        "--temperature",
        type=float,
        help="Constant mutation strength (default: 4)",
    )
    parser.add_argument(
        "--binomial",
        type=parse_bool,
        help="Draw swap counts from a binomial law (default: true)",
    )
    parser.add_argument(
        "--replacement",
        choices=[item.value for item in Replacement],
        help="Survivor selection (default: plus)",
    )
    parser.add_argument(
        "--tournament-size", type=int, help="Opponents per individual in ept (default: 10)"
    )
    parser.add_argument("--radius", type=int, help="Maximum swap distance (default: none)")
    parser.add_argument(
        "--kick-limit",
        type=int,
        help=f"Kicks allowed per train and decode (default: {DEFAULT_KICK_LIMIT})",
    )
    parser.add_argument("--seed", type=int, help="Root seed (default: 0)")
    parser.add_argument("--time-budget", type=float, help="Wall-clock seconds per run")
    parser.add_argument(
        "--workers", type=int, help="Threads decoding offspring (default: 1)"
    )
    parser.add_argument(
        "--config", type=str, help="KEY=VALUE file providing defaults for these flags"
    )
    parser.add_argument("--quiet", action="store_true", help="Hide progress output")


def resolve_ea_config(args: argparse.Namespace, config: Mapping[str, str]) -> EAConfig:
    """
    Build the EA settings from flags and config file.

    Raises
    ------
    ConfigurationError
        If lambda is not a positive multiple of mu or a value is invalid.
    """
    mu = resolve_option(args.mu, config, "MU", 10, int)
    lam = resolve_option(args.lam, config, "LAMBDA", 7 * mu, int)
    if mu < 1 or lam < mu or lam % mu:
        raise ConfigurationError(f"lambda={lam} must be a positive multiple of mu={mu}")
    radius = resolve_option(args.radius, config, "RADIUS", 0, int)
    return EAConfig(
        mu=mu,
        offspring_per_parent=lam // mu,
        replacement=Replacement(
            resolve_option(args.replacement, config, "REPLACEMENT", "plus", str)
        ),
        tournament_size=resolve_option(
            args.tournament_size, config, "TOURNAMENT_SIZE", 10, int
        ),
        radius=radius or None,
        temperature=TemperatureSchedule.constant(
            resolve_option(args.temperature, config, "TEMPERATURE", 4.0, float),
            resolve_option(args.binomial, config, "BINOMIAL", True, parse_bool),
        ),
        generations=resolve_option(args.generations, config, "GENERATIONS", 100, int),
        seed=resolve_option(args.seed, config, "SEED", 0, int),
        time_budget=resolve_option(args.time_budget, config, "TIME_BUDGET", None, float),
        workers=resolve_option(args.workers, config, "WORKERS", 1, int),
    )


def resolve_scheduler_config(
    args: argparse.Namespace, config: Mapping[str, str]
) -> SchedulerConfig:
    """Build the decoder settings from flags and config file."""
    return SchedulerConfig(
        kick_limit=resolve_option(
            args.kick_limit, config, "KICK_LIMIT", DEFAULT_KICK_LIMIT, int
        )
    )


def _load_config(path: str | None) -> dict[str, str]:
    config = load_config(path)
    unknown = sorted(set(config) - CONFIG_KEYS)
    if unknown:
        warn(f"Ignoring unknown config keys: {', '.join(unknown)}")
    return config


def _resolve_variants(args: argparse.Namespace, config: Mapping[str, str]) -> list[Variant]:
    csv_path = resolve_option(args.variants_csv, config, "VARIANTS_CSV", None, str)
    if csv_path is not None:
        return load_variants_csv(csv_path)
    ids = resolve_option(args.variants, config, "VARIANTS", DEFAULT_VARIANTS, str)
    return select_presets([item.strip() for item in ids.split(",") if item.strip()])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rail-reschedule",
        description="Railway re-scheduling with an inoculated evolutionary algorithm",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {get_version()}",
        help="Show version number and exit",
    )
    subparsers = parser.add_subparsers(
        dest="command",
        help="Command to run",
        required=True,
    )

    # generate subcommand
    generate_parser = subparsers.add_parser(
        "generate",
        help="Generate seeded synthetic instances",
        description="Write seeded instances with metadata sidecars to a directory",
    )
    generate_parser.add_argument("out_dir", type=str, help="Output directory")
    generate_parser.add_argument("--trains", type=int, help="Trains per instance (default: 8)")
    generate_parser.add_argument("--nodes", type=int, help="Nodes per instance (default: 6)")
    generate_parser.add_argument(
        "--topology",
        choices=[item.value for item in Topology],
        help="Network shape (default: line)",
    )
    generate_parser.add_argument(
        "--routes-per-node",
        type=int,
        help="Cap on admissible routes per node (default: every track combination)",
    )
    generate_parser.add_argument("--gate-density", type=float, help="Share of gated nodes")
    generate_parser.add_argument(
        "--traffic-density", type=float, help="Departure crowding in (0, 1]"
    )
    generate_parser.add_argument(
        "--violation-rate", type=float, help="Share of spacing violations to inject"
    )
    generate_parser.add_argument(
        "--connection-rate", type=float, help="Share of transfer opportunities kept"
    )
    generate_parser.add_argument("--count", type=int, help="Number of instances (default: 1)")
    generate_parser.add_argument("--seed", type=int, help="Seed of the first instance")
    generate_parser.add_argument(
        "--pair",
        nargs=2,
        type=int,
        metavar=("EASY_DELAY", "HARD_DELAY"),
        help="Write an easy and a hard variant of each instance",
    )
    generate_parser.add_argument(
        "--classify-budget",
        type=int,
        default=0,
        help="Decode budget for labelling instances easy or hard (default: skip)",
    )
    generate_parser.add_argument("--config", type=str, help="KEY=VALUE defaults file")

    # inoculate subcommand
    inoculate_parser = subparsers.add_parser(
        "inoculate",
        help="Pre-solve the empty perturbation of instances",
        description="Compute and cache the inoculant beside each instance file",
    )
    inoculate_parser.add_argument("instances", nargs="+", help="Instance files")
    inoculate_parser.add_argument(
        "--force", action="store_true", help="Recompute even when a valid cache exists"
    )
    _add_ea_arguments(inoculate_parser)

    # run subcommand
    run_parser = subparsers.add_parser(
        "run",
        help="Run a seeded experiment battery",
        description="Evolve every (instance, variant, run) cell and write traces",
    )
    run_parser.add_argument("instances", nargs="*", help="Instance files")
    run_parser.add_argument(
        "--manifest",
        type=str,
        help="Replay the plan recorded in a manifest.json (or its results directory)",
    )
    run_parser.add_argument("--out", type=str, required=True, help="Results directory")
    run_parser.add_argument(
        "--variants",
        type=str,
        help=f"Comma-separated preset ids (default: {DEFAULT_VARIANTS})",
    )
    run_parser.add_argument("--variants-csv", type=str, help="CSV file of variants")
    run_parser.add_argument(
        "--runs", type=int, help=f"Runs per variant (default: {DEFAULT_RUNS})"
    )
    run_parser.add_argument(
        "--cell-workers", type=int, help="Cells run concurrently (default: 1)"
    )
    run_parser.add_argument(
        "--timing",
        choices=[item.value for item in Timing],
        help="Record wall-clock time in traces (default: none, which keeps reruns byte-identical)",
    )
    run_parser.add_argument(
        "--inoculant-generations",
        type=int,
        help="Generations of the inoculant pre-solve (default: same as --generations)",
    )
    _add_ea_arguments(run_parser)

    # report subcommand
    report_parser = subparsers.add_parser(
        "report",
        help="Compare variants from a results directory",
        description="Write curves.csv, final.csv and comparisons.csv",
    )
    report_parser.add_argument("results_dir", type=str, help="Directory written by run")
    report_parser.add_argument("--out", type=str, help="Output directory for the CSVs")

    # plot subcommand
    plot_parser = subparsers.add_parser(
        "plot",
        help="Draw a space/time diagram",
        description="Render a schedule as an SVG space/time diagram",
    )
    plot_parser.add_argument("instance", type=str, help="Instance file")
    plot_parser.add_argument("--schedule", type=str, help="Schedule file to draw")
    plot_parser.add_argument("--out", type=str, required=True, help="SVG file to write")
    plot_parser.add_argument(
        "--path", type=str, help="Comma-separated nodes (default: perturbed itinerary)"
    )
    plot_parser.add_argument("--width", type=int, default=1200, help="Width in pixels")
    plot_parser.add_argument("--height", type=int, default=600, help="Height in pixels")
    plot_parser.add_argument("--title", type=str, help="Diagram caption")
    plot_parser.add_argument(
        "--kick-limit",
        type=int,
        default=DEFAULT_KICK_LIMIT,
        help="Kicks allowed when decoding the timetable order",
    )
    return parser


def _generate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    defaults = GeneratorParams()
    params = GeneratorParams(
        n_trains=resolve_option(args.trains, config, "TRAINS", defaults.n_trains, int),
        n_nodes=resolve_option(args.nodes, config, "NODES", defaults.n_nodes, int),
        routes_per_node=resolve_option(
            args.routes_per_node, config, "ROUTES_PER_NODE", defaults.routes_per_node, int
        ),
        gate_density=resolve_option(
            args.gate_density, config, "GATE_DENSITY", defaults.gate_density, float
        ),
        traffic_density=resolve_option(
            args.traffic_density, config, "TRAFFIC_DENSITY", defaults.traffic_density, float
        ),
        violation_rate=resolve_option(
            args.violation_rate, config, "VIOLATION_RATE", defaults.violation_rate, float
        ),
        connection_rate=resolve_option(
            args.connection_rate, config, "CONNECTION_RATE", defaults.connection_rate, float
        ),
        topology=Topology(
            resolve_option(args.topology, config, "TOPOLOGY", defaults.topology.value, str)
        ),
        seed=resolve_option(args.seed, config, "SEED", defaults.seed, int),
    )
    count = resolve_option(args.count, config, "COUNT", 1, int)
    pair = (args.pair[0], args.pair[1]) if args.pair else None
    return generate_instances(args.out_dir, params, count, pair, args.classify_budget)


def _inoculate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    ea_config = resolve_ea_config(args, config)
    return inoculate_instances(
        args.instances,
        ea_config,
        resolve_scheduler_config(args, config),
        force=args.force,
        quiet=args.quiet,
    )


def _run(args: argparse.Namespace) -> int:
    if args.manifest:
        if args.instances:
            raise ConfigurationError("Give either instance files or --manifest, not both")
        plan = load_plan_manifest(args.manifest, cell_workers=args.cell_workers or 1)
        return run_experiments(plan, args.out, quiet=args.quiet)
    if not args.instances:
        raise ConfigurationError("No instance files given")
    config = _load_config(args.config)
    ea_config = resolve_ea_config(args, config)
    inoculant_generations = resolve_option(
        args.inoculant_generations,
        config,
        "INOCULANT_GENERATIONS",
        ea_config.generations,
        int,
    )
    plan = ExperimentPlan(
        instances=tuple(Path(path) for path in args.instances),
        variants=tuple(_resolve_variants(args, config)),
        runs=resolve_option(args.runs, config, "RUNS", DEFAULT_RUNS, int),
        base_seed=ea_config.seed,
        ea=ea_config,
        scheduler=resolve_scheduler_config(args, config),
        inoculant_ea=EAConfig(
            mu=ea_config.mu,
            offspring_per_parent=ea_config.offspring_per_parent,
            temperature=ea_config.temperature,
            generations=inoculant_generations,
            seed=ea_config.seed,
        ),
        timing=Timing(resolve_option(args.timing, config, "TIMING", Timing.NONE.value, str)),
        cell_workers=resolve_option(args.cell_workers, config, "CELL_WORKERS", 1, int),
    )
    return run_experiments(plan, args.out, quiet=args.quiet)


def _plot(args: argparse.Namespace) -> int:
    node_path = [node.strip() for node in args.path.split(",")] if args.path else None
    return plot_schedule(
        args.instance,
        args.out,
        schedule_file=args.schedule,
        node_path=node_path,
        options=DiagramOptions(width=args.width, height=args.height, title=args.title),
        scheduler_config=SchedulerConfig(kick_limit=args.kick_limit),
    )


def main() -> int:
    """
    Rail re-scheduling command-line entry point.

    Returns
    -------
    int
        Exit code (0 for success, 1 for partial failure, 2 for invalid
        input).
    """
    parser = _build_parser()
    args = parser.parse_args()

    # Route to appropriate command handler
    try:
        if args.command == "generate":
            return _generate(args)
        if args.command == "inoculate":
            return _inoculate(args)
        if args.command == "run":
            return _run(args)
        if args.command == "report":
            return report_results(args.results_dir, args.out)
        if args.command == "plot":
            return _plot(args)
    except (FileNotFoundError, ValueError) as e:
        console.print(f"[red]✗ Invalid configuration:[/red] {e}")
        return EXIT_INVALID

    # Should never reach here due to required=True
    parser.print_help()
    return 1


if __name__ == "__main__":
    sys.exit(main())
