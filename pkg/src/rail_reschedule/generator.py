"""
Synthetic instance generation and difficulty labelling.

Networks are a main corridor with branch junctions (or a grid). Trains run
shortest paths between random nodes. Their timetable is obtained by
decoding desired times with the scheduler itself, so an unperturbed
generated timetable is feasible; minor violations are then injected on
purpose by raising the spacing required between consecutive trains on a
node track above the margin they actually keep.
"""

import json
import math
from collections import deque
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, replace
from enum import StrEnum
from pathlib import Path

import numpy as np

from rail_reschedule.constraints import Assignment
from rail_reschedule.instance_io import instance_digest, save_instance
from rail_reschedule.model import (
    Connection,
    Edge,
    EdgeKey,
    Gate,
    Instance,
    Network,
    NodeId,
    Perturbation,
    PerturbationError,
    RouteTriplet,
    SpacingConstants,
    Timetable,
    TimetableEntry,
    Train,
    TrainId,
    apply_perturbation,
    edge_key,
    empty_problem,
    timetable_order,
)
from rail_reschedule.scheduler import (
    SchedulerConfig,
    exhaustive_optimum,
    schedule,
)


# Constants
DAY_START = 6 * 3600
PEAK_HEADWAY = 120
DEFAULT_TRANSFER = 120
GATE_HEADWAY = 20
SETTLE_ROUNDS = 8
PROXY_SAMPLES = 1000
METADATA_SUFFIX = ".meta.json"


class GenerationError(ValueError):
    """Raised when parameters cannot produce a loadable instance."""

    def __init__(self, message: str, diagnostics: list[str] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []


class Topology(StrEnum):
    """Network layout."""

    LINE = "line"
    GRID = "grid"


@dataclass(frozen=True)
class GeneratorParams:
    """
    Knobs of the instance generator.

    ``traffic_density`` in ``(0, 1]`` squeezes the origin departures into a
    window of ``n_trains * 120 / density`` seconds; ``violation_rate`` is
    the share of consecutive same-track pairs whose spacing is made
    infeasible; ``connection_rate`` the share of satisfied transfer
    opportunities declared as connections.

    Every track combination of every movement through a node is an
    admissible route unless ``routes_per_node`` caps their number. The cap
    never drops the last route of a movement entering on a given track, so
    a node keeps at least one route per (movement, incoming track).
    """

    n_trains: int = 8
    n_nodes: int = 6
    tracks_per_edge: tuple[int, int] = (1, 2)
    node_tracks: tuple[int, int] = (1, 3)
    routes_per_node: int | None = None
    gate_density: float = 0.2
    traffic_density: float = 0.5
    delay_range: tuple[int, int] = (60, 600)
    violation_rate: float = 0.0
    connection_rate: float = 0.0
    topology: Topology = Topology.LINE
    seed: int = 0


def validate_params(params: GeneratorParams) -> tuple[bool, list[str]]:
    """
    Validate generator parameters.

    Parameters
    ----------
    params : GeneratorParams
        Parameters to check.

    Returns
    -------
    tuple[bool, list[str]]
        Tuple of (is_valid, list of error messages).
    """
    errors = []
    if params.n_trains < 1:
        errors.append("n_trains must be at least 1")
    if params.n_nodes < 2:
        errors.append("n_nodes must be at least 2")
    for name, (low, high) in (
        ("tracks_per_edge", params.tracks_per_edge),
        ("node_tracks", params.node_tracks),
    ):
        if not 1 <= low <= high:
            errors.append(f"{name} must satisfy 1 <= low <= high")
    if params.routes_per_node is not None and params.routes_per_node < 1:
        errors.append("routes_per_node must be at least 1")
    low, high = params.delay_range
    if not 0 <= low <= high:
        errors.append("delay_range must satisfy 0 <= low <= high")
    if not 0 < params.traffic_density <= 1:
        errors.append("traffic_density must lie in (0, 1]")
    for name, value in (
        ("gate_density", params.gate_density),
        ("violation_rate", params.violation_rate),
        ("connection_rate", params.connection_rate),
    ):
        if not 0 <= value <= 1:
            errors.append(f"{name} must lie in [0, 1]")
    return len(errors) == 0, errors


@dataclass(frozen=True)
class InjectedViolation:
    """A consecutive same-track pair whose spacing was made infeasible."""

    first: TrainId
    second: TrainId
    node: NodeId
    gamma: int
    margin: int


@dataclass
class GenerationMetadata:
    """Ground truth written to the sidecar file."""

    params: GeneratorParams
    instance_hash: str
    injected_violations: list[InjectedViolation] = field(default_factory=list)
    connections: int = 0
    settle_rounds: int = 0

    def to_json(self) -> str:
        """Serialize deterministically."""
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


@dataclass
class GeneratedInstance:
    """A generated instance with its metadata."""

    instance: Instance
    metadata: GenerationMetadata


def _integer(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1] + 1))


def _topology_pairs(params: GeneratorParams, rng: np.random.Generator) -> list[tuple[int, int]]:
    n = params.n_nodes
    if params.topology is Topology.GRID:
        columns = math.ceil(math.sqrt(n))
        pairs = []
        for index in range(n):
            if (index + 1) % columns and index + 1 < n:
                pairs.append((index, index + 1))
            if index + columns < n:
                pairs.append((index, index + columns))
        return pairs
    corridor = max(2, n - n // 3)
    pairs = [(index, index + 1) for index in range(corridor - 1)]
    pairs.extend((int(rng.integers(corridor)), branch) for branch in range(corridor, n))
    return pairs


def _routes(
    node: NodeId,
    neighbours: list[NodeId],
    tracks: int,
    edge_tracks: dict[EdgeKey, int],
) -> tuple[RouteTriplet, ...]:
    """Every track combination for every movement through a node."""
    ends: list[NodeId | None] = [None, *neighbours]
    triplets = []
    for inc in ends:
        for out in ends:
            if inc == out:
                continue
            inc_tracks = edge_tracks[edge_key(node, inc)] if inc is not None else 1
            out_tracks = edge_tracks[edge_key(node, out)] if out is not None else 1
            triplets.extend(
                RouteTriplet(u_inc, u, u_out, inc, out)
                for u_inc in range(inc_tracks)
                for u in range(tracks)
                for u_out in range(out_tracks)
            )
    return tuple(triplets)


def _limit_routes(
    triplets: tuple[RouteTriplet, ...], limit: int, rng: np.random.Generator
) -> tuple[RouteTriplet, ...]:
    """Keep at most ``limit`` triplets, one per (movement, incoming track) at least."""
    if len(triplets) <= limit:
        return triplets
    groups: dict[tuple[NodeId | None, NodeId | None, int], list[int]] = {}
    for index, route in enumerate(triplets):
        groups.setdefault((route.inc, route.out, route.u_inc), []).append(index)
    kept = [members[int(rng.integers(len(members)))] for members in groups.values()]
    chosen = set(kept)
    spare = [index for index in range(len(triplets)) if index not in chosen]
    room = max(0, limit - len(kept))
    kept.extend(int(index) for index in rng.permutation(spare)[:room])
    return tuple(triplets[index] for index in sorted(kept))


@dataclass
class _Layout:
    network: Network
    neighbours: dict[NodeId, list[NodeId]]
    running: dict[EdgeKey, int]


def _build_network(params: GeneratorParams, rng: np.random.Generator) -> _Layout:
    nodes = [f"N{index:02d}" for index in range(params.n_nodes)]
    neighbours: dict[NodeId, list[NodeId]] = {node: [] for node in nodes}
    edges = []
    edge_tracks: dict[EdgeKey, int] = {}
    running: dict[EdgeKey, int] = {}
    for first, second in _topology_pairs(params, rng):
        a, b = nodes[first], nodes[second]
        edges.append(Edge(a, b, _integer(rng, params.tracks_per_edge)))
        edge_tracks[edge_key(a, b)] = edges[-1].track_count
        running[edge_key(a, b)] = 10 * int(rng.integers(12, 37))
        neighbours[a].append(b)
        neighbours[b].append(a)
    for node in nodes:
        neighbours[node].sort()
    node_tracks = {node: _integer(rng, params.node_tracks) for node in nodes}
    routes = {
        node: _routes(node, neighbours[node], node_tracks[node], edge_tracks)
        for node in nodes
    }
    if params.routes_per_node is not None:
        routes = {
            node: _limit_routes(triplets, params.routes_per_node, rng)
            for node, triplets in routes.items()
        }
    gates: dict[NodeId, tuple[Gate, ...]] = {}
    for node in nodes:
        if rng.random() < params.gate_density:
            side = neighbours[node][0]
            members = tuple(
                (side, track) for track in range(edge_tracks[edge_key(node, side)])
            )
            gates[node] = (Gate(f"G{node}", node, members, 1, GATE_HEADWAY),)
    network = Network(
        nodes=tuple(nodes),
        node_tracks=node_tracks,
        edges=tuple(edges),
        routes=routes,
        gates=gates,
    )
    return _Layout(network, neighbours, running)


def _shortest_path(
    neighbours: dict[NodeId, list[NodeId]], origin: NodeId, destination: NodeId
) -> list[NodeId]:
    parents: dict[NodeId, NodeId | None] = {origin: None}
    queue = deque([origin])
    while queue:
        node = queue.popleft()
        if node == destination:
            break
        for neighbour in neighbours[node]:
            if neighbour not in parents:
                parents[neighbour] = node
                queue.append(neighbour)
    path = [destination]
    while (previous := parents[path[-1]]) is not None:
        path.append(previous)
    return path[::-1]


def _first_route(
    network: Network,
    node: NodeId,
    previous: NodeId | None,
    following: NodeId | None,
    u_inc: int | None,
) -> RouteTriplet:
    return next(
        route
        for route in network.routes[node]
        if route.serves(previous, following) and (u_inc is None or route.u_inc == u_inc)
    )


def _build_trains(
    params: GeneratorParams, layout: _Layout, rng: np.random.Generator
) -> tuple[list[Train], dict[tuple[TrainId, NodeId], TimetableEntry]]:
    """Draw itineraries and desired, conflict-unaware times."""
    nodes = list(layout.network.nodes)
    window = max(1, math.ceil(params.n_trains * PEAK_HEADWAY / params.traffic_density))
    trains = []
    desired: dict[tuple[TrainId, NodeId], TimetableEntry] = {}
    width = max(2, len(str(params.n_trains)))
    for k in range(params.n_trains):
        train_id = f"T{k + 1:0{width}d}"
        origin, destination = (nodes[int(i)] for i in rng.choice(len(nodes), 2, replace=False))
        itinerary = _shortest_path(layout.neighbours, origin, destination)
        slow = rng.random() < 0.5
        min_travel = {
            (a, b): layout.running[edge_key(a, b)] * (5 if slow else 4) // 4
            for a, b in zip(itinerary, itinerary[1:])
        }
        stop_bounds = {}
        for position, node in enumerate(itinerary):
            intermediate = 0 < position < len(itinerary) - 1
            alpha_min = 30 * int(rng.integers(0, 3)) if intermediate else 0
            stop_bounds[node] = (alpha_min, alpha_min + 600)
        trains.append(Train(train_id, tuple(itinerary), stop_bounds, min_travel))

        departure = DAY_START + 10 * int(rng.integers(0, window // 10 + 1))
        arrival = departure
        u_out: int | None = None
        for position, node in enumerate(itinerary):
            previous = itinerary[position - 1] if position > 0 else None
            following = itinerary[position + 1] if position + 1 < len(itinerary) else None
            if previous is not None:
                arrival = departure + min_travel[(previous, node)]
                departure = arrival + stop_bounds[node][0]
            route = _first_route(layout.network, node, previous, following, u_out)
            u_out = route.u_out
            desired[(train_id, node)] = TimetableEntry(arrival, departure, route)
    return trains, desired


def _schedule_entries(
    assignments: Mapping[TrainId, Mapping[NodeId, Assignment]],
) -> dict[tuple[TrainId, NodeId], TimetableEntry]:
    return {
        (train_id, node): TimetableEntry(entry.arrival, entry.departure, entry.route)
        for train_id, nodes in assignments.items()
        for node, entry in nodes.items()
    }


def _settle(instance: Instance) -> tuple[Instance, int]:
    """
    Replace the timetable by its own decode until it is a fixed point.

    Raises
    ------
    GenerationError
        If some train cannot be scheduled at all.
    """
    rounds = 0
    for rounds in range(1, SETTLE_ROUNDS + 1):
        problem = empty_problem(instance)
        result = schedule(problem, timetable_order(problem))
        if result.unscheduled:
            raise GenerationError(
                "Traffic too dense to place every train",
                [
                    f"train {train_id} could not be scheduled"
                    for train_id in sorted(result.unscheduled)
                ],
            )
        entries = _schedule_entries(result.assignments)
        if entries == dict(instance.timetable.entries):
            break
        ordered = {
            (train.train_id, node): entries[(train.train_id, node)]
            for train in instance.trains
            for node in train.itinerary
        }
        instance = replace(instance, timetable=Timetable(ordered))
    return instance, rounds


def _add_connections(
    instance: Instance, rate: float, rng: np.random.Generator
) -> tuple[Instance, int]:
    """Declare a share of the transfers the timetable already allows."""
    if rate <= 0:
        return instance, 0
    timetable = instance.timetable
    added: dict[TrainId, list[Connection]] = {}
    total = 0
    for feeder in instance.trains:
        for partner in instance.trains:
            if feeder.train_id == partner.train_id:
                continue
            for node in partner.itinerary[:-1]:
                if node not in feeder.itinerary:
                    continue
                arrival = timetable[(feeder.train_id, node)].arrival
                departure = timetable[(partner.train_id, node)].departure
                if departure >= arrival + DEFAULT_TRANSFER and rng.random() < rate:
                    added.setdefault(feeder.train_id, []).append(
                        Connection(partner.train_id, node, DEFAULT_TRANSFER)
                    )
                    total += 1
    trains = tuple(
        replace(train, connections=tuple(added.get(train.train_id, ())))
        for train in instance.trains
    )
    return replace(instance, trains=trains), total


def _inject_violations(
    instance: Instance, rate: float, rng: np.random.Generator
) -> tuple[Instance, list[InjectedViolation]]:
    """Raise gamma above the kept margin for a share of consecutive pairs."""
    if rate <= 0:
        return instance, []
    spacing = instance.spacing
    occupants: dict[tuple[NodeId, int], list[tuple[int, int, TrainId]]] = {}
    for train in instance.trains:
        for node in train.itinerary:
            entry = instance.timetable[(train.train_id, node)]
            occupants.setdefault((node, entry.route.u), []).append(
                (entry.arrival, entry.departure, train.train_id)
            )
    gamma = dict(spacing.gamma)
    injected = []
    for (node, _), visits in sorted(occupants.items()):
        visits.sort()
        for (_, first_departure, first), (second_arrival, _, second) in zip(
            visits, visits[1:]
        ):
            if rng.random() >= rate:
                continue
            margin = second_arrival - first_departure
            value = max(0, margin) + 1 + int(rng.integers(0, 31))
            gamma[(first, second, node)] = value
            gamma[(second, first, node)] = value
            injected.append(InjectedViolation(first, second, node, value, margin))
    return replace(instance, spacing=replace(spacing, gamma=gamma)), injected


def generate(params: GeneratorParams) -> GeneratedInstance:
    """
    Generate an instance and its ground-truth metadata.

    Parameters
    ----------
    params : GeneratorParams
        Generator parameters; ``seed`` makes the output reproducible.

    Returns
    -------
    GeneratedInstance
        Instance carrying a random perturbation site and delay, and the
        metadata recording injected violations.

    Raises
    ------
    GenerationError
        If the parameters are invalid or the traffic cannot be placed.
    """
    is_valid, errors = validate_params(params)
    if not is_valid:
        raise GenerationError("Invalid generator parameters", errors)

    rng = np.random.default_rng(params.seed)
    layout = _build_network(params, rng)
    trains, desired = _build_trains(params, layout, rng)
    spacing = SpacingConstants(
        node_gamma={node: 10 * int(rng.integers(3, 10)) for node in layout.network.nodes},
        edge_headway={edge.key: 10 * int(rng.integers(6, 13)) for edge in layout.network.edges},
    )
    instance = Instance(
        network=layout.network,
        trains=tuple(trains),
        timetable=Timetable(desired),
        spacing=spacing,
    )
    instance, rounds = _settle(instance)
    instance, connections = _add_connections(instance, params.connection_rate, rng)
    instance, injected = _inject_violations(instance, params.violation_rate, rng)

    victim = instance.trains[int(rng.integers(len(instance.trains)))]
    node = victim.itinerary[int(rng.integers(len(victim.itinerary) - 1))]
    instance = replace(
        instance,
        perturbation=Perturbation(victim.train_id, node, _integer(rng, params.delay_range)),
    )
    metadata = GenerationMetadata(
        params=params,
        instance_hash=instance_digest(instance),
        injected_violations=injected,
        connections=connections,
        settle_rounds=rounds,
    )
    return GeneratedInstance(instance, metadata)


def metadata_path(instance_path: str | Path) -> Path:
    """Sidecar path of an instance file."""
    path = Path(instance_path)
    return path.with_name(path.name + METADATA_SUFFIX)


def save_generated(generated: GeneratedInstance, path: str | Path) -> tuple[Path, Path]:
    """Write the instance document and its metadata sidecar."""
    instance_file = save_instance(generated.instance, path)
    sidecar = metadata_path(instance_file)
    sidecar.write_text(generated.metadata.to_json(), encoding="utf-8")
    return instance_file, sidecar


def make_instance_pair(
    base: Instance, delay_easy: int, delay_hard: int
) -> tuple[Instance, Instance]:
    """
    Derive an easy and a hard variant of one perturbation site.

    Parameters
    ----------
    base : Instance
        Instance carrying a perturbation site.
    delay_easy : int
        Delay of the easy variant; 0 gives the empty perturbation.
    delay_hard : int
        Delay of the hard variant, at least ``delay_easy``.

    Returns
    -------
    tuple[Instance, Instance]
        The easy and the hard variant.

    Raises
    ------
    PerturbationError
        If a delay is negative, the delays are out of order or the base has
        no perturbation site.
    """
    if delay_easy < 0 or delay_hard < 0:
        raise PerturbationError("Delays must be non-negative")
    if delay_easy > delay_hard:
        raise PerturbationError("The easy delay must not exceed the hard delay")
    return base.with_delay(delay_easy), base.with_delay(delay_hard)


class Difficulty(StrEnum):
    """Difficulty label of a perturbed instance."""

    EASY = "easy"
    HARD = "hard"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class InstanceLabel:
    """Difficulty label with the evidence behind it."""

    label: Difficulty
    identity_fitness: int
    oracle_fitness: int | None = None
    baseline_fitness: int | None = None
    method: str = "none"


def classify(
    instance: Instance,
    budget: int,
    config: SchedulerConfig | None = None,
    seed: int = 0,
) -> InstanceLabel:
    """
    Label an instance easy or hard without an exact solver.

    The timetable-order decode is compared against the optimum over all
    permutations when at most ``budget`` of them exist, otherwise against
    the best of 1000 random decodes when the budget allows that many.

    Parameters
    ----------
    instance : Instance
        Perturbed instance.
    budget : int
        Maximum number of decodes.
    config : SchedulerConfig | None, optional
        Decoder settings.
    seed : int, optional
        Seed of the random baseline, by default 0.

    Returns
    -------
    InstanceLabel
        ``easy`` when the timetable-order decode is already optimal (or
        matches the random baseline), ``hard`` otherwise, ``unknown`` when
        the budget covers neither check.
    """
    problem = apply_perturbation(instance)
    identity = schedule(problem, timetable_order(problem), config).fitness
    oracle = exhaustive_optimum(problem, config, budget)
    if oracle is not None:
        label = Difficulty.EASY if identity <= oracle.fitness else Difficulty.HARD
        return InstanceLabel(label, identity, oracle_fitness=oracle.fitness, method="exhaustive")
    if budget >= PROXY_SAMPLES:
        rng = np.random.default_rng(seed)
        ids = problem.train_ids
        baseline = min(
            schedule(
                problem, tuple(ids[int(i)] for i in rng.permutation(len(ids))), config
            ).fitness
            for _ in range(PROXY_SAMPLES)
        )
        label = Difficulty.EASY if identity <= baseline else Difficulty.HARD
        return InstanceLabel(label, identity, baseline_fitness=baseline, method="proxy")
    return InstanceLabel(Difficulty.UNKNOWN, identity)
