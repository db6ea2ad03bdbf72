"""
Railway world data model.

A network is a graph of nodes (stations, junctions) joined by edges that
hold one or more tracks. Each train follows a fixed itinerary and has, at
every node, three degrees of freedom: arrival time, departure time and a
route triplet choosing the incoming-edge track, the in-node track and the
outgoing-edge track. Times are integer seconds.

All types here are immutable once built so a single problem can be shared
by any number of concurrent decoders.
"""

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace
from functools import cached_property


NodeId = str
TrainId = str
EdgeKey = tuple[NodeId, NodeId]


class PerturbationError(ValueError):
    """Raised when a perturbation does not match the timetable."""


def edge_key(first: NodeId, second: NodeId) -> EdgeKey:
    """
    Return the canonical (undirected) key of the edge between two nodes.

    Parameters
    ----------
    first : NodeId
        One endpoint.
    second : NodeId
        The other endpoint.

    Returns
    -------
    EdgeKey
        The endpoints in lexicographic order.
    """
    return (first, second) if first <= second else (second, first)


@dataclass(frozen=True)
class RouteTriplet:
    """
    Physically admissible track combination at a node.

    ``inc`` and ``out`` name the neighbouring nodes the movement comes from
    and goes to; ``None`` marks the start or the end of an itinerary.
    """

    u_inc: int
    u: int
    u_out: int
    inc: NodeId | None = None
    out: NodeId | None = None

    def serves(self, previous: NodeId | None, following: NodeId | None) -> bool:
        """Return whether this triplet belongs to the given movement."""
        return self.inc == previous and self.out == following


@dataclass(frozen=True)
class Edge:
    """Undirected edge between two nodes holding ``track_count`` tracks."""

    a: NodeId
    b: NodeId
    track_count: int

    @property
    def key(self) -> EdgeKey:
        """Canonical key of this edge."""
        return edge_key(self.a, self.b)


@dataclass(frozen=True)
class Gate:
    """
    Switching gate shared by several edge tracks at one node.

    A train whose incoming or outgoing (neighbour, track) pair is a member
    occupies the gate for ``[d - headway, d + headway)`` around its
    departure ``d`` from the node. At most ``capacity`` occupancies may
    overlap.
    """

    gate_id: str
    node: NodeId
    members: tuple[tuple[NodeId, int], ...]
    capacity: int
    headway: int

    def is_used_by(self, route: RouteTriplet) -> bool:
        """Return whether a train taking ``route`` at the gate node passes it."""
        incoming = route.inc is not None and (route.inc, route.u_inc) in self.members
        outgoing = route.out is not None and (route.out, route.u_out) in self.members
        return incoming or outgoing


@dataclass(frozen=True)
class Network:
    """Nodes, edges, admissible routes and switching gates."""

    nodes: tuple[NodeId, ...]
    node_tracks: Mapping[NodeId, int]
    edges: tuple[Edge, ...]
    routes: Mapping[NodeId, tuple[RouteTriplet, ...]]
    gates: Mapping[NodeId, tuple[Gate, ...]] = field(default_factory=dict)

    @cached_property
    def edge_index(self) -> dict[EdgeKey, Edge]:
        """Edges keyed by their canonical key."""
        return {edge.key: edge for edge in self.edges}

    def edge_between(self, first: NodeId, second: NodeId) -> Edge | None:
        """Return the edge joining two nodes, if any."""
        return self.edge_index.get(edge_key(first, second))

    def all_gates(self) -> Iterator[Gate]:
        """Iterate over every gate of the network."""
        for node in self.nodes:
            yield from self.gates.get(node, ())


@dataclass(frozen=True)
class Connection:
    """Passengers of the owning train transfer to ``partner`` at ``node``."""

    partner: TrainId
    node: NodeId
    min_transfer: int


@dataclass(frozen=True)
class Train:
    """
    A train and its operating bounds.

    ``stop_bounds`` maps each itinerary node to ``(alpha_min, alpha_max)``;
    ``min_travel`` maps each consecutive node pair to the running time
    ``beta``.
    """

    train_id: TrainId
    itinerary: tuple[NodeId, ...]
    stop_bounds: Mapping[NodeId, tuple[int, int]]
    min_travel: Mapping[tuple[NodeId, NodeId], int]
    connections: tuple[Connection, ...] = ()

    def previous(self, node: NodeId) -> NodeId | None:
        """Return the node visited before ``node``, ``None`` at the origin."""
        position = self.itinerary.index(node)
        return self.itinerary[position - 1] if position > 0 else None

    def following(self, node: NodeId) -> NodeId | None:
        """Return the node visited after ``node``, ``None`` at the terminus."""
        position = self.itinerary.index(node)
        if position + 1 < len(self.itinerary):
            return self.itinerary[position + 1]
        return None


@dataclass(frozen=True)
class TimetableEntry:
    """Theoretical arrival, departure and route of a train at a node."""

    arrival: int
    departure: int
    route: RouteTriplet


@dataclass(frozen=True)
class Timetable:
    """The unperturbed reference schedule keyed by ``(train, node)``."""

    entries: Mapping[tuple[TrainId, NodeId], TimetableEntry]

    def __getitem__(self, key: tuple[TrainId, NodeId]) -> TimetableEntry:
        """Return the entry of a ``(train, node)`` pair."""
        return self.entries[key]


@dataclass(frozen=True)
class SpacingConstants:
    """
    Safety spacing constants.

    ``gamma`` holds ordered-pair overrides ``(c, c2, node) -> seconds``
    between the departure of ``c`` and the arrival of ``c2``; pairs without
    an override use the node default ``node_gamma``.
    """

    node_gamma: Mapping[NodeId, int] = field(default_factory=dict)
    edge_headway: Mapping[EdgeKey, int] = field(default_factory=dict)
    gamma: Mapping[tuple[TrainId, TrainId, NodeId], int] = field(default_factory=dict)

    def gamma_for(self, first: TrainId, second: TrainId, node: NodeId) -> int:
        """Minimum gap between ``first`` leaving and ``second`` arriving."""
        override = self.gamma.get((first, second, node))
        if override is not None:
            return override
        return self.node_gamma.get(node, 0)

    def headway_for(self, first: NodeId, second: NodeId) -> int:
        """Headway on the edge joining two nodes."""
        return self.edge_headway.get(edge_key(first, second), 0)


@dataclass(frozen=True)
class Perturbation:
    """One train delayed by ``delay`` seconds at one node."""

    train: TrainId
    node: NodeId
    delay: int = 0

    @property
    def is_empty(self) -> bool:
        """Whether this is the empty perturbation."""
        return self.delay == 0


@dataclass(frozen=True)
class Instance:
    """Everything an instance document holds."""

    network: Network
    trains: tuple[Train, ...]
    timetable: Timetable
    spacing: SpacingConstants
    perturbation: Perturbation | None = None

    @cached_property
    def train_index(self) -> dict[TrainId, Train]:
        """Trains keyed by identifier."""
        return {train.train_id: train for train in self.trains}

    @property
    def train_ids(self) -> tuple[TrainId, ...]:
        """Train identifiers in declaration order."""
        return tuple(train.train_id for train in self.trains)

    def without_perturbation(self) -> "Instance":
        """Return a copy carrying no perturbation."""
        return replace(self, perturbation=None)

    def with_delay(self, delay: int) -> "Instance":
        """
        Return a copy whose perturbation delay is ``delay``.

        Raises
        ------
        PerturbationError
            If the instance carries no perturbation site.
        """
        if self.perturbation is None:
            raise PerturbationError("Instance has no perturbation site to delay")
        return replace(self, perturbation=replace(self.perturbation, delay=delay))


@dataclass(frozen=True)
class PerturbedProblem:
    """
    An instance together with the lower bounds induced by a perturbation.

    This is the read-only problem object shared by the scheduler, the
    constraint predicates and the evolutionary loop.
    """

    instance: Instance
    perturbation: Perturbation

    @property
    def network(self) -> Network:
        """The railway network."""
        return self.instance.network

    @property
    def timetable(self) -> Timetable:
        """The unperturbed timetable."""
        return self.instance.timetable

    @property
    def spacing(self) -> SpacingConstants:
        """Spacing constants."""
        return self.instance.spacing

    @property
    def train_ids(self) -> tuple[TrainId, ...]:
        """Train identifiers in declaration order."""
        return self.instance.train_ids

    def train(self, train_id: TrainId) -> Train:
        """Return a train by identifier."""
        return self.instance.train_index[train_id]

    def arrival_bound(self, train_id: TrainId, node: NodeId) -> int:
        """Earliest admissible arrival, delayed at the perturbed node only."""
        bound = self.timetable[(train_id, node)].arrival
        if train_id == self.perturbation.train and node == self.perturbation.node:
            bound += self.perturbation.delay
        return bound

    def departure_bound(self, train_id: TrainId, node: NodeId) -> int:
        """Earliest admissible departure."""
        return self.timetable[(train_id, node)].departure

    @cached_property
    def admissible(self) -> dict[tuple[TrainId, NodeId], tuple[tuple[int, RouteTriplet], ...]]:
        """Indexed route triplets each train may take at each node."""
        table: dict[tuple[TrainId, NodeId], tuple[tuple[int, RouteTriplet], ...]] = {}
        for train in self.instance.trains:
            for position, node in enumerate(train.itinerary):
                previous = train.itinerary[position - 1] if position > 0 else None
                following = (
                    train.itinerary[position + 1]
                    if position + 1 < len(train.itinerary)
                    else None
                )
                table[(train.train_id, node)] = tuple(
                    (index, route)
                    for index, route in enumerate(self.network.routes.get(node, ()))
                    if route.serves(previous, following)
                )
        return table

    def routes_for(
        self, train_id: TrainId, node: NodeId
    ) -> tuple[tuple[int, RouteTriplet], ...]:
        """Return ``(route index, triplet)`` pairs usable by a train at a node."""
        return self.admissible[(train_id, node)]

    @cached_property
    def feeders(self) -> dict[tuple[TrainId, NodeId], tuple[tuple[TrainId, int], ...]]:
        """``(partner, node) -> ((feeder, transfer), ...)`` lookup."""
        table: dict[tuple[TrainId, NodeId], list[tuple[TrainId, int]]] = {}
        for train in self.instance.trains:
            for connection in train.connections:
                table.setdefault((connection.partner, connection.node), []).append(
                    (train.train_id, connection.min_transfer)
                )
        return {key: tuple(value) for key, value in table.items()}

    def connections_into(
        self, train_id: TrainId, node: NodeId
    ) -> tuple[tuple[TrainId, int], ...]:
        """Feeders whose passengers board ``train_id`` at ``node``."""
        return self.feeders.get((train_id, node), ())

    def connections_from(
        self, train_id: TrainId, node: NodeId
    ) -> tuple[tuple[TrainId, int], ...]:
        """Partners that wait for passengers of ``train_id`` at ``node``."""
        return tuple(
            (connection.partner, connection.min_transfer)
            for connection in self.train(train_id).connections
            if connection.node == node
        )

    @cached_property
    def horizon_end(self) -> int:
        """Upper end of the scheduling horizon, measured from the epoch origin."""
        entries = self.timetable.entries.values()
        latest = max(entry.departure for entry in entries)
        earliest = min(entry.arrival for entry in entries)
        return latest + self.perturbation.delay + (latest - earliest) + 1

    @cached_property
    def penalty(self) -> int:
        """Default fitness penalty per unscheduled train."""
        longest = max(len(train.itinerary) for train in self.instance.trains)
        return self.horizon_end * len(self.instance.trains) * longest


def apply_perturbation(
    instance: Instance, perturbation: Perturbation | None = None
) -> PerturbedProblem:
    """
    Build the perturbed problem for an instance.

    Lower bounds are the theoretical times everywhere except at the
    perturbed ``(train, node)``, whose arrival bound becomes ``a0 + delay``.
    Downstream bounds are left untouched; the scheduler propagates the
    delay through running and stopping times.

    Parameters
    ----------
    instance : Instance
        The loaded instance.
    perturbation : Perturbation | None, optional
        Perturbation to apply. Defaults to the instance's own perturbation,
        or the empty perturbation when it has none.

    Returns
    -------
    PerturbedProblem
        Problem object ready for decoding.

    Raises
    ------
    PerturbationError
        If the perturbation references an unknown train or a node outside
        the train's itinerary, or carries a negative delay.
    """
    if perturbation is None:
        perturbation = instance.perturbation
    if perturbation is None:
        first = instance.trains[0]
        perturbation = Perturbation(first.train_id, first.itinerary[0], 0)

    train = instance.train_index.get(perturbation.train)
    if train is None:
        raise PerturbationError(f"Unknown train '{perturbation.train}'")
    if perturbation.node not in train.itinerary:
        raise PerturbationError(
            f"Node '{perturbation.node}' is not on the itinerary of "
            f"train '{perturbation.train}'"
        )
    if perturbation.delay < 0:
        raise PerturbationError(f"Negative delay {perturbation.delay}")
    return PerturbedProblem(instance=instance, perturbation=perturbation)


def empty_problem(instance: Instance) -> PerturbedProblem:
    """Return the problem carrying the empty perturbation."""
    site = instance.perturbation
    if site is None:
        return apply_perturbation(instance.without_perturbation())
    return apply_perturbation(instance, replace(site, delay=0))


def timetable_order(problem: PerturbedProblem) -> tuple[TrainId, ...]:
    """
    Order trains by theoretical departure from their origin.

    Parameters
    ----------
    problem : PerturbedProblem
        The problem whose trains are ordered.

    Returns
    -------
    tuple[TrainId, ...]
        Train identifiers sorted by origin departure, then identifier.
    """

    def origin_departure(train_id: TrainId) -> tuple[int, TrainId]:
        origin = problem.train(train_id).itinerary[0]
        return problem.timetable[(train_id, origin)].departure, train_id

    return tuple(sorted(problem.train_ids, key=origin_departure))
