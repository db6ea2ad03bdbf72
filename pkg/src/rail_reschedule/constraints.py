"""
Constraint predicates shared by the scheduler and the schedule validator.

``check_constraints`` evaluates one candidate ``(arrival, departure, route)``
for one train at one node against a schedule fragment and returns every
violated constraint as a ``Conflict``. A conflict names the time that clears
it, or none when no later time for the candidate can clear it (a fatal
conflict that only removing the blocking train resolves).
"""

from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import StrEnum

from rail_reschedule.model import (
    EdgeKey,
    Gate,
    NodeId,
    PerturbedProblem,
    RouteTriplet,
    TrainId,
    edge_key,
)


class ConflictKind(StrEnum):
    """Constraint families, in the order the checking loop evaluates them."""

    INITIAL_TIME = "initial-time"
    SPEED = "speed"
    STOP = "stop"
    NODE_SPACING = "node-spacing"
    EDGE_SPACING = "edge-spacing"
    CONNECTION = "connection"
    GATE = "gate"


class Target(StrEnum):
    """Which time a conflict's clearing time applies to."""

    ARRIVAL = "arrival"
    DEPARTURE = "departure"


@dataclass(frozen=True)
class Conflict:
    """A violated constraint for a candidate placement."""

    kind: ConflictKind
    target: Target
    clear_time: int | None
    blocker: TrainId | None = None

    @property
    def fatal(self) -> bool:
        """Whether no later time for the candidate clears this conflict."""
        return self.clear_time is None


@dataclass(frozen=True)
class Assignment:
    """Decided arrival, departure and route of a train at a node."""

    arrival: int
    departure: int
    route: RouteTriplet


@dataclass(frozen=True)
class EdgeOccupancy:
    """A train running over one edge track from ``origin`` to ``destination``."""

    train: TrainId
    origin: NodeId
    destination: NodeId
    enter: int
    exit: int


class ScheduleIndex:
    """
    Schedule fragment with resource occupancy lookups.

    Committed trains are indexed by node track, edge track and gate. The
    train currently being inserted keeps its already placed nodes in
    ``assignments`` only, so checks see its own previous node but never
    treat it as an obstacle to itself.
    """

    def __init__(self, problem: PerturbedProblem) -> None:
        self.problem = problem
        self.assignments: dict[TrainId, dict[NodeId, Assignment]] = {}
        self.committed: set[TrainId] = set()
        self._node_tracks: defaultdict[tuple[NodeId, int], dict[TrainId, Assignment]]
        self._node_tracks = defaultdict(dict)
        self._edge_tracks: defaultdict[tuple[EdgeKey, int], dict[TrainId, EdgeOccupancy]]
        self._edge_tracks = defaultdict(dict)
        self._gates: defaultdict[str, dict[TrainId, int]] = defaultdict(dict)

    @classmethod
    def from_assignments(
        cls,
        problem: PerturbedProblem,
        assignments: Mapping[TrainId, Mapping[NodeId, Assignment]],
    ) -> "ScheduleIndex":
        """Build an index with every given train committed."""
        index = cls(problem)
        for train_id, entries in assignments.items():
            index.begin(train_id)
            index.assignments[train_id].update(entries)
            index.commit(train_id)
        return index

    def begin(self, train_id: TrainId) -> dict[NodeId, Assignment]:
        """Open an empty partial assignment for a train being inserted."""
        partial: dict[NodeId, Assignment] = {}
        self.assignments[train_id] = partial
        return partial

    def commit(self, train_id: TrainId) -> None:
        """Make a fully placed train visible to resource checks."""
        train = self.problem.train(train_id)
        entries = self.assignments[train_id]
        for position, node in enumerate(train.itinerary):
            entry = entries[node]
            self._node_tracks[(node, entry.route.u)][train_id] = entry
            for gate in self.problem.network.gates.get(node, ()):
                if gate.is_used_by(entry.route):
                    self._gates[gate.gate_id][train_id] = entry.departure
            if position + 1 < len(train.itinerary):
                following = train.itinerary[position + 1]
                self._edge_tracks[(edge_key(node, following), entry.route.u_out)][
                    train_id
                ] = EdgeOccupancy(
                    train=train_id,
                    origin=node,
                    destination=following,
                    enter=entry.departure,
                    exit=entries[following].arrival,
                )
        self.committed.add(train_id)

    def remove(self, train_id: TrainId) -> None:
        """Drop a train, committed or partial, from the fragment."""
        entries = self.assignments.pop(train_id, {})
        if train_id not in self.committed:
            return
        self.committed.discard(train_id)
        train = self.problem.train(train_id)
        for position, node in enumerate(train.itinerary):
            entry = entries[node]
            self._node_tracks[(node, entry.route.u)].pop(train_id, None)
            for gate in self.problem.network.gates.get(node, ()):
                self._gates[gate.gate_id].pop(train_id, None)
            if position + 1 < len(train.itinerary):
                following = train.itinerary[position + 1]
                self._edge_tracks[(edge_key(node, following), entry.route.u_out)].pop(
                    train_id, None
                )

    def node_track(self, node: NodeId, track: int) -> Iterable[tuple[TrainId, Assignment]]:
        """Committed trains using in-node track ``track`` at ``node``."""
        return self._node_tracks.get((node, track), {}).items()

    def edge_track(self, key: EdgeKey, track: int) -> Iterable[EdgeOccupancy]:
        """Committed trains running on one edge track."""
        return self._edge_tracks.get((key, track), {}).values()

    def gate(self, gate_id: str) -> Iterable[tuple[TrainId, int]]:
        """Committed passages ``(train, departure)`` through a gate."""
        return self._gates.get(gate_id, {}).items()


def _check_initial_time(
    problem: PerturbedProblem, train_id: TrainId, node: NodeId, arrival: int, departure: int
) -> list[Conflict]:
    conflicts = []
    arrival_bound = problem.arrival_bound(train_id, node)
    if arrival < arrival_bound:
        conflicts.append(Conflict(ConflictKind.INITIAL_TIME, Target.ARRIVAL, arrival_bound))
    departure_bound = problem.departure_bound(train_id, node)
    if departure < departure_bound:
        conflicts.append(
            Conflict(ConflictKind.INITIAL_TIME, Target.DEPARTURE, departure_bound)
        )
    return conflicts


def _check_speed(
    problem: PerturbedProblem,
    fragment: ScheduleIndex,
    train_id: TrainId,
    node: NodeId,
    arrival: int,
) -> list[Conflict]:
    train = problem.train(train_id)
    previous = train.previous(node)
    if previous is None:
        return []
    earliest = fragment.assignments[train_id][previous].departure + train.min_travel[
        (previous, node)
    ]
    if arrival < earliest:
        return [Conflict(ConflictKind.SPEED, Target.ARRIVAL, earliest)]
    return []


def _check_stop(
    problem: PerturbedProblem, train_id: TrainId, node: NodeId, arrival: int, departure: int
) -> list[Conflict]:
    alpha_min, alpha_max = problem.train(train_id).stop_bounds[node]
    dwell = departure - arrival
    if dwell < alpha_min:
        return [Conflict(ConflictKind.STOP, Target.DEPARTURE, arrival + alpha_min)]
    if dwell > alpha_max:
        return [Conflict(ConflictKind.STOP, Target.ARRIVAL, departure - alpha_max)]
    return []


def _check_node_spacing(
    problem: PerturbedProblem,
    fragment: ScheduleIndex,
    train_id: TrainId,
    node: NodeId,
    route: RouteTriplet,
    arrival: int,
    departure: int,
) -> list[Conflict]:
    conflicts = []
    spacing = problem.spacing
    for other, entry in fragment.node_track(node, route.u):
        if other == train_id:
            continue
        after = entry.departure + spacing.gamma_for(other, train_id, node)
        before_ok = entry.arrival >= departure + spacing.gamma_for(train_id, other, node)
        if arrival < after and not before_ok:
            conflicts.append(
                Conflict(ConflictKind.NODE_SPACING, Target.ARRIVAL, after, other)
            )
    return conflicts


def _check_edge_entry(
    problem: PerturbedProblem,
    fragment: ScheduleIndex,
    train_id: TrainId,
    node: NodeId,
    route: RouteTriplet,
    departure: int,
) -> list[Conflict]:
    """Separation when leaving ``node`` onto the outgoing edge track."""
    if route.out is None:
        return []
    following = route.out
    headway = problem.spacing.headway_for(node, following)
    travel = problem.train(train_id).min_travel[(node, following)]
    conflicts = []
    for occupancy in fragment.edge_track(edge_key(node, following), route.u_out):
        if occupancy.train == train_id:
            continue
        if occupancy.origin == node:
            behind = departure >= occupancy.enter + headway
            ahead = (
                departure + headway <= occupancy.enter
                and departure + travel + headway <= occupancy.exit
            )
            clear = occupancy.enter + headway
        else:
            behind = departure >= occupancy.exit + headway
            ahead = departure + travel + headway <= occupancy.enter
            clear = occupancy.exit + headway
        if not (behind or ahead):
            conflicts.append(
                Conflict(
                    ConflictKind.EDGE_SPACING, Target.DEPARTURE, clear, occupancy.train
                )
            )
    return conflicts


def _check_edge_exit(
    problem: PerturbedProblem,
    fragment: ScheduleIndex,
    train_id: TrainId,
    node: NodeId,
    route: RouteTriplet,
    arrival: int,
) -> list[Conflict]:
    """Order on the incoming edge track, whose entry time is already fixed."""
    if route.inc is None:
        return []
    previous = route.inc
    headway = problem.spacing.headway_for(previous, node)
    entered = fragment.assignments[train_id][previous].departure
    conflicts = []
    for occupancy in fragment.edge_track(edge_key(previous, node), route.u_inc):
        if occupancy.train == train_id:
            continue
        if occupancy.origin == previous:
            if entered >= occupancy.enter + headway:
                if arrival < occupancy.exit + headway:
                    conflicts.append(
                        Conflict(
                            ConflictKind.EDGE_SPACING,
                            Target.ARRIVAL,
                            occupancy.exit + headway,
                            occupancy.train,
                        )
                    )
            elif arrival + headway > occupancy.exit:
                conflicts.append(
                    Conflict(
                        ConflictKind.EDGE_SPACING, Target.ARRIVAL, None, occupancy.train
                    )
                )
        elif entered < occupancy.exit + headway and arrival + headway > occupancy.enter:
            conflicts.append(
                Conflict(ConflictKind.EDGE_SPACING, Target.ARRIVAL, None, occupancy.train)
            )
    return conflicts


def _check_connections(
    problem: PerturbedProblem,
    fragment: ScheduleIndex,
    train_id: TrainId,
    node: NodeId,
    arrival: int,
    departure: int,
) -> list[Conflict]:
    conflicts = []
    for feeder, transfer in problem.connections_into(train_id, node):
        if feeder not in fragment.committed:
            continue
        ready = fragment.assignments[feeder][node].arrival + transfer
        if departure < ready:
            conflicts.append(
                Conflict(ConflictKind.CONNECTION, Target.DEPARTURE, ready, feeder)
            )
    for partner, transfer in problem.connections_from(train_id, node):
        if partner not in fragment.committed:
            continue
        if fragment.assignments[partner][node].departure < arrival + transfer:
            conflicts.append(
                Conflict(ConflictKind.CONNECTION, Target.ARRIVAL, None, partner)
            )
    return conflicts


def _gate_peak(passages: list[int], departure: int, headway: int) -> int:
    """Largest number of other occupancies overlapping the candidate window."""
    start, end = departure - headway, departure + headway
    events = []
    for passage in passages:
        low, high = max(start, passage - headway), min(end, passage + headway)
        if low < high:
            events.append((low, 1))
            events.append((high, -1))
    events.sort()
    peak = current = 0
    for _, change in events:
        current += change
        peak = max(peak, current)
    return peak


def _check_gates(
    problem: PerturbedProblem,
    fragment: ScheduleIndex,
    train_id: TrainId,
    node: NodeId,
    route: RouteTriplet,
    departure: int,
) -> list[Conflict]:
    conflicts = []
    gates: tuple[Gate, ...] = problem.network.gates.get(node, ())
    for gate in gates:
        if not gate.is_used_by(route):
            continue
        others = [(d, other) for other, d in fragment.gate(gate.gate_id) if other != train_id]
        passages = [d for d, _ in others]
        if _gate_peak(passages, departure, gate.headway) < gate.capacity:
            continue
        window = 2 * gate.headway
        blocker = max(
            (item for item in others if abs(item[0] - departure) < window),
            default=(0, None),
        )[1]
        clear = next(
            candidate
            for candidate in sorted({d + window for d in passages})
            if candidate > departure
            and _gate_peak(passages, candidate, gate.headway) < gate.capacity
        )
        conflicts.append(Conflict(ConflictKind.GATE, Target.DEPARTURE, clear, blocker))
    return conflicts


def check_constraints(
    problem: PerturbedProblem,
    fragment: ScheduleIndex,
    train_id: TrainId,
    node: NodeId,
    route: RouteTriplet,
    arrival: int,
    departure: int,
) -> list[Conflict]:
    """
    Return every constraint a candidate placement violates.

    Parameters
    ----------
    problem : PerturbedProblem
        Problem holding bounds and spacing constants.
    fragment : ScheduleIndex
        Trains already placed; must include the candidate train's own
        earlier nodes.
    train_id : TrainId
        Train being placed.
    node : NodeId
        Node of the candidate placement.
    route : RouteTriplet
        Chosen route triplet.
    arrival : int
        Candidate arrival time.
    departure : int
        Candidate departure time.

    Returns
    -------
    list[Conflict]
        Conflicts in the fixed order initial-time, speed, stop, node-spacing,
        edge-spacing, connection, gate. Empty when the placement is feasible.
    """
    return [
        *_check_initial_time(problem, train_id, node, arrival, departure),
        *_check_speed(problem, fragment, train_id, node, arrival),
        *_check_stop(problem, train_id, node, arrival, departure),
        *_check_node_spacing(problem, fragment, train_id, node, route, arrival, departure),
        *_check_edge_entry(problem, fragment, train_id, node, route, departure),
        *_check_edge_exit(problem, fragment, train_id, node, route, arrival),
        *_check_connections(problem, fragment, train_id, node, arrival, departure),
        *_check_gates(problem, fragment, train_id, node, route, departure),
    ]


@dataclass(frozen=True)
class Violation:
    """A conflict found while validating a complete schedule."""

    train: TrainId
    node: NodeId
    conflict: Conflict


def find_violations(
    problem: PerturbedProblem,
    assignments: Mapping[TrainId, Mapping[NodeId, Assignment]],
) -> list[Violation]:
    """
    Re-validate a complete schedule against every constraint.

    Parameters
    ----------
    problem : PerturbedProblem
        Problem the schedule was built for.
    assignments : Mapping[TrainId, Mapping[NodeId, Assignment]]
        Full itineraries of the scheduled trains.

    Returns
    -------
    list[Violation]
        Every conflict of every ``(train, node)`` entry; empty for a valid
        schedule.
    """
    fragment = ScheduleIndex.from_assignments(problem, assignments)
    violations = []
    for train_id, entries in assignments.items():
        for node in problem.train(train_id).itinerary:
            entry = entries[node]
            for conflict in check_constraints(
                problem,
                fragment,
                train_id,
                node,
                entry.route,
                entry.arrival,
                entry.departure,
            ):
                violations.append(Violation(train_id, node, conflict))
    return violations


def timetable_assignments(
    problem: PerturbedProblem,
) -> dict[TrainId, dict[NodeId, Assignment]]:
    """Return the theoretical timetable as a schedule."""
    return {
        train.train_id: {
            node: Assignment(
                problem.timetable[(train.train_id, node)].arrival,
                problem.timetable[(train.train_id, node)].departure,
                problem.timetable[(train.train_id, node)].route,
            )
            for node in train.itinerary
        }
        for train in problem.instance.trains
    }
