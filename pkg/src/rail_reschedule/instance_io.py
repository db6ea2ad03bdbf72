"""
Instance and schedule documents.

An instance document is line oriented UTF-8 text. The first line is the
header ``rail-instance 1``; ``#`` starts a comment. Sections open with
a bracketed line and hold ``key value...`` lines::

    rail-instance 1
    [node A]
    tracks 2
    route - B 0 0 1            # inc out u_inc u u_out ('-' = itinerary end)
    [edge A B]
    tracks 1
    [gate G1 A]
    capacity 1
    headway 30
    member B 0                 # neighbour track
    [train T1]
    call A 0 600 0 60 0 0 0    # node alpha_min alpha_max a0 d0 u_inc u u_out
    call B 0 600 180 180 0 0 0
    run A B 120                # from to beta
    connection T2 B 120        # partner node transfer
    [spacing]
    node-gamma A 60
    edge-headway A B 30
    gamma T1 T2 A 90
    [perturbation]
    train T1
    node A
    delay 600

``call`` lines appear in itinerary order and carry the theoretical times
and route. ``dump_instance`` writes this canonical form, so
``dump_instance(parse_instance(text)) == text`` for any canonical text.
Schedule documents use the header ``rail-schedule 1`` and one
``[schedule]`` section.
"""

from collections import deque
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from rail_reschedule.constraints import (
    Assignment,
    find_violations,
    timetable_assignments,
)
from rail_reschedule.model import (
    Connection,
    Edge,
    EdgeKey,
    Gate,
    Instance,
    Network,
    NodeId,
    Perturbation,
    PerturbedProblem,
    RouteTriplet,
    SpacingConstants,
    Timetable,
    TimetableEntry,
    Train,
    TrainId,
    edge_key,
    empty_problem,
)
from rail_reschedule.utils import text_digest, warn


if TYPE_CHECKING:
    from rail_reschedule.scheduler import ScheduleResult


INSTANCE_HEADER = "rail-instance 1"
SCHEDULE_HEADER = "rail-schedule 1"
NONE_TOKEN = "-"


class InstanceParseError(ValueError):
    """Raised when a document does not follow the grammar."""

    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InstanceValidationError(ValueError):
    """Raised when a parsed instance breaks a structural invariant."""

    def __init__(self, entity: str, errors: list[str]) -> None:
        super().__init__(f"{entity}: {errors[0]}" if errors else entity)
        self.entity = entity
        self.errors = errors


@dataclass
class _Section:
    kind: str
    args: list[str]
    line_number: int
    lines: list[tuple[int, list[str]]] = field(default_factory=list)


def _tokenize(text: str, header: str) -> list[_Section]:
    sections: list[_Section] = []
    seen_header = False
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not seen_header:
            if line != header:
                raise InstanceParseError(line_number, f"expected header '{header}'")
            seen_header = True
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise InstanceParseError(line_number, "unterminated section header")
            words = line[1:-1].split()
            if not words:
                raise InstanceParseError(line_number, "empty section header")
            sections.append(_Section(words[0], words[1:], line_number))
            continue
        if not sections:
            raise InstanceParseError(line_number, "content before the first section")
        sections[-1].lines.append((line_number, line.split()))
    if not seen_header:
        raise InstanceParseError(1, f"expected header '{header}'")
    return sections


def _int(token: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError as e:
        raise InstanceParseError(line_number, f"expected an integer, got '{token}'") from e


def _node_or_none(token: str) -> NodeId | None:
    return None if token == NONE_TOKEN else token


def _expect(words: list[str], count: int, line_number: int) -> None:
    if len(words) != count:
        raise InstanceParseError(
            line_number, f"'{words[0]}' takes {count - 1} values, got {len(words) - 1}"
        )


def _single_value(section: _Section, key: str) -> str:
    values = [words for _, words in section.lines if words[0] == key]
    if len(values) != 1:
        raise InstanceParseError(
            section.line_number, f"section '{section.kind}' needs exactly one '{key}'"
        )
    line_number = next(n for n, words in section.lines if words[0] == key)
    _expect(values[0], 2, line_number)
    return values[0][1]


def _check_keys(section: _Section, allowed: set[str]) -> None:
    for line_number, words in section.lines:
        if words[0] not in allowed:
            raise InstanceParseError(
                line_number, f"unknown key '{words[0]}' in section '{section.kind}'"
            )


def _section_args(section: _Section, count: int) -> list[str]:
    if len(section.args) != count:
        raise InstanceParseError(
            section.line_number,
            f"section '{section.kind}' takes {count} names, got {len(section.args)}",
        )
    return section.args


@dataclass
class _TrainDraft:
    train_id: TrainId
    itinerary: list[NodeId] = field(default_factory=list)
    stop_bounds: dict[NodeId, tuple[int, int]] = field(default_factory=dict)
    min_travel: dict[tuple[NodeId, NodeId], int] = field(default_factory=dict)
    connections: list[Connection] = field(default_factory=list)
    calls: list[tuple[NodeId, int, int, int, int, int]] = field(default_factory=list)


def _parse_train(section: _Section) -> _TrainDraft:
    (train_id,) = _section_args(section, 1)
    _check_keys(section, {"call", "run", "connection"})
    draft = _TrainDraft(train_id)
    for line_number, words in section.lines:
        if words[0] == "call":
            _expect(words, 9, line_number)
            node = words[1]
            alpha_min, alpha_max, a0, d0, u_inc, u, u_out = (
                _int(token, line_number) for token in words[2:]
            )
            if node in draft.stop_bounds:
                raise InstanceParseError(line_number, f"train visits '{node}' twice")
            draft.itinerary.append(node)
            draft.stop_bounds[node] = (alpha_min, alpha_max)
            draft.calls.append((node, a0, d0, u_inc, u, u_out))
        elif words[0] == "run":
            _expect(words, 4, line_number)
            draft.min_travel[(words[1], words[2])] = _int(words[3], line_number)
        else:
            _expect(words, 4, line_number)
            draft.connections.append(
                Connection(words[1], words[2], _int(words[3], line_number))
            )
    return draft


def parse_instance(text: str) -> Instance:
    """
    Parse an instance document without validating its invariants.

    Parameters
    ----------
    text : str
        Document text.

    Returns
    -------
    Instance
        The parsed instance.

    Raises
    ------
    InstanceParseError
        If the text does not follow the instance grammar.
    """
    nodes: list[NodeId] = []
    node_tracks: dict[NodeId, int] = {}
    routes: dict[NodeId, tuple[RouteTriplet, ...]] = {}
    edges: list[Edge] = []
    gates: dict[NodeId, list[Gate]] = {}
    drafts: list[_TrainDraft] = []
    node_gamma: dict[NodeId, int] = {}
    edge_headway: dict[EdgeKey, int] = {}
    gamma: dict[tuple[TrainId, TrainId, NodeId], int] = {}
    perturbation: Perturbation | None = None
    spacing_seen = False

    for section in _tokenize(text, INSTANCE_HEADER):
        if section.kind == "node":
            (node,) = _section_args(section, 1)
            if node in node_tracks:
                raise InstanceParseError(section.line_number, f"duplicate node '{node}'")
            _check_keys(section, {"tracks", "route"})
            nodes.append(node)
            node_tracks[node] = _int(_single_value(section, "tracks"), section.line_number)
            triplets = []
            for line_number, words in section.lines:
                if words[0] != "route":
                    continue
                _expect(words, 6, line_number)
                u_inc, u, u_out = (_int(token, line_number) for token in words[3:])
                triplets.append(
                    RouteTriplet(
                        u_inc, u, u_out, _node_or_none(words[1]), _node_or_none(words[2])
                    )
                )
            routes[node] = tuple(triplets)
        elif section.kind == "edge":
            first, second = _section_args(section, 2)
            _check_keys(section, {"tracks"})
            edges.append(
                Edge(
                    first,
                    second,
                    _int(_single_value(section, "tracks"), section.line_number),
                )
            )
        elif section.kind == "gate":
            gate_id, node = _section_args(section, 2)
            _check_keys(section, {"capacity", "headway", "member"})
            members = []
            for line_number, words in section.lines:
                if words[0] == "member":
                    _expect(words, 3, line_number)
                    members.append((words[1], _int(words[2], line_number)))
            gates.setdefault(node, []).append(
                Gate(
                    gate_id=gate_id,
                    node=node,
                    members=tuple(members),
                    capacity=_int(_single_value(section, "capacity"), section.line_number),
                    headway=_int(_single_value(section, "headway"), section.line_number),
                )
            )
        elif section.kind == "train":
            drafts.append(_parse_train(section))
        elif section.kind == "spacing":
            _section_args(section, 0)
            if spacing_seen:
                raise InstanceParseError(section.line_number, "duplicate spacing section")
            spacing_seen = True
            _check_keys(section, {"node-gamma", "edge-headway", "gamma"})
            for line_number, words in section.lines:
                if words[0] == "node-gamma":
                    _expect(words, 3, line_number)
                    node_gamma[words[1]] = _int(words[2], line_number)
                elif words[0] == "edge-headway":
                    _expect(words, 4, line_number)
                    edge_headway[edge_key(words[1], words[2])] = _int(words[3], line_number)
                else:
                    _expect(words, 5, line_number)
                    gamma[(words[1], words[2], words[3])] = _int(words[4], line_number)
        elif section.kind == "perturbation":
            _section_args(section, 0)
            if perturbation is not None:
                raise InstanceParseError(
                    section.line_number, "duplicate perturbation section"
                )
            _check_keys(section, {"train", "node", "delay"})
            perturbation = Perturbation(
                train=_single_value(section, "train"),
                node=_single_value(section, "node"),
                delay=_int(_single_value(section, "delay"), section.line_number),
            )
        else:
            raise InstanceParseError(
                section.line_number, f"unknown section '{section.kind}'"
            )

    trains = []
    entries: dict[tuple[TrainId, NodeId], TimetableEntry] = {}
    for draft in drafts:
        trains.append(
            Train(
                train_id=draft.train_id,
                itinerary=tuple(draft.itinerary),
                stop_bounds=draft.stop_bounds,
                min_travel=draft.min_travel,
                connections=tuple(draft.connections),
            )
        )
        for position, (node, a0, d0, u_inc, u, u_out) in enumerate(draft.calls):
            previous = draft.itinerary[position - 1] if position > 0 else None
            following = (
                draft.itinerary[position + 1]
                if position + 1 < len(draft.itinerary)
                else None
            )
            entries[(draft.train_id, node)] = TimetableEntry(
                a0, d0, RouteTriplet(u_inc, u, u_out, previous, following)
            )

    network = Network(
        nodes=tuple(nodes),
        node_tracks=node_tracks,
        edges=tuple(edges),
        routes=routes,
        gates={node: tuple(items) for node, items in gates.items()},
    )
    return Instance(
        network=network,
        trains=tuple(trains),
        timetable=Timetable(entries),
        spacing=SpacingConstants(node_gamma, edge_headway, gamma),
        perturbation=perturbation,
    )


def _token(node: NodeId | None) -> str:
    return NONE_TOKEN if node is None else node


def _dump_lines(instance: Instance, with_perturbation: bool) -> Iterator[str]:
    network = instance.network
    yield INSTANCE_HEADER
    for node in network.nodes:
        yield f"[node {node}]"
        yield f"tracks {network.node_tracks[node]}"
        for route in network.routes.get(node, ()):
            yield (
                f"route {_token(route.inc)} {_token(route.out)} "
                f"{route.u_inc} {route.u} {route.u_out}"
            )
    for edge in network.edges:
        yield f"[edge {edge.a} {edge.b}]"
        yield f"tracks {edge.track_count}"
    for gate in network.all_gates():
        yield f"[gate {gate.gate_id} {gate.node}]"
        yield f"capacity {gate.capacity}"
        yield f"headway {gate.headway}"
        for neighbour, track in gate.members:
            yield f"member {neighbour} {track}"
    for train in instance.trains:
        yield f"[train {train.train_id}]"
        for node in train.itinerary:
            entry = instance.timetable[(train.train_id, node)]
            alpha_min, alpha_max = train.stop_bounds[node]
            yield (
                f"call {node} {alpha_min} {alpha_max} {entry.arrival} {entry.departure} "
                f"{entry.route.u_inc} {entry.route.u} {entry.route.u_out}"
            )
        for (first, second), beta in train.min_travel.items():
            yield f"run {first} {second} {beta}"
        for connection in train.connections:
            yield f"connection {connection.partner} {connection.node} {connection.min_transfer}"
    spacing = instance.spacing
    if spacing.node_gamma or spacing.edge_headway or spacing.gamma:
        yield "[spacing]"
        for node, value in spacing.node_gamma.items():
            yield f"node-gamma {node} {value}"
        for (first, second), value in spacing.edge_headway.items():
            yield f"edge-headway {first} {second} {value}"
        for (first, second, node), value in spacing.gamma.items():
            yield f"gamma {first} {second} {node} {value}"
    if with_perturbation and instance.perturbation is not None:
        yield "[perturbation]"
        yield f"train {instance.perturbation.train}"
        yield f"node {instance.perturbation.node}"
        yield f"delay {instance.perturbation.delay}"


def dump_instance(instance: Instance) -> str:
    """
    Serialize an instance to its canonical document text.

    Parameters
    ----------
    instance : Instance
        Instance to serialize.

    Returns
    -------
    str
        Canonical document, newline terminated.
    """
    return "\n".join(_dump_lines(instance, with_perturbation=True)) + "\n"


def instance_digest(instance: Instance) -> str:
    """
    Hash the perturbation-independent part of an instance.

    Every perturbation variant of one base instance shares this digest, so
    one inoculant serves them all.
    """
    return text_digest("\n".join(_dump_lines(instance, with_perturbation=False)))


def _connected(nodes: tuple[NodeId, ...], edges: tuple[Edge, ...]) -> bool:
    if not nodes:
        return True
    neighbours: dict[NodeId, set[NodeId]] = {node: set() for node in nodes}
    for edge in edges:
        if edge.a in neighbours and edge.b in neighbours:
            neighbours[edge.a].add(edge.b)
            neighbours[edge.b].add(edge.a)
    seen = {nodes[0]}
    queue = deque([nodes[0]])
    while queue:
        for neighbour in neighbours[queue.popleft()]:
            if neighbour not in seen:
                seen.add(neighbour)
                queue.append(neighbour)
    return len(seen) == len(nodes)


def _network_problems(network: Network) -> Iterator[tuple[str, str]]:
    known = set(network.nodes)
    for node in network.nodes:
        if network.node_tracks[node] < 1:
            yield f"node {node}", "needs at least one track"
    edge_keys: set[EdgeKey] = set()
    for edge in network.edges:
        entity = f"edge {edge.a}-{edge.b}"
        if edge.a not in known or edge.b not in known:
            yield entity, "references an unknown node"
        if edge.a == edge.b:
            yield entity, "is a loop"
        if edge.track_count < 1:
            yield entity, "needs at least one track"
        if edge.key in edge_keys:
            yield entity, "is declared twice"
        edge_keys.add(edge.key)
    for node, triplets in network.routes.items():
        for index, route in enumerate(triplets):
            entity = f"node {node} route {index}"
            if not 0 <= route.u < network.node_tracks.get(node, 0):
                yield entity, f"in-node track {route.u} does not exist"
            for neighbour, track, label in (
                (route.inc, route.u_inc, "incoming"),
                (route.out, route.u_out, "outgoing"),
            ):
                if neighbour is None:
                    continue
                edge = network.edge_between(node, neighbour)
                if edge is None:
                    yield entity, f"no edge to {label} neighbour '{neighbour}'"
                elif not 0 <= track < edge.track_count:
                    yield entity, (
                        f"{label} track {track} exceeds the "
                        f"{edge.track_count}-track edge to '{neighbour}'"
                    )
    for gate in network.all_gates():
        entity = f"gate {gate.gate_id}"
        if gate.node not in known:
            yield entity, f"unknown node '{gate.node}'"
        if gate.capacity < 1:
            yield entity, "capacity must be positive"
        if gate.headway < 0:
            yield entity, "headway must be non-negative"
        for neighbour, track in gate.members:
            edge = network.edge_between(gate.node, neighbour)
            if edge is None or not 0 <= track < edge.track_count:
                yield entity, f"member ({neighbour}, {track}) is not an edge track"
    if not _connected(network.nodes, network.edges):
        yield "network", "is not connected"


def _train_problems(instance: Instance, train: Train) -> Iterator[tuple[str, str]]:
    network = instance.network
    entity = f"train {train.train_id}"
    if len(train.itinerary) < 2:
        yield entity, "itinerary needs at least two nodes"
    previous_out: int | None = None
    for position, node in enumerate(train.itinerary):
        if node not in network.node_tracks:
            yield entity, f"unknown node '{node}'"
            continue
        alpha_min, alpha_max = train.stop_bounds[node]
        if not 0 <= alpha_min <= alpha_max:
            yield entity, f"stop bounds at '{node}' must satisfy 0 <= min <= max"
        previous = train.itinerary[position - 1] if position > 0 else None
        following = (
            train.itinerary[position + 1] if position + 1 < len(train.itinerary) else None
        )
        if following is not None:
            if network.edge_between(node, following) is None:
                yield entity, f"no edge between '{node}' and '{following}'"
            beta = train.min_travel.get((node, following))
            if beta is None or beta <= 0:
                yield entity, f"running time {node}->{following} must be positive"
        entry = instance.timetable.entries.get((train.train_id, node))
        if entry is None:
            yield entity, f"no timetable entry at '{node}'"
            continue
        if entry.departure < entry.arrival:
            yield entity, f"departs '{node}' before arriving"
        if entry.route not in network.routes.get(node, ()):
            yield entity, f"timetable route at '{node}' is not admissible"
        if previous_out is not None and entry.route.u_inc != previous_out:
            yield entity, f"timetable route at '{node}' switches track on the edge"
        previous_out = entry.route.u_out
        movement = network.routes.get(node, ())
        if not any(route.serves(previous, following) for route in movement):
            yield entity, f"no route serves its movement at '{node}'"
    for pair in train.min_travel:
        if pair not in zip(train.itinerary, train.itinerary[1:], strict=False):
            yield entity, f"running time for non-consecutive nodes {pair[0]}->{pair[1]}"
    for connection in train.connections:
        partner = instance.train_index.get(connection.partner)
        if partner is None:
            yield entity, f"connects to unknown train '{connection.partner}'"
        elif (
            connection.node not in train.itinerary
            or connection.node not in partner.itinerary
        ):
            yield entity, f"connection node '{connection.node}' is not shared"
        if connection.min_transfer < 0:
            yield entity, "transfer time must be non-negative"


def _instance_problems(instance: Instance) -> Iterator[tuple[str, str]]:
    yield from _network_problems(instance.network)
    seen: set[TrainId] = set()
    for train in instance.trains:
        if train.train_id in seen:
            yield f"train {train.train_id}", "is declared twice"
        seen.add(train.train_id)
        yield from _train_problems(instance, train)
    if not instance.trains:
        yield "instance", "declares no trains"
    spacing = instance.spacing
    for node, value in spacing.node_gamma.items():
        if node not in instance.network.node_tracks or value < 0:
            yield "spacing", f"invalid node gamma for '{node}'"
    for key, value in spacing.edge_headway.items():
        if key not in instance.network.edge_index or value < 0:
            yield "spacing", f"invalid headway for edge {key[0]}-{key[1]}"
    for (first, second, node), value in spacing.gamma.items():
        if first not in seen or second not in seen or value < 0:
            yield "spacing", f"invalid gamma for ({first}, {second}, {node})"
    site = instance.perturbation
    if site is not None:
        train = instance.train_index.get(site.train)
        if train is None or site.node not in train.itinerary:
            yield "perturbation", f"({site.train}, {site.node}) is not on an itinerary"
        if site.delay < 0:
            yield "perturbation", "delay must be non-negative"


def validate_instance(instance: Instance) -> tuple[bool, list[str]]:
    """
    Validate the structural invariants of an instance.

    Spacing conflicts inside the timetable are not structural errors; see
    ``timetable_violations``.

    Parameters
    ----------
    instance : Instance
        Parsed instance.

    Returns
    -------
    tuple[bool, list[str]]
        Tuple of (is_valid, list of error messages).
    """
    errors = [f"{entity}: {message}" for entity, message in _instance_problems(instance)]
    return len(errors) == 0, errors


def timetable_violations(instance: Instance) -> list[str]:
    """Describe every constraint the theoretical timetable itself violates."""
    problem = empty_problem(instance)
    return [
        f"{violation.conflict.kind} conflict for train {violation.train} at "
        f"{violation.node}"
        + (f" against {violation.conflict.blocker}" if violation.conflict.blocker else "")
        for violation in find_violations(problem, timetable_assignments(problem))
    ]


def load_problem(document: str | Path) -> Instance:
    """
    Load and validate an instance document.

    Parameters
    ----------
    document : str | Path
        Path to the instance file.

    Returns
    -------
    Instance
        The validated instance. Timetable spacing violations are reported
        as warnings and kept.

    Raises
    ------
    FileNotFoundError
        If the document does not exist.
    InstanceParseError
        If the document is malformed or not UTF-8.
    InstanceValidationError
        If an invariant is broken; ``entity`` names the first offender.
    """
    path = Path(document)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise InstanceParseError(
            raw.count(b"\n", 0, e.start) + 1,
            f"{path} is not UTF-8 text (invalid byte at offset {e.start})",
        ) from e
    instance = parse_instance(text)
    problems = list(_instance_problems(instance))
    if problems:
        raise InstanceValidationError(
            problems[0][0], [f"{entity}: {message}" for entity, message in problems]
        )
    violations = timetable_violations(instance)
    if violations:
        warn(f"Timetable of {document} carries {len(violations)} constraint violations")
    return instance


def save_instance(instance: Instance, path: str | Path) -> Path:
    """Write an instance document and return its path."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dump_instance(instance), encoding="utf-8")
    return target


@dataclass(frozen=True)
class ScheduleDocument:
    """A decoded schedule as read back from a schedule file."""

    assignments: dict[TrainId, dict[NodeId, Assignment]]
    unscheduled: tuple[TrainId, ...]
    fitness: int
    delay: int
    kicks: int
    route_changes: int


def dump_schedule(result: "ScheduleResult", problem: PerturbedProblem) -> str:
    """
    Serialize a schedule result.

    Entries follow the problem's train order and each train's itinerary.

    Parameters
    ----------
    result : ScheduleResult
        Decoded schedule.
    problem : PerturbedProblem
        Problem the schedule solves.

    Returns
    -------
    str
        Schedule document text.
    """
    lines = [SCHEDULE_HEADER, "[schedule]"]
    lines.append(f"fitness {result.fitness}")
    lines.append(f"delay {result.delay}")
    lines.append(f"kicks {result.total_kicks}")
    lines.append(f"route-changes {result.route_changes}")
    for train_id in problem.train_ids:
        entries = result.assignments.get(train_id)
        if entries is None:
            continue
        for node in problem.train(train_id).itinerary:
            entry = entries[node]
            lines.append(
                f"entry {train_id} {node} {entry.arrival} {entry.departure} "
                f"{entry.route.u_inc} {entry.route.u} {entry.route.u_out}"
            )
    lines.extend(f"unscheduled {train_id}" for train_id in sorted(result.unscheduled))
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> ScheduleDocument:
    """
    Parse a schedule document.

    Raises
    ------
    InstanceParseError
        If the text does not follow the schedule grammar.
    """
    sections = _tokenize(text, SCHEDULE_HEADER)
    if len(sections) != 1 or sections[0].kind != "schedule":
        raise InstanceParseError(1, "expected exactly one [schedule] section")
    section = sections[0]
    _check_keys(section, {"fitness", "delay", "kicks", "route-changes", "entry", "unscheduled"})
    rows: dict[TrainId, list[tuple[NodeId, int, int, int, int, int]]] = {}
    unscheduled = []
    for line_number, words in section.lines:
        if words[0] == "entry":
            _expect(words, 8, line_number)
            arrival, departure, u_inc, u, u_out = (
                _int(token, line_number) for token in words[3:]
            )
            rows.setdefault(words[1], []).append(
                (words[2], arrival, departure, u_inc, u, u_out)
            )
        elif words[0] == "unscheduled":
            _expect(words, 2, line_number)
            unscheduled.append(words[1])
    assignments: dict[TrainId, dict[NodeId, Assignment]] = {}
    for train_id, calls in rows.items():
        nodes = [call[0] for call in calls]
        assignments[train_id] = {
            node: Assignment(
                arrival,
                departure,
                RouteTriplet(
                    u_inc,
                    u,
                    u_out,
                    nodes[position - 1] if position > 0 else None,
                    nodes[position + 1] if position + 1 < len(nodes) else None,
                ),
            )
            for position, (node, arrival, departure, u_inc, u, u_out) in enumerate(calls)
        }
    return ScheduleDocument(
        assignments=assignments,
        unscheduled=tuple(unscheduled),
        fitness=_int(_single_value(section, "fitness"), section.line_number),
        delay=_int(_single_value(section, "delay"), section.line_number),
        kicks=_int(_single_value(section, "kicks"), section.line_number),
        route_changes=_int(_single_value(section, "route-changes"), section.line_number),
    )
