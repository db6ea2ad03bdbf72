"""
Semi-greedy schedule decoder.

A permutation of the trains is turned into a schedule by popping trains
off a stack and inserting each one node by node, choosing at every node
the admissible route with the earliest feasible departure. When every
route at a node is blocked by a conflict that waiting cannot clear, the
most recently committed blocker is kicked back onto the stack, at most
``kick_limit`` times per train. Trains that still cannot be placed are
left unscheduled and penalised in the fitness.
"""

import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

from rail_reschedule.constraints import (
    Assignment,
    ScheduleIndex,
    Target,
    check_constraints,
)
from rail_reschedule.model import NodeId, PerturbedProblem, TrainId, timetable_order


# Defaults
DEFAULT_KICK_LIMIT = 3
DEFAULT_ITERATION_CAP = 10_000


class ConfigurationError(ValueError):
    """Raised when decoder or evolution settings are inconsistent."""


@dataclass(frozen=True)
class SchedulerConfig:
    """
    Decoder settings.

    Parameters
    ----------
    kick_limit : int
        Maximum number of times one train may be kicked.
    penalty : int | None
        Fitness penalty per unscheduled train; ``None`` uses the problem's
        horizon-based default.
    iteration_cap : int
        Conflict-resolution iterations per route before giving up on it.
    """

    kick_limit: int = DEFAULT_KICK_LIMIT
    penalty: int | None = None
    iteration_cap: int = DEFAULT_ITERATION_CAP

    def __post_init__(self) -> None:
        """Validate the settings."""
        if self.kick_limit < 1:
            raise ConfigurationError("kick_limit must be at least 1")
        if self.iteration_cap < 1:
            raise ConfigurationError("iteration_cap must be at least 1")
        if self.penalty is not None and self.penalty < 1:
            raise ConfigurationError("penalty must be positive")

    def penalty_for(self, problem: PerturbedProblem) -> int:
        """Return the penalty per unscheduled train for a problem."""
        return self.penalty if self.penalty is not None else problem.penalty


class InsertStatus(StrEnum):
    """Result of inserting one train."""

    PLACED = "placed"
    KICKED_OTHERS = "kicked_others"
    FAILED = "failed"


@dataclass(frozen=True)
class InsertOutcome:
    """Status of an insertion and the trains kicked to achieve it."""

    status: InsertStatus
    kicked: tuple[TrainId, ...] = ()


@dataclass(frozen=True)
class ScheduleResult:
    """
    A decoded schedule.

    ``insertion_order`` lists the scheduled trains in the order they were
    finally committed, which differs from the permutation once kicks
    happen. ``insertions`` counts every completed or failed insertion
    attempt.
    """

    assignments: Mapping[TrainId, Mapping[NodeId, Assignment]]
    unscheduled: frozenset[TrainId]
    fitness: int
    delay: int
    kick_count: Mapping[TrainId, int]
    insertion_order: tuple[TrainId, ...]
    insertions: int
    route_changes: int

    @property
    def total_kicks(self) -> int:
        """Number of kicks performed while decoding."""
        return sum(self.kick_count.values())


@dataclass
class SchedulerState:
    """Private mutable state of one decode."""

    problem: PerturbedProblem
    config: SchedulerConfig
    index: ScheduleIndex
    stack: list[TrainId]
    kick_count: dict[TrainId, int]
    unscheduled: set[TrainId] = field(default_factory=set)
    commits: dict[TrainId, int] = field(default_factory=dict)
    insertions: int = 0
    _sequence: int = 0

    @classmethod
    def start(
        cls,
        problem: PerturbedProblem,
        permutation: Sequence[TrainId],
        config: SchedulerConfig,
    ) -> "SchedulerState":
        """Build the initial state; the permutation's first train is on top."""
        return cls(
            problem=problem,
            config=config,
            index=ScheduleIndex(problem),
            stack=list(reversed(permutation)),
            kick_count=dict.fromkeys(permutation, 0),
        )

    def record_commit(self, train_id: TrainId) -> None:
        """Commit a fully placed train and stamp its commit sequence."""
        self.index.commit(train_id)
        self._sequence += 1
        self.commits[train_id] = self._sequence


def validate_permutation(
    problem: PerturbedProblem, permutation: Sequence[TrainId]
) -> tuple[bool, list[str]]:
    """
    Check that a permutation orders exactly the problem's trains.

    Parameters
    ----------
    problem : PerturbedProblem
        Problem defining the train set.
    permutation : Sequence[TrainId]
        Candidate ordering.

    Returns
    -------
    tuple[bool, list[str]]
        Tuple of (is_valid, list of error messages).
    """
    errors = []
    expected = set(problem.train_ids)
    given = list(permutation)
    if len(given) != len(set(given)):
        errors.append("Permutation repeats a train")
    missing = expected - set(given)
    if missing:
        errors.append(f"Permutation misses trains: {sorted(missing)}")
    unknown = set(given) - expected
    if unknown:
        errors.append(f"Permutation names unknown trains: {sorted(unknown)}")
    return len(errors) == 0, errors


def kick(state: SchedulerState, blocker: TrainId) -> bool:
    """
    Remove a scheduled train and push it back on top of the stack.

    Parameters
    ----------
    state : SchedulerState
        Decode state.
    blocker : TrainId
        A currently scheduled train.

    Returns
    -------
    bool
        True if the kick was performed, False if the train has used up its
        kick budget.
    """
    if state.kick_count[blocker] >= state.config.kick_limit:
        return False
    state.index.remove(blocker)
    state.commits.pop(blocker, None)
    state.stack.append(blocker)
    state.kick_count[blocker] += 1
    return True


def _place_node(
    state: SchedulerState,
    train_id: TrainId,
    node: NodeId,
    partial: Mapping[NodeId, Assignment],
) -> tuple[Assignment | None, list[TrainId]]:
    """
    Find the earliest-departure feasible placement at one node.

    Returns the placement, or ``None`` with the trains behind the fatal
    conflicts of every route.
    """
    problem = state.problem
    train = problem.train(train_id)
    previous = train.previous(node)
    alpha_min, alpha_max = train.stop_bounds[node]
    best: Assignment | None = None
    blockers: dict[TrainId, None] = {}

    for _, route in problem.routes_for(train_id, node):
        arrival = problem.arrival_bound(train_id, node)
        if previous is not None:
            if route.u_inc != partial[previous].route.u_out:
                continue
            arrival = max(
                arrival,
                partial[previous].departure + train.min_travel[(previous, node)],
            )
        departure = max(problem.departure_bound(train_id, node), arrival + alpha_min)

        placed: Assignment | None = None
        for _ in range(state.config.iteration_cap):
            conflicts = check_constraints(
                problem, state.index, train_id, node, route, arrival, departure
            )
            fatal = [conflict for conflict in conflicts if conflict.fatal]
            if fatal:
                blockers.update(
                    (conflict.blocker, None) for conflict in fatal if conflict.blocker
                )
                break
            if not conflicts:
                placed = Assignment(arrival, departure, route)
                break
            first = conflicts[0]
            clear = first.clear_time if first.clear_time is not None else arrival
            if first.target is Target.ARRIVAL:
                arrival = max(arrival, clear)
                departure = max(departure, arrival + alpha_min)
            else:
                if first.blocker is not None and clear - arrival > alpha_max:
                    # Waiting for a committed train would overrun the maximum stop.
                    blockers[first.blocker] = None
                    break
                departure = max(departure, clear)
                arrival = max(arrival, departure - alpha_max)

        if placed is not None and (best is None or placed.departure < best.departure):
            best = placed

    return best, list(blockers)


def insert_train(state: SchedulerState, train_id: TrainId) -> InsertOutcome:
    """
    Insert one train node by node into the schedule.

    Parameters
    ----------
    state : SchedulerState
        Decode state; the train must not currently be scheduled.
    train_id : TrainId
        Train to insert.

    Returns
    -------
    InsertOutcome
        ``placed`` when no kick was needed, ``kicked_others`` when the train
        was placed after kicking blockers, ``failed`` otherwise.
    """
    state.insertions += 1
    partial = state.index.begin(train_id)
    kicked: list[TrainId] = []

    for node in state.problem.train(train_id).itinerary:
        while True:
            placement, blockers = _place_node(state, train_id, node, partial)
            if placement is not None:
                partial[node] = placement
                break
            candidates = sorted(
                (blocker for blocker in blockers if blocker in state.commits),
                key=lambda blocker: state.commits[blocker],
                reverse=True,
            )
            victim = next((b for b in candidates if kick(state, b)), None)
            if victim is None:
                state.index.remove(train_id)
                return InsertOutcome(InsertStatus.FAILED, tuple(kicked))
            kicked.append(victim)

    state.record_commit(train_id)
    if kicked:
        return InsertOutcome(InsertStatus.KICKED_OTHERS, tuple(kicked))
    return InsertOutcome(InsertStatus.PLACED)


def _fitness(
    assignments: Mapping[TrainId, Mapping[NodeId, Assignment]],
    unscheduled: int,
    penalty: int,
) -> int:
    total = sum(entry.arrival for entries in assignments.values() for entry in entries.values())
    return total + penalty * unscheduled


def evaluate_fitness(
    result: ScheduleResult, problem: PerturbedProblem, config: SchedulerConfig
) -> int:
    """
    Compute the fitness of a decoded schedule.

    Parameters
    ----------
    result : ScheduleResult
        Decoded schedule.
    problem : PerturbedProblem
        Problem it was decoded for.
    config : SchedulerConfig
        Decoder settings providing the penalty.

    Returns
    -------
    int
        Sum of all scheduled arrival times plus the penalty for every
        unscheduled train.
    """
    return _fitness(result.assignments, len(result.unscheduled), config.penalty_for(problem))


def delay(
    assignments: Mapping[TrainId, Mapping[NodeId, Assignment]],
    problem: PerturbedProblem,
) -> int:
    """Total accumulated delay of the scheduled entries against the timetable."""
    return sum(
        entry.arrival - problem.timetable[(train_id, node)].arrival
        for train_id, entries in assignments.items()
        for node, entry in entries.items()
    )


def schedule(
    problem: PerturbedProblem,
    permutation: Sequence[TrainId],
    config: SchedulerConfig | None = None,
) -> ScheduleResult:
    """
    Decode a permutation into a schedule.

    Parameters
    ----------
    problem : PerturbedProblem
        Problem to solve.
    permutation : Sequence[TrainId]
        Insertion priority; the first train is inserted first.
    config : SchedulerConfig | None, optional
        Decoder settings, by default ``SchedulerConfig()``.

    Returns
    -------
    ScheduleResult
        The schedule. Infeasibility shows up as unscheduled trains and a
        penalised fitness, never as an exception.

    Raises
    ------
    ValueError
        If ``permutation`` is not an ordering of the problem's trains.
    """
    config = config or SchedulerConfig()
    is_valid, errors = validate_permutation(problem, permutation)
    if not is_valid:
        raise ValueError("; ".join(errors))

    state = SchedulerState.start(problem, permutation, config)
    while state.stack:
        train_id = state.stack.pop()
        outcome = insert_train(state, train_id)
        if outcome.status is InsertStatus.FAILED:
            state.unscheduled.add(train_id)

    order = tuple(sorted(state.commits, key=state.commits.__getitem__))
    assignments = {train_id: dict(state.index.assignments[train_id]) for train_id in order}
    route_changes = sum(
        entry.route != problem.timetable[(train_id, node)].route
        for train_id, entries in assignments.items()
        for node, entry in entries.items()
    )
    return ScheduleResult(
        assignments=assignments,
        unscheduled=frozenset(state.unscheduled),
        fitness=_fitness(assignments, len(state.unscheduled), config.penalty_for(problem)),
        delay=delay(assignments, problem),
        kick_count=dict(state.kick_count),
        insertion_order=order,
        insertions=state.insertions,
        route_changes=route_changes,
    )


@dataclass(frozen=True)
class OracleOptimum:
    """Best decode over every permutation of a small instance."""

    fitness: int
    permutation: tuple[TrainId, ...]
    evaluated: int


def exhaustive_optimum(
    problem: PerturbedProblem,
    config: SchedulerConfig | None = None,
    budget: int = 720,
) -> OracleOptimum | None:
    """
    Decode every permutation and keep the best.

    Parameters
    ----------
    problem : PerturbedProblem
        Problem to solve.
    config : SchedulerConfig | None, optional
        Decoder settings.
    budget : int, optional
        Maximum number of decodes, by default 720 (six trains).

    Returns
    -------
    OracleOptimum | None
        The optimum over all permutations, the first one in lexicographic
        order of the timetable ordering on ties, or ``None`` when the
        instance has more permutations than ``budget``.
    """
    order = timetable_order(problem)
    if math.factorial(len(order)) > budget:
        return None
    best: tuple[int, tuple[TrainId, ...]] | None = None
    evaluated = 0
    for permutation in itertools.permutations(order):
        fitness = schedule(problem, permutation, config).fitness
        evaluated += 1
        if best is None or fitness < best[0]:
            best = (fitness, permutation)
    assert best is not None
    return OracleOptimum(best[0], best[1], evaluated)
