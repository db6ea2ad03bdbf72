"""Pytest configuration and fixtures for rail_reschedule tests."""

from collections.abc import Callable
from pathlib import Path
from unittest.mock import Mock

import pytest

from rail_reschedule.generator import GeneratorParams, generate
from rail_reschedule.instance_io import parse_instance
from rail_reschedule.model import Instance


# Two nodes joined by one single-track edge
LINE_AB = """rail-instance 1
[node A]
tracks 1
route - B 0 0 0
route B - 0 0 0
[node B]
tracks 1
route A - 0 0 0
route - A 0 0 0
[edge A B]
tracks 1
"""

TRAIN_T1 = """[train T1]
call A 0 600 100 100 0 0 0
call B 0 600 400 400 0 0 0
run A B 300
"""

TRAIN_T2_SAME = """[train T2]
call A 0 600 100 100 0 0 0
call B 0 600 400 400 0 0 0
run A B 300
"""

SPACING_AB = """[spacing]
node-gamma A 30
node-gamma B 30
edge-headway A B 60
"""

GATE_A = """[gate G1 A]
capacity 1
headway 20
member B 0
"""

TWO_ROUTE = """rail-instance 1
[node A]
tracks 1
route - B 0 0 0
[node B]
tracks 2
route A - 0 0 0
route A - 0 1 0
route C - 0 0 0
route C - 0 1 0
[node C]
tracks 1
route - B 0 0 0
[edge A B]
tracks 1
[edge B C]
tracks 1
[train T1]
call A 0 600 100 100 0 0 0
call B 0 900 400 1000 0 0 0
run A B 300
[train T2]
call C 0 600 200 200 0 0 0
call B 0 600 500 500 0 0 0
run C B 300
[spacing]
node-gamma B 30
"""

CONNECTION = """rail-instance 1
[node A]
tracks 1
route - B 0 0 0
[node B]
tracks 2
route A - 0 0 0
route - C 0 1 0
[node C]
tracks 1
route B - 0 0 0
[edge A B]
tracks 1
[edge B C]
tracks 1
[train T1]
call A 0 600 100 100 0 0 0
call B 0 600 400 400 0 0 0
run A B 300
connection T2 B 60
[train T2]
call B 0 600 460 460 0 1 0
call C 0 600 760 760 0 0 0
run B C 300
[perturbation]
train T1
node A
delay 100
"""

MUTUAL = """rail-instance 1
[node A]
tracks 1
route - B 0 0 0
[node B]
tracks 2
route A - 0 0 0
route C - 0 1 0
[node C]
tracks 1
route - B 0 0 0
[edge A B]
tracks 1
[edge B C]
tracks 1
[train T1]
call A 0 600 100 100 0 0 0
call B 0 0 400 400 0 0 0
run A B 300
connection T2 B 60
[train T2]
call C 0 600 100 100 0 0 0
call B 0 0 400 400 0 1 0
run C B 300
connection T1 B 60
"""

OPPOSING = """rail-instance 1
[node A]
tracks 2
route - B 0 0 0
route B - 0 1 0
[node B]
tracks 2
route A - 0 1 0
route - A 0 0 0
[edge A B]
tracks 1
[train T1]
call A 0 600 100 100 0 0 0
call B 0 600 400 400 0 1 0
run A B 300
[train T2]
call B 0 600 100 100 0 0 0
call A 0 600 400 400 0 1 0
run B A 300
[spacing]
edge-headway A B 60
"""


@pytest.fixture
def tiny_document() -> str:
    """
    One train running A to B on a single-track edge.

    Returns
    -------
    str
        Instance document text.
    """
    return LINE_AB + TRAIN_T1


@pytest.fixture
def tiny_instance(tiny_document: str) -> Instance:
    """
    Parsed single-train instance.

    Returns
    -------
    Instance
        T1 departs A at 100 and reaches B at 400.
    """
    return parse_instance(tiny_document)


@pytest.fixture
def contention_document() -> str:
    """
    Two trains sharing one timetable slot on a single track.

    Returns
    -------
    str
        Instance document text with node gamma 30 and edge headway 60.
    """
    return LINE_AB + TRAIN_T1 + TRAIN_T2_SAME + SPACING_AB


@pytest.fixture
def contention_instance(contention_document: str) -> Instance:
    """
    Parsed two-train contention instance.

    Returns
    -------
    Instance
        T1 and T2 both timetabled A 100 to B 400.
    """
    return parse_instance(contention_document)


@pytest.fixture
def gated_instance() -> Instance:
    """
    Two trains leaving A through a capacity-one gate, without spacing.

    Returns
    -------
    Instance
        Gate G1 at A with headway 20 guarding the edge track to B.
    """
    return parse_instance(LINE_AB + GATE_A + TRAIN_T1 + TRAIN_T2_SAME)


@pytest.fixture
def two_route_instance() -> Instance:
    """
    Two trains meeting at a two-track terminus.

    Returns
    -------
    Instance
        T1 occupies track 0 of B from 400 to 1000; T2 is timetabled on the
        same track at 500.
    """
    return parse_instance(TWO_ROUTE)


@pytest.fixture
def connection_instance() -> Instance:
    """
    A delayed feeder whose passengers change to a train leaving B.

    Returns
    -------
    Instance
        T1 feeds T2 at B with a 60 s transfer and is delayed 100 s at A.
    """
    return parse_instance(CONNECTION)


@pytest.fixture
def mutual_instance() -> Instance:
    """
    Two trains that each wait for the other's passengers without dwelling.

    Returns
    -------
    Instance
        An instance where at most one of the two trains can be scheduled.
    """
    return parse_instance(MUTUAL)


@pytest.fixture
def opposing_instance() -> Instance:
    """
    Two trains running towards each other on a single-track edge.

    Returns
    -------
    Instance
        T1 runs A to B, T2 runs B to A, both timetabled from 100 to 400.
    """
    return parse_instance(OPPOSING)


@pytest.fixture
def short_stop_instance() -> Instance:
    """
    Opposing trains where T1 may wait at most 120 s at A.

    Returns
    -------
    Instance
        T2 holds the single-track edge until 400, so T1 cannot wait for it
        at A.
    """
    return parse_instance(
        OPPOSING.replace("call A 0 600 100 100 0 0 0", "call A 0 120 100 100 0 0 0")
    )


@pytest.fixture
def generated_instance() -> Instance:
    """
    Small seeded synthetic instance.

    Returns
    -------
    Instance
        Five trains on five nodes with a drawn perturbation.
    """
    return generate(
        GeneratorParams(n_trains=5, n_nodes=5, traffic_density=0.2, seed=7)
    ).instance


@pytest.fixture
def write_instance(tmp_path: Path) -> Callable[[str, str], Path]:
    """
    Write instance documents into a temporary directory.

    Returns
    -------
    Callable[[str, str], Path]
        Function taking a file name and document text, returning the path.
    """

    def _write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def mock_console(monkeypatch: pytest.MonkeyPatch) -> Mock:
    """
    Mock Rich console for testing output.

    Parameters
    ----------
    monkeypatch : pytest.MonkeyPatch
        Pytest monkeypatch fixture.

    Returns
    -------
    Mock
        Mock console instance shared by every module that prints.
    """
    mock_console_instance = Mock()
    for module in (
        "rail_reschedule.utils",
        "rail_reschedule.cli",
        "rail_reschedule.bench.commands",
        "rail_reschedule.bench.plan",
    ):
        monkeypatch.setattr(f"{module}.console", mock_console_instance)
    return mock_console_instance
