"""Unit tests for rail_reschedule.bench.space_time module."""

from pathlib import Path
from unittest.mock import Mock
from xml.etree import ElementTree

import pytest

from rail_reschedule.bench.space_time import (
    HIGHLIGHT_COLOR,
    TRAIN_COLOR,
    DiagramOptions,
    emit_space_time,
)
from rail_reschedule.constraints import Assignment
from rail_reschedule.model import (
    Instance,
    NodeId,
    RouteTriplet,
    TrainId,
    apply_perturbation,
)
from rail_reschedule.scheduler import schedule


def _polylines(document: str) -> dict[str, list[tuple[float, float]]]:
    root = ElementTree.fromstring(document)
    lines: dict[str, list[tuple[float, float]]] = {}
    for element in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pairs = element.attrib["points"].split()
        lines[element.attrib["id"]] = [
            (float(x), float(y)) for x, y in (pair.split(",") for pair in pairs)
        ]
    return lines


def _layout(document: str) -> list[tuple[str, str | None, tuple[float, ...]]]:
    numbers = {
        "rect": ("width", "height"),
        "line": ("x1", "y1", "x2", "y2"),
        "text": ("x", "y"),
    }
    layout: list[tuple[str, str | None, tuple[float, ...]]] = []
    for element in ElementTree.fromstring(document):
        tag = element.tag.rsplit("}", 1)[-1]
        if tag == "defs":
            continue
        if tag == "polyline":
            values = tuple(
                float(v) for pair in element.attrib["points"].split() for v in pair.split(",")
            )
        else:
            values = tuple(float(element.attrib[name]) for name in numbers[tag])
        layout.append((tag, element.text, values))
    return layout


@pytest.fixture
def contention_schedule(
    contention_instance: Instance,
) -> dict[TrainId, dict[NodeId, Assignment]]:
    """
    Decoded schedule of the two contending trains.

    Returns
    -------
    dict[TrainId, dict[NodeId, Assignment]]
        T1 runs A 100 to B 400, T2 follows from 160 to 460.
    """
    problem = apply_perturbation(contention_instance)
    result = schedule(problem, ["T1", "T2"])
    return {train_id: dict(entries) for train_id, entries in result.assignments.items()}


class TestEmitSpaceTime:
    """Tests for emit_space_time function."""

    def test_one_polyline_per_train(
        self, contention_schedule: dict[TrainId, dict[NodeId, Assignment]]
    ) -> None:
        """Test the drawn trains and their colors."""
        document = emit_space_time(
            contention_schedule,
            ["A", "B"],
            DiagramOptions(highlight=frozenset({"T2"}), title="Contention"),
        )

        assert document.count("<polyline") == 2
        assert 'id="train-T1"' in document
        assert 'id="train-T2"' in document
        assert f'stroke="{HIGHLIGHT_COLOR}"' in document
        assert f'stroke="{TRAIN_COLOR}"' in document
        assert "Contention" in document

    def test_fixed_scale_sets_the_width(
        self, contention_schedule: dict[TrainId, dict[NodeId, Assignment]]
    ) -> None:
        """Test that the width follows the time span at a fixed scale."""
        # span 100..460 s, 60 px margins
        document = emit_space_time(
            contention_schedule, ["A", "B"], DiagramOptions(pixels_per_second=1.0)
        )

        assert 'width="480"' in document

    def test_output_is_deterministic_and_written(
        self,
        contention_schedule: dict[TrainId, dict[NodeId, Assignment]],
        tmp_path: Path,
    ) -> None:
        """Test identical text for identical inputs and the written file."""
        target = tmp_path / "plots" / "diagram.svg"

        document = emit_space_time(contention_schedule, ["A", "B"], output=target)

        assert document == emit_space_time(contention_schedule, ["A", "B"])
        assert target.read_text(encoding="utf-8") == document

    def test_train_off_the_path_is_skipped(
        self,
        contention_schedule: dict[TrainId, dict[NodeId, Assignment]],
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        """Test that a train without on-path calls is left out with a warning."""
        mock_warn = Mock()
        monkeypatch.setattr("rail_reschedule.bench.space_time.warn", mock_warn)

        document = emit_space_time(contention_schedule, ["Z"])

        assert "<polyline" not in document
        assert mock_warn.call_count == 2

    def test_train_joining_the_path_is_clipped(
        self, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that only the on-path part of a longer run is drawn."""
        mock_warn = Mock()
        monkeypatch.setattr("rail_reschedule.bench.space_time.warn", mock_warn)
        through = {
            "A": Assignment(0, 10, RouteTriplet(0, 0, 0, None, "B")),
            "B": Assignment(100, 130, RouteTriplet(0, 0, 0, "A", "C")),
            "C": Assignment(300, 300, RouteTriplet(0, 0, 0, "B", None)),
        }
        elsewhere = {"A": Assignment(0, 0, RouteTriplet(0, 0, 0, None, None))}

        document = emit_space_time(
            {"T8": elsewhere, "T9": through},
            ["B", "C"],
            DiagramOptions(pixels_per_second=1.0),
        )

        # window 100..300 s, rows 60 and 540 px
        assert _polylines(document) == {
            "train-T9": [(60.0, 60.0), (90.0, 60.0), (260.0, 540.0)]
        }
        mock_warn.assert_called_once()
        assert "T8" in mock_warn.call_args.args[0]

    def test_single_call_on_the_path_is_a_dwell(self) -> None:
        """Test a train touching the path at one node only."""
        through = {
            "A": Assignment(0, 10, RouteTriplet(0, 0, 0, None, "B")),
            "B": Assignment(100, 130, RouteTriplet(0, 0, 0, "A", None)),
        }

        document = emit_space_time({"T9": through}, ["A", "Z"])

        points = _polylines(document)["train-T9"]
        assert len(points) == 2
        assert points[0][1] == points[1][1]

    def test_coordinates_match_the_reference(
        self, contention_schedule: dict[TrainId, dict[NodeId, Assignment]]
    ) -> None:
        """Test the exact geometry of the contention diagram."""
        document = emit_space_time(
            contention_schedule, ["A", "B"], DiagramOptions(pixels_per_second=1.0)
        )

        # T1: A 100/100, B 400; T2: A 130/160, B 460; window 100..460 s
        assert _polylines(document) == {
            "train-T1": [(60.0, 60.0), (60.0, 60.0), (360.0, 540.0)],
            "train-T2": [(90.0, 60.0), (120.0, 60.0), (420.0, 540.0)],
        }

    def test_diagram_matches_the_golden_layout(
        self, contention_schedule: dict[TrainId, dict[NodeId, Assignment]]
    ) -> None:
        """Test every drawn element of the contention diagram in order."""
        document = emit_space_time(
            contention_schedule,
            ["A", "B"],
            DiagramOptions(pixels_per_second=1.0, tick_seconds=120),
        )

        assert _layout(document) == [
            ("rect", None, (480.0, 600.0)),
            ("line", None, (60.0, 60.0, 420.0, 60.0)),
            ("text", "A", (52.0, 60.0)),
            ("line", None, (60.0, 540.0, 420.0, 540.0)),
            ("text", "B", (52.0, 540.0)),
            ("line", None, (80.0, 540.0, 80.0, 546.0)),
            ("text", "00:02", (80.0, 560.0)),
            ("line", None, (200.0, 540.0, 200.0, 546.0)),
            ("text", "00:04", (200.0, 560.0)),
            ("line", None, (320.0, 540.0, 320.0, 546.0)),
            ("text", "00:06", (320.0, 560.0)),
            ("polyline", None, (60.0, 60.0, 60.0, 60.0, 360.0, 540.0)),
            ("polyline", None, (90.0, 60.0, 120.0, 60.0, 420.0, 540.0)),
        ]

    def test_reversed_path_is_drawn(
        self, contention_schedule: dict[TrainId, dict[NodeId, Assignment]]
    ) -> None:
        """Test a path listed against the direction of travel."""
        document = emit_space_time(contention_schedule, ["B", "A"])

        assert document.count("<polyline") == 2

    @pytest.mark.parametrize("path", [[], ["A", "B", "A"]])
    def test_invalid_path_raises(
        self,
        contention_schedule: dict[TrainId, dict[NodeId, Assignment]],
        path: list[NodeId],
    ) -> None:
        """Test empty and repeating node paths."""
        with pytest.raises(ValueError, match="Node path"):
            emit_space_time(contention_schedule, path)
