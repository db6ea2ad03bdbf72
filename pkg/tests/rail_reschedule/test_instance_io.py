"""Unit tests for rail_reschedule.instance_io module."""

from collections.abc import Callable
from pathlib import Path
from unittest.mock import Mock

import pytest

from rail_reschedule.generator import GeneratorParams, Topology, generate
from rail_reschedule.instance_io import (
    InstanceParseError,
    InstanceValidationError,
    dump_instance,
    dump_schedule,
    instance_digest,
    load_problem,
    parse_instance,
    parse_schedule,
    save_instance,
    timetable_violations,
    validate_instance,
)
from rail_reschedule.model import (
    Connection,
    Instance,
    Perturbation,
    RouteTriplet,
    apply_perturbation,
)
from rail_reschedule.scheduler import schedule


class TestParseInstance:
    """Tests for parse_instance function."""

    def test_parse_tiny_instance(self, tiny_instance: Instance) -> None:
        """Test the parsed structure of a small document."""
        network = tiny_instance.network

        assert network.nodes == ("A", "B")
        assert network.node_tracks == {"A": 1, "B": 1}
        assert network.edge_between("B", "A") is not None
        assert network.routes["A"] == (
            RouteTriplet(0, 0, 0, None, "B"),
            RouteTriplet(0, 0, 0, "B", None),
        )
        train = tiny_instance.train_index["T1"]
        assert train.itinerary == ("A", "B")
        assert train.stop_bounds["B"] == (0, 600)
        assert train.min_travel == {("A", "B"): 300}
        entry = tiny_instance.timetable[("T1", "B")]
        assert (entry.arrival, entry.departure) == (400, 400)
        assert entry.route == RouteTriplet(0, 0, 0, "A", None)
        assert tiny_instance.perturbation is None

    def test_parse_spacing_connections_and_perturbation(
        self, connection_instance: Instance, contention_instance: Instance
    ) -> None:
        """Test the optional sections."""
        assert connection_instance.train_index["T1"].connections == (
            Connection("T2", "B", 60),
        )
        assert connection_instance.perturbation == Perturbation("T1", "A", 100)
        spacing = contention_instance.spacing
        assert spacing.node_gamma == {"A": 30, "B": 30}
        assert spacing.headway_for("A", "B") == 60

    def test_comments_and_blank_lines_are_ignored(self, tiny_document: str) -> None:
        """Test comment stripping."""
        commented = "# generated by hand\n\n" + tiny_document.replace(
            "tracks 1\n", "tracks 1  # single\n", 1
        )

        assert parse_instance(commented) == parse_instance(tiny_document)

    @pytest.mark.parametrize(
        ("text", "line", "message"),
        [
            ("[node A]\ntracks 1\n", 1, "expected header"),
            ("rail-instance 1\ntracks 1\n", 2, "before the first section"),
            ("rail-instance 1\n[depot X]\n", 2, "unknown section"),
            ("rail-instance 1\n[node A]\ntracks one\n", 2, "expected an integer"),
            ("rail-instance 1\n[node A]\ntracks 1\n[node A]\ntracks 1\n", 4, "duplicate node"),
            ("rail-instance 1\n[node A\n", 2, "unterminated"),
            (
                "rail-instance 1\n[train T1]\ncall A 0 600 100\n",
                3,
                "'call' takes 8 values",
            ),
        ],
    )
    def test_malformed_documents(self, text: str, line: int, message: str) -> None:
        """Test that parse errors carry the offending line."""
        with pytest.raises(InstanceParseError, match=message) as exc_info:
            parse_instance(text)

        assert exc_info.value.line_number == line


class TestDumpInstance:
    """Tests for dump_instance and instance_digest functions."""

    def test_dump_parses_back_to_the_same_instance(
        self, connection_instance: Instance, contention_instance: Instance
    ) -> None:
        """Test that the canonical text describes the same instance."""
        for instance in (connection_instance, contention_instance):
            assert parse_instance(dump_instance(instance)) == instance

    def test_generated_instance_survives_the_file_round_trip(self, tmp_path: Path) -> None:
        """Test a twenty-train generated instance with gates and connections."""
        instance = generate(
            GeneratorParams(
                n_trains=20,
                n_nodes=8,
                tracks_per_edge=(2, 2),
                node_tracks=(2, 3),
                gate_density=0.5,
                traffic_density=0.2,
                connection_rate=0.5,
                topology=Topology.GRID,
                seed=1,
            )
        ).instance

        path = save_instance(instance, tmp_path / "generated.rail")

        assert len(instance.trains) == 20
        assert load_problem(path) == instance
        assert path.read_text(encoding="utf-8") == dump_instance(instance)

    def test_digest_ignores_the_perturbation(self, connection_instance: Instance) -> None:
        """Test that every delay of one site shares the instance hash."""
        assert instance_digest(connection_instance) == instance_digest(
            connection_instance.with_delay(600)
        )
        assert instance_digest(connection_instance) == instance_digest(
            connection_instance.without_perturbation()
        )

    def test_digest_changes_with_the_timetable(
        self, tiny_document: str, tiny_instance: Instance
    ) -> None:
        """Test that the hash covers the timetable."""
        moved = parse_instance(tiny_document.replace("400 400", "410 410"))

        assert instance_digest(moved) != instance_digest(tiny_instance)


class TestValidateInstance:
    """Tests for validate_instance function."""

    def test_valid_instances(
        self,
        tiny_instance: Instance,
        two_route_instance: Instance,
        connection_instance: Instance,
        mutual_instance: Instance,
        gated_instance: Instance,
    ) -> None:
        """Test that the fixtures are structurally valid."""
        for instance in (
            tiny_instance,
            two_route_instance,
            connection_instance,
            mutual_instance,
            gated_instance,
        ):
            is_valid, errors = validate_instance(instance)
            assert is_valid is True, errors

    def test_missing_running_time(self, tiny_document: str) -> None:
        """Test a train without a running time."""
        instance = parse_instance(tiny_document.replace("run A B 300\n", ""))

        is_valid, errors = validate_instance(instance)

        assert is_valid is False
        assert "train T1: running time A->B must be positive" in errors

    def test_inadmissible_timetable_route(self, tiny_document: str) -> None:
        """Test a timetable route missing from the node's route list."""
        instance = parse_instance(
            tiny_document.replace("call B 0 600 400 400 0 0 0", "call B 0 600 400 400 0 1 0")
        )

        is_valid, errors = validate_instance(instance)

        assert is_valid is False
        assert any("timetable route at 'B' is not admissible" in e for e in errors)

    def test_disconnected_network_and_bad_perturbation(self, tiny_document: str) -> None:
        """Test network connectivity and perturbation site checks."""
        text = tiny_document + "[node Z]\ntracks 1\n[perturbation]\ntrain T1\nnode Z\ndelay 5\n"

        is_valid, errors = validate_instance(parse_instance(text))

        assert is_valid is False
        assert "network: is not connected" in errors
        assert "perturbation: (T1, Z) is not on an itinerary" in errors

    def test_route_on_missing_track(self, tiny_document: str) -> None:
        """Test a route referencing a track the node does not have."""
        text = tiny_document.replace("route - B 0 0 0", "route - B 0 2 0")

        is_valid, errors = validate_instance(parse_instance(text))

        assert is_valid is False
        assert any("in-node track 2 does not exist" in e for e in errors)


class TestLoadProblem:
    """Tests for load_problem function."""

    def test_load_valid_file(
        self, write_instance: Callable[[str, str], Path], tiny_document: str
    ) -> None:
        """Test loading a valid document from disk."""
        path = write_instance("tiny.rail", tiny_document)

        instance = load_problem(path)

        assert instance.train_ids == ("T1",)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that a missing document raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_problem(tmp_path / "missing.rail")

    def test_non_utf8_file_is_a_parse_error(self, tmp_path: Path) -> None:
        """Test that undecodable bytes name the file and their line."""
        path = tmp_path / "latin.rail"
        path.write_bytes(b"rail-instance 1\n# gr\xfc\xdfe\n[node A]\n")

        with pytest.raises(InstanceParseError, match="not UTF-8") as exc_info:
            load_problem(path)

        assert exc_info.value.line_number == 2
        assert str(path) in str(exc_info.value)

    def test_windows_line_endings_load(
        self, write_instance: Callable[[str, str], Path], tiny_document: str
    ) -> None:
        """Test that CRLF documents still parse."""
        path = write_instance("tiny.rail", "")
        path.write_bytes(tiny_document.replace("\n", "\r\n").encode("utf-8"))

        assert load_problem(path).train_ids == ("T1",)

    def test_invalid_file_names_the_offender(
        self, write_instance: Callable[[str, str], Path], tiny_document: str
    ) -> None:
        """Test the entity of the validation error."""
        path = write_instance("bad.rail", tiny_document.replace("run A B 300", "run A B 0"))

        with pytest.raises(InstanceValidationError) as exc_info:
            load_problem(path)

        assert exc_info.value.entity == "train T1"

    def test_timetable_violations_are_warnings(
        self,
        write_instance: Callable[[str, str], Path],
        contention_document: str,
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        """Test that an infeasible timetable still loads."""
        path = write_instance("clash.rail", contention_document)
        mock_warn = Mock()
        monkeypatch.setattr("rail_reschedule.instance_io.warn", mock_warn)

        instance = load_problem(path)

        assert instance.train_ids == ("T1", "T2")
        mock_warn.assert_called_once()
        assert "constraint violations" in mock_warn.call_args.args[0]


class TestTimetableViolations:
    """Tests for timetable_violations function."""

    def test_feasible_timetable(self, connection_instance: Instance) -> None:
        """Test a timetable without violations."""
        assert timetable_violations(connection_instance) == []

    def test_clashing_timetable(self, contention_instance: Instance) -> None:
        """Test a timetable whose two trains share one slot."""
        violations = timetable_violations(contention_instance)

        assert "node-spacing conflict for train T2 at A against T1" in violations


class TestScheduleFile:
    """Tests for dump_schedule and parse_schedule functions."""

    def test_round_trip(self, connection_instance: Instance) -> None:
        """Test that a decoded schedule reads back unchanged."""
        problem = apply_perturbation(connection_instance)
        result = schedule(problem, ["T2", "T1"])

        document = parse_schedule(dump_schedule(result, problem))

        assert document.assignments == result.assignments
        assert document.fitness == result.fitness
        assert document.delay == result.delay
        assert document.kicks == 1
        assert document.unscheduled == ()

    def test_unscheduled_trains_are_listed(self, mutual_instance: Instance) -> None:
        """Test that unscheduled trains appear in the document."""
        problem = apply_perturbation(mutual_instance)
        result = schedule(problem, ["T1", "T2"])

        document = parse_schedule(dump_schedule(result, problem))

        assert document.unscheduled == ("T2",)
        assert set(document.assignments) == {"T1"}

    def test_wrong_header(self) -> None:
        """Test that an instance document is not a schedule."""
        with pytest.raises(InstanceParseError):
            parse_schedule("rail-instance 1\n")


class TestSaveInstance:
    """Tests for save_instance function."""

    def test_creates_parent_directories(
        self, connection_instance: Instance, tmp_path: Path
    ) -> None:
        """Test writing into a new directory."""
        path = save_instance(connection_instance, tmp_path / "nested" / "x.rail")

        assert load_problem(path) == connection_instance
