"""Unit tests for rail_reschedule.cli module."""

import argparse
import json
from pathlib import Path
from unittest.mock import Mock

import pytest

from rail_reschedule.cli import (
    get_version,
    main,
    resolve_ea_config,
    resolve_scheduler_config,
)
from rail_reschedule.evolution import ConfigurationError, Replacement
from rail_reschedule.inoculation import inoculant_path
from rail_reschedule.instance_io import instance_digest, load_problem, save_instance
from rail_reschedule.model import Instance


FAST_EA_FLAGS = ["--mu", "2", "--lambda", "4", "--generations", "2", "--quiet"]


def _ea_namespace(**overrides: object) -> argparse.Namespace:
    values: dict[str, object] = {
        "mu": None,
        "lam": None,
        "generations": None,
        "temperature": None,
        "binomial": None,
        "replacement": None,
        "tournament_size": None,
        "radius": None,
        "kick_limit": None,
        "seed": None,
        "time_budget": None,
        "workers": None,
    }
    values.update(overrides)
    return argparse.Namespace(**values)


@pytest.fixture
def instance_file(generated_instance: Instance, tmp_path: Path) -> Path:
    """
    Write the generated instance to disk.

    Returns
    -------
    Path
        Path of ``small.rail``.
    """
    return save_instance(generated_instance, tmp_path / "small.rail")


class TestGetVersion:
    """Tests for get_version function."""

    def test_get_version_success(self) -> None:
        """Test successful version retrieval."""
        version = get_version()
        assert version != "unknown"
        assert len(version) > 0

    def test_get_version_not_installed(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test version retrieval when package is not installed."""

        def mock_version_error(package: str) -> None:
            raise Exception("Package not found")

        monkeypatch.setattr("rail_reschedule.cli.version", mock_version_error)

        assert get_version() == "unknown"


class TestResolveConfig:
    """Tests for resolve_ea_config and resolve_scheduler_config functions."""

    def test_defaults(self) -> None:
        """Test the built-in EA settings."""
        config = resolve_ea_config(_ea_namespace(), {})

        assert config.mu == 10
        assert config.lam == 70
        assert config.generations == 100
        assert config.replacement is Replacement.PLUS
        assert config.temperature.at(0) == 4.0
        assert config.temperature.binomial is True
        assert config.radius is None

    def test_flags_override_config_file(self) -> None:
        """Test precedence of flags over file values."""
        file_values = {"MU": "5", "LAMBDA": "20", "REPLACEMENT": "ept", "RADIUS": "3"}

        config = resolve_ea_config(_ea_namespace(mu=4), file_values)

        assert config.mu == 4
        assert config.offspring_per_parent == 5
        assert config.replacement is Replacement.EPT
        assert config.radius == 3

    def test_lambda_must_be_a_multiple_of_mu(self) -> None:
        """Test the offspring count check."""
        with pytest.raises(ConfigurationError, match="multiple of mu"):
            resolve_ea_config(_ea_namespace(mu=3, lam=4), {})

    def test_kick_limit(self) -> None:
        """Test the decoder settings."""
        config = resolve_scheduler_config(_ea_namespace(), {"KICK_LIMIT": "7"})

        assert config.kick_limit == 7


class TestMain:
    """Tests for main function."""

    def test_main_version_flag(
        self, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test main with --version flag."""
        monkeypatch.setattr("sys.argv", ["rail-reschedule", "--version"])

        with pytest.raises(SystemExit) as exc_info:
            main()

        assert exc_info.value.code == 0
        assert "rail-reschedule" in capsys.readouterr().out

    def test_main_requires_a_command(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test main without a subcommand."""
        monkeypatch.setattr("sys.argv", ["rail-reschedule"])

        with pytest.raises(SystemExit) as exc_info:
            main()

        assert exc_info.value.code == 2

    def test_generate(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test writing two seeded instances."""
        out_dir = tmp_path / "data"
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "generate",
                str(out_dir),
                "--trains",
                "5",
                "--nodes",
                "5",
                "--traffic-density",
                "0.2",
                "--count",
                "2",
                "--seed",
                "7",
            ],
        )

        assert main() == 0
        assert sorted(path.name for path in out_dir.iterdir()) == [
            "instance-0007.rail",
            "instance-0007.rail.meta.json",
            "instance-0008.rail",
            "instance-0008.rail.meta.json",
        ]
        metadata = json.loads(
            (out_dir / "instance-0008.rail.meta.json").read_text(encoding="utf-8")
        )
        assert metadata["params"]["seed"] == 8

    def test_generate_caps_routes_per_node(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test that the route cap reaches the generator."""
        out_dir = tmp_path / "data"
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "generate",
                str(out_dir),
                "--trains",
                "5",
                "--nodes",
                "5",
                "--traffic-density",
                "0.2",
                "--seed",
                "7",
                "--routes-per-node",
                "2",
            ],
        )

        assert main() == 0
        metadata = json.loads(
            (out_dir / "instance-0007.rail.meta.json").read_text(encoding="utf-8")
        )
        assert metadata["params"]["routes_per_node"] == 2
        instance = load_problem(out_dir / "instance-0007.rail")
        assert instance_digest(instance) == metadata["instance_hash"]

    def test_generate_pairs(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test writing easy and hard variants."""
        out_dir = tmp_path / "data"
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "generate",
                str(out_dir),
                "--trains",
                "5",
                "--nodes",
                "5",
                "--traffic-density",
                "0.2",
                "--seed",
                "7",
                "--pair",
                "0",
                "300",
            ],
        )

        assert main() == 0
        assert (out_dir / "instance-0007-easy.rail").exists()
        assert (out_dir / "instance-0007-hard.rail").exists()
        assert "delay 300" in (out_dir / "instance-0007-hard.rail").read_text(
            encoding="utf-8"
        )

    def test_generate_invalid_params(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test that invalid generator parameters exit with 2."""
        monkeypatch.setattr(
            "sys.argv", ["rail-reschedule", "generate", str(tmp_path), "--trains", "0"]
        )

        assert main() == 2
        assert list(tmp_path.iterdir()) == []

    def test_inoculate(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, instance_file: Path
    ) -> None:
        """Test pre-solving one instance."""
        monkeypatch.setattr(
            "sys.argv", ["rail-reschedule", "inoculate", str(instance_file), *FAST_EA_FLAGS]
        )

        assert main() == 0
        assert inoculant_path(instance_file).exists()

    def test_inoculate_missing_instance(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test that an unreadable instance is a partial failure."""
        monkeypatch.setattr(
            "sys.argv",
            ["rail-reschedule", "inoculate", str(tmp_path / "x.rail"), *FAST_EA_FLAGS],
        )

        assert main() == 1

    def test_run_and_report(
        self,
        monkeypatch: pytest.MonkeyPatch,
        mock_console: Mock,
        instance_file: Path,
        tmp_path: Path,
    ) -> None:
        """Test an experiment battery followed by its report."""
        results = tmp_path / "results"
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "run",
                str(instance_file),
                "--out",
                str(results),
                "--variants",
                "MM,RANDOM",
                "--runs",
                "2",
                "--timing",
                "none",
                *FAST_EA_FLAGS,
            ],
        )
        assert main() == 0
        manifest = json.loads((results / "manifest.json").read_text(encoding="utf-8"))
        assert len(manifest["cells"]) == 4

        monkeypatch.setattr("sys.argv", ["rail-reschedule", "report", str(results)])
        assert main() == 0
        assert (results / "comparisons.csv").exists()

    def test_run_replays_a_manifest(
        self,
        monkeypatch: pytest.MonkeyPatch,
        mock_console: Mock,
        instance_file: Path,
        tmp_path: Path,
    ) -> None:
        """Test that run --manifest rewrites the same results."""
        original, replay = tmp_path / "original", tmp_path / "replay"
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "run",
                str(instance_file),
                "--out",
                str(original),
                "--variants",
                "MM,RANDOM",
                "--runs",
                "2",
                "--timing",
                "none",
                *FAST_EA_FLAGS,
            ],
        )
        assert main() == 0

        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "run",
                "--manifest",
                str(original / "manifest.json"),
                "--out",
                str(replay),
                "--quiet",
            ],
        )
        assert main() == 0

        def tree(root: Path) -> dict[str, bytes]:
            return {
                path.relative_to(root).as_posix(): path.read_bytes()
                for path in sorted(root.rglob("*"))
                if path.is_file()
            }

        assert tree(replay) == tree(original)

    @pytest.mark.parametrize("with_instances", [True, False])
    def test_run_needs_exactly_one_plan_source(
        self,
        monkeypatch: pytest.MonkeyPatch,
        mock_console: Mock,
        instance_file: Path,
        tmp_path: Path,
        with_instances: bool,
    ) -> None:
        """Test instance files combined with --manifest, and neither given."""
        argv = ["rail-reschedule", "run", "--out", str(tmp_path / "results")]
        if with_instances:
            argv += [str(instance_file), "--manifest", str(tmp_path / "manifest.json")]
        monkeypatch.setattr("sys.argv", argv)

        assert main() == 2
        assert not (tmp_path / "results").exists()

    def test_run_reads_the_config_file(
        self,
        monkeypatch: pytest.MonkeyPatch,
        mock_console: Mock,
        instance_file: Path,
        tmp_path: Path,
    ) -> None:
        """Test options supplied through --config."""
        config_file = tmp_path / "bench.env"
        config_file.write_text(
            "MU=2\nLAMBDA=2\nGENERATIONS=1\nRUNS=1\nTIMING=none\nVARIANTS=RANDOM\n"
            "COLOUR=blue\n",
            encoding="utf-8",
        )
        results = tmp_path / "results"
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "run",
                str(instance_file),
                "--out",
                str(results),
                "--config",
                str(config_file),
                "--quiet",
            ],
        )

        assert main() == 0
        manifest = json.loads((results / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["plan"]["runs"] == 1
        assert manifest["plan"]["ea"]["mu"] == 2
        assert [cell["variant"] for cell in manifest["cells"]] == ["RANDOM"]
        warnings = [str(call.args[0]) for call in mock_console.print.call_args_list]
        assert any("COLOUR" in line for line in warnings)

    @pytest.mark.parametrize(
        "extra",
        [
            ["--mu", "3", "--lambda", "4"],
            ["--variants", "NOPE"],
            ["--config", "missing.env"],
        ],
    )
    def test_run_invalid_configuration(
        self,
        monkeypatch: pytest.MonkeyPatch,
        mock_console: Mock,
        instance_file: Path,
        tmp_path: Path,
        extra: list[str],
    ) -> None:
        """Test that configuration errors exit with 2."""
        monkeypatch.chdir(tmp_path)
        monkeypatch.setattr(
            "sys.argv",
            ["rail-reschedule", "run", str(instance_file), "--out", "results", *extra],
        )

        assert main() == 2
        assert not (tmp_path / "results").exists()

    def test_run_missing_instance(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test that plan validation rejects a missing instance."""
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "run",
                str(tmp_path / "x.rail"),
                "--out",
                str(tmp_path / "results"),
                *FAST_EA_FLAGS,
            ],
        )

        assert main() == 2

    def test_report_without_results(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test reporting on a directory without a manifest."""
        monkeypatch.setattr("sys.argv", ["rail-reschedule", "report", str(tmp_path)])

        assert main() == 2

    def test_plot(
        self,
        monkeypatch: pytest.MonkeyPatch,
        mock_console: Mock,
        instance_file: Path,
        tmp_path: Path,
    ) -> None:
        """Test drawing the timetable-order decode."""
        output = tmp_path / "diagram.svg"
        monkeypatch.setattr(
            "sys.argv",
            ["rail-reschedule", "plot", str(instance_file), "--out", str(output)],
        )

        assert main() == 0
        assert output.read_text(encoding="utf-8").startswith("<svg")

    def test_plot_missing_instance(
        self, monkeypatch: pytest.MonkeyPatch, mock_console: Mock, tmp_path: Path
    ) -> None:
        """Test drawing from an instance that does not exist."""
        monkeypatch.setattr(
            "sys.argv",
            [
                "rail-reschedule",
                "plot",
                str(tmp_path / "x.rail"),
                "--out",
                str(tmp_path / "d.svg"),
            ],
        )

        assert main() == 2
