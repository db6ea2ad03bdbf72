"""Unit tests for rail_reschedule.generator module."""

import json
from dataclasses import replace
from pathlib import Path

import pytest

from rail_reschedule.generator import (
    Difficulty,
    GenerationError,
    GeneratorParams,
    Topology,
    classify,
    generate,
    make_instance_pair,
    metadata_path,
    save_generated,
    validate_params,
)
from rail_reschedule.instance_io import (
    dump_instance,
    instance_digest,
    load_problem,
    timetable_violations,
    validate_instance,
)
from rail_reschedule.model import (
    Instance,
    Network,
    NodeId,
    PerturbationError,
    apply_perturbation,
    edge_key,
)
from rail_reschedule.scheduler import exhaustive_optimum


SMALL = GeneratorParams(n_trains=5, n_nodes=5, traffic_density=0.2, seed=7)


def _end_tracks(network: Network, node: NodeId, end: NodeId | None) -> int:
    return 1 if end is None else network.edge_index[edge_key(node, end)].track_count


class TestValidateParams:
    """Tests for validate_params function."""

    def test_defaults_are_valid(self) -> None:
        """Test the default parameters."""
        is_valid, errors = validate_params(GeneratorParams())

        assert is_valid is True
        assert errors == []

    def test_every_error_is_reported(self) -> None:
        """Test that all invalid knobs are listed together."""
        params = GeneratorParams(
            n_trains=0,
            n_nodes=1,
            node_tracks=(2, 1),
            traffic_density=0.0,
            violation_rate=1.5,
        )

        is_valid, errors = validate_params(params)

        assert is_valid is False
        assert "n_trains must be at least 1" in errors
        assert "n_nodes must be at least 2" in errors
        assert "node_tracks must satisfy 1 <= low <= high" in errors
        assert "traffic_density must lie in (0, 1]" in errors
        assert "violation_rate must lie in [0, 1]" in errors

    def test_generate_rejects_invalid_params(self) -> None:
        """Test that generation carries the diagnostics."""
        with pytest.raises(GenerationError) as exc_info:
            generate(GeneratorParams(n_trains=0))

        assert exc_info.value.diagnostics == ["n_trains must be at least 1"]


class TestGenerate:
    """Tests for generate function."""

    def test_same_seed_same_instance(self) -> None:
        """Test reproducibility of instance and metadata."""
        first = generate(SMALL)
        second = generate(SMALL)

        assert dump_instance(first.instance) == dump_instance(second.instance)
        assert first.metadata.to_json() == second.metadata.to_json()

    def test_other_seed_other_instance(self) -> None:
        """Test that the seed drives the draw."""
        first = generate(SMALL)
        second = generate(GeneratorParams(n_trains=5, n_nodes=5, traffic_density=0.2, seed=8))

        assert instance_digest(first.instance) != instance_digest(second.instance)

    def test_identifiers_and_perturbation(self) -> None:
        """Test naming and the drawn perturbation site."""
        instance = generate(SMALL).instance

        assert instance.network.nodes == ("N00", "N01", "N02", "N03", "N04")
        assert instance.train_ids == ("T01", "T02", "T03", "T04", "T05")
        site = instance.perturbation
        assert site is not None
        assert 60 <= site.delay <= 600
        victim = instance.train_index[site.train]
        assert site.node in victim.itinerary[:-1]

    @pytest.mark.parametrize("topology", [Topology.LINE, Topology.GRID])
    def test_instance_is_valid_and_feasible(self, topology: Topology) -> None:
        """Test that an unperturbed timetable needs no re-scheduling."""
        generated = generate(
            GeneratorParams(
                n_trains=5, n_nodes=5, traffic_density=0.2, topology=topology, seed=7
            )
        )

        is_valid, errors = validate_instance(generated.instance)

        assert is_valid is True, errors
        assert timetable_violations(generated.instance) == []
        assert generated.metadata.injected_violations == []
        assert generated.metadata.settle_rounds >= 1

    def test_metadata_hash_matches_the_instance(self) -> None:
        """Test the recorded instance hash."""
        generated = generate(SMALL)

        assert generated.metadata.instance_hash == instance_digest(generated.instance)

    def test_injected_violations_show_up(self) -> None:
        """Test that a full violation rate breaks the timetable."""
        generated = generate(
            GeneratorParams(
                n_trains=4,
                n_nodes=3,
                node_tracks=(1, 1),
                traffic_density=0.2,
                violation_rate=1.0,
                seed=2,
            )
        )

        injected = generated.metadata.injected_violations
        assert injected
        assert all(item.gamma > item.margin for item in injected)
        assert timetable_violations(generated.instance)

    def test_declared_connections_keep_the_timetable_feasible(self) -> None:
        """Test that connections are only drawn where the transfer fits."""
        generated = generate(
            GeneratorParams(
                n_trains=5, n_nodes=5, traffic_density=0.2, connection_rate=1.0, seed=7
            )
        )

        declared = sum(len(train.connections) for train in generated.instance.trains)
        assert declared == generated.metadata.connections
        assert timetable_violations(generated.instance) == []

    def test_every_track_combination_is_a_route(self) -> None:
        """Test that uncapped nodes admit every movement on every track."""
        network = generate(SMALL).instance.network
        neighbours: dict[str, list[str]] = {node: [] for node in network.nodes}
        for edge in network.edges:
            neighbours[edge.a].append(edge.b)
            neighbours[edge.b].append(edge.a)

        for node in network.nodes:
            ends = [None, *neighbours[node]]
            expected = 0
            for inc in ends:
                for out in ends:
                    if inc == out:
                        continue
                    expected += (
                        _end_tracks(network, node, inc)
                        * network.node_tracks[node]
                        * _end_tracks(network, node, out)
                    )
            assert len(network.routes[node]) == expected
            assert len(set(network.routes[node])) == expected

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_routes_per_node_caps_the_routes(self, seed: int) -> None:
        """Test the route cap and the movements it always keeps."""
        params = GeneratorParams(
            n_trains=5,
            n_nodes=5,
            tracks_per_edge=(2, 2),
            node_tracks=(2, 3),
            traffic_density=0.2,
            seed=seed,
        )
        full = generate(params).instance.network
        capped_instance = generate(replace(params, routes_per_node=3)).instance
        capped = capped_instance.network

        for node in full.nodes:
            groups = {(r.inc, r.out, r.u_inc) for r in full.routes[node]}
            assert set(capped.routes[node]) <= set(full.routes[node])
            assert len(capped.routes[node]) <= max(3, len(groups))
            assert {(r.inc, r.out, r.u_inc) for r in capped.routes[node]} == groups
        is_valid, errors = validate_instance(capped_instance)
        assert is_valid is True, errors

    def test_routes_per_node_must_be_positive(self) -> None:
        """Test that a zero route cap is rejected."""
        is_valid, errors = validate_params(GeneratorParams(routes_per_node=0))

        assert is_valid is False
        assert errors == ["routes_per_node must be at least 1"]


class TestSaveGenerated:
    """Tests for save_generated and metadata_path functions."""

    def test_writes_instance_and_sidecar(self, tmp_path: Path) -> None:
        """Test both files and the sidecar content."""
        generated = generate(SMALL)

        instance_file, sidecar = save_generated(generated, tmp_path / "instance-0007.rail")

        assert sidecar == metadata_path(instance_file)
        assert sidecar.name == "instance-0007.rail.meta.json"
        assert dump_instance(load_problem(instance_file)) == dump_instance(
            generated.instance
        )
        metadata = json.loads(sidecar.read_text(encoding="utf-8"))
        assert metadata["instance_hash"] == generated.metadata.instance_hash
        assert metadata["params"]["seed"] == 7
        assert metadata["params"]["topology"] == "line"


class TestMakeInstancePair:
    """Tests for make_instance_pair function."""

    def test_pair_shares_the_site(self, connection_instance: Instance) -> None:
        """Test the easy and hard variants of one site."""
        easy, hard = make_instance_pair(connection_instance, 0, 300)

        assert easy.perturbation is not None
        assert hard.perturbation is not None
        assert easy.perturbation.delay == 0
        assert hard.perturbation.delay == 300
        assert (easy.perturbation.train, easy.perturbation.node) == ("T1", "A")
        assert instance_digest(easy) == instance_digest(hard)

    @pytest.mark.parametrize(("easy", "hard"), [(-1, 10), (10, -1), (300, 100)])
    def test_invalid_delays_raise(
        self, connection_instance: Instance, easy: int, hard: int
    ) -> None:
        """Test delay validation."""
        with pytest.raises(PerturbationError):
            make_instance_pair(connection_instance, easy, hard)

    def test_base_without_site_raises(self, tiny_instance: Instance) -> None:
        """Test that a site is required."""
        with pytest.raises(PerturbationError):
            make_instance_pair(tiny_instance, 0, 100)


class TestClassify:
    """Tests for classify function."""

    def test_exhaustive_label(self, contention_instance: Instance) -> None:
        """Test labelling against the exact optimum."""
        label = classify(contention_instance, budget=10)

        assert label.label is Difficulty.EASY
        assert label.method == "exhaustive"
        assert label.identity_fitness == 1090
        assert label.oracle_fitness == 1090

    def test_larger_delays_cost_more(self, connection_instance: Instance) -> None:
        """Test that the optimum grows with the delay at one site."""
        optima = []
        for delay in (0, 50, 100, 300):
            _, variant = make_instance_pair(connection_instance, 0, delay)

            optimum = exhaustive_optimum(apply_perturbation(variant))
            label = classify(variant, budget=10)

            assert optimum is not None
            # both calls of T1 and T2's arrival at C carry the delay
            assert optimum.fitness == 1720 + 3 * delay
            assert label.oracle_fitness == optimum.fitness
            assert label.label is Difficulty.EASY
            optima.append(optimum.fitness)
        assert optima == sorted(optima)

    def test_small_budget_is_unknown(self, contention_instance: Instance) -> None:
        """Test that a budget below both checks gives no label."""
        label = classify(contention_instance, budget=1)

        assert label.label is Difficulty.UNKNOWN
        assert label.method == "none"
        assert label.oracle_fitness is None
        assert label.baseline_fitness is None

    @pytest.mark.integration_test
    def test_proxy_label(self) -> None:
        """Test labelling against random decodes when enumeration is too large."""
        instance = generate(
            GeneratorParams(n_trains=7, n_nodes=5, traffic_density=0.2, seed=7)
        ).instance

        label = classify(instance, budget=1000, seed=1)

        assert label.method == "proxy"
        assert label.baseline_fitness is not None
        expected = (
            Difficulty.EASY
            if label.identity_fitness <= label.baseline_fitness
            else Difficulty.HARD
        )
        assert label.label is expected
