"""Blackboard behavior: scoped config resolution, log discipline, model space."""

from __future__ import annotations

import numpy as np
import pytest

from flowforge.errors import ConfigError, FlowforgeError
from flowforge.metamodel import (
    MAX_LOG_DETAIL,
    ConfigStore,
    ExecutionLog,
    MetaModel,
    parse_key,
)
from flowforge.netmodel import Layer, NetworkDescriptor, WeightStats

from conftest import mk_metrics


def tiny_network(accuracy=0.9):
    return NetworkDescriptor(
        layers=[
            Layer(
                id="d1",
                kind="dense",
                input_dims=(4,),
                output_dims=(2,),
                weight_stats=WeightStats(1.0, 0.5),
                mult_count=8,
            )
        ],
        base_accuracy=accuracy,
    )


class TestConfigResolution:
    def test_instance_scope_wins(self):
        cfg = ConfigStore({"x": 0, "Pruning::x": 1, "P1@x": 2})
        assert cfg.resolve("P1", "Pruning", "x") == 2

    def test_type_scope_beats_global(self):
        cfg = ConfigStore({"x": 0, "Pruning::x": 1})
        assert cfg.resolve("P1", "Pruning", "x") == 1

    def test_global_fallback(self):
        cfg = ConfigStore({"x": 0})
        assert cfg.resolve("P1", "Pruning", "x") == 0

    def test_absent_is_none(self):
        assert ConfigStore().resolve("P1", "Pruning", "x") is None

    def test_instance_override_is_local(self):
        # Defining an instance-scoped key changes resolution only for that instance.
        rng = np.random.default_rng(0)
        for _ in range(50):
            base = {"p": float(rng.random()), "T::p": float(rng.random())}
            cfg = ConfigStore(base)
            before_other = cfg.resolve("other", "T", "p")
            cfg.set("mine@p", 123.0)
            assert cfg.resolve("mine", "T", "p") == 123.0
            assert cfg.resolve("other", "T", "p") == before_other

    def test_resolution_deterministic(self):
        cfg = ConfigStore({"a@p": 1, "T::p": 2, "p": 3})
        results = {cfg.resolve("a", "T", "p") for _ in range(10)}
        assert results == {1}

    def test_require_raises_on_absent(self):
        with pytest.raises(ConfigError):
            ConfigStore().require("a", "T", "p")


class TestConfigKeysAndValues:
    def test_key_grammar(self):
        assert parse_key("P1@x") == ("instance", "P1", "x")
        assert parse_key("Pruning::x") == ("type", "Pruning", "x")
        assert parse_key("x") == ("global", None, "x")

    @pytest.mark.parametrize("bad", ["", "@x", "P1@", "::x", "T::", "a@b::c", "a@b@c"])
    def test_malformed_keys_rejected(self, bad):
        with pytest.raises(ConfigError):
            parse_key(bad)

    def test_value_types(self):
        cfg = ConfigStore()
        cfg.set("a", 1)
        cfg.set("b", 2.5)
        cfg.set("c", "text")
        cfg.set("d", True)
        cfg.set("e", [1, 2.5])
        with pytest.raises(ConfigError):
            cfg.set("f", {"nested": 1})
        with pytest.raises(ConfigError):
            cfg.set("g", ["strings", "banned"])


class TestExecutionLog:
    def test_append_only_and_monotone(self):
        log = ExecutionLog()
        for i in range(20):
            log.append(f"t{i % 3}", "started", "x")
        stamps = [r.timestamp for r in log.records]
        assert stamps == sorted(stamps)
        per_task = {}
        for r in log.records:
            assert r.timestamp >= per_task.get(r.task, 0.0)
            per_task[r.task] = r.timestamp

    def test_unknown_event_rejected(self):
        with pytest.raises(FlowforgeError):
            ExecutionLog().append("t", "exploded", "")

    def test_detail_capped(self):
        log = ExecutionLog()
        log.append("t", "started", "y" * (MAX_LOG_DETAIL * 2))
        assert len(log.records[0].detail) == MAX_LOG_DETAIL

    def test_count_filters(self):
        log = ExecutionLog()
        log.append("a", "started", "")
        log.append("a", "finished", "")
        log.append("b", "finished", "")
        assert log.count(task="a") == 2
        assert log.count(event="finished") == 2
        assert log.count(task="a", event="finished") == 1


class TestModelSpace:
    def test_versions_monotone_from_one(self):
        mm = MetaModel()
        assert mm.space.put("network", tiny_network(), None, "gen") == 1
        assert mm.space.put("kernel_stage_placeholder" if False else "network", tiny_network(), None, "gen") == 2
        assert mm.space.put("network", tiny_network(), mk_metrics(), "prune") == 3

    def test_stage_coexistence_and_latest(self, small_backend):
        mm = MetaModel()
        net = small_backend.network()
        mm.space.put("network", net, None, "gen")
        from flowforge.netmodel import make_kernel, Fixed

        kernel = make_kernel(net, Fixed(18, 8), "dev-a", 5.0, 1)
        mm.space.put("kernel", kernel, mk_metrics(), "hls")
        mm.space.put("network", net.with_pruning(0.5), None, "prune")
        assert mm.space.latest("network").version == 3
        assert mm.space.latest("kernel").version == 2
        assert mm.space.latest().version == 3
        assert MetaModel().space.latest("kernel") is None

    def test_payload_stored_by_value(self):
        mm = MetaModel()
        net = tiny_network()
        mm.space.put("network", net, None, "gen")
        net.pruning_rate = 0.77  # mutating the caller's object must not reach history
        assert mm.space.latest("network").payload.pruning_rate == 0.0

    def test_round_trip_bit_exact(self):
        mm = MetaModel()
        net = tiny_network(accuracy=0.123456789012345)
        mm.space.put("network", net, None, "gen")
        stored = mm.space.latest("network").payload
        assert stored.to_json_dict() == net.to_json_dict()

    def test_invalid_payload_rejected(self):
        bad = tiny_network()
        bad.pruning_rate = 2.0
        with pytest.raises(FlowforgeError):
            MetaModel().space.put("network", bad, None, "gen")

    def test_unknown_stage_rejected(self):
        with pytest.raises(FlowforgeError):
            MetaModel().space.put("rtl", tiny_network(), None, "gen")


class TestCloneAndSerialization:
    def test_clone_isolation(self):
        mm = MetaModel(ConfigStore({"x": 1}))
        mm.space.put("network", tiny_network(), None, "gen")
        mm.log.append("gen", "finished", "ok")
        before = mm.to_json()

        clone = mm.clone()
        clone.cfg.set("x", 99)
        clone.cfg.set("new@key", 5)
        clone.log.append("other", "started", "mutating the clone")
        clone.space.put("network", tiny_network(0.5), mk_metrics(), "prune")

        assert mm.to_json() == before
        assert clone.to_json() != before

    def test_json_round_trip_lossless(self, small_backend):
        mm = MetaModel(ConfigStore({"x": 0.1, "T::y": [1, 2.5], "i@z": True, "s": "str"}))
        net = small_backend.network()
        mm.space.put("network", net, None, "gen")
        from flowforge.netmodel import make_kernel, Fixed

        kernel = make_kernel(net, Fixed(18, 8), "dev-a", 5.0, 1)
        mm.space.put("kernel", kernel, small_backend.evaluate(net, kernel), "hls")
        mm.log.append("gen", "started", "")
        mm.log.append("gen", "finished", "details")

        text = mm.to_json()
        back = MetaModel.from_json(text)
        assert back.to_json() == text

    def test_schema_version_checked(self):
        with pytest.raises(FlowforgeError):
            MetaModel.from_json_dict({"metamodel_version": 99, "cfg": {}, "log": [], "space": []})
