"""Inner searches: binary-search pruning, schedule scaling, bit-width search."""

from __future__ import annotations

import numpy as np
import pytest

from flowforge.metamodel import ConfigStore, MetaModel
from flowforge.netmodel import (
    PRECISION_KINDS,
    Fixed,
    SyntheticBackend,
    make_kernel,
)
from flowforge.otasks import (
    auto_prune,
    auto_scale,
    qhs,
    run_pruning,
    run_quantization,
    run_scaling,
)
from flowforge.errors import ConfigError

from conftest import make_benchmark


class TestAutoPrune:
    def test_bisection_trace_around_fixed_frontier(self):
        # Zero tolerance with the knee at 0.7 makes 0.7 the exact frontier.
        bench = make_benchmark(layers=[{"kappa": 0.9, "redundancy": 0.7}])
        backend = SyntheticBackend(bench)
        result = auto_prune(backend.network(), 0.0, 0.125, backend)
        assert [p.value for p in result.trace] == [0.0, 0.5, 0.75, 0.625]
        assert [p.feasible for p in result.trace] == [True, True, False, True]
        assert result.rate == 0.625
        assert abs(result.rate - 0.7) < 0.125
        assert result.evaluations == 4

    @pytest.mark.parametrize("k", range(1, 11))
    def test_evaluation_bound(self, k, jetdnn_backend):
        threshold = 2.0**-k
        jetdnn_backend.reset_eval_count()
        result = auto_prune(jetdnn_backend.network(), 0.02, threshold, jetdnn_backend)
        assert result.evaluations <= 1 + k
        assert jetdnn_backend.eval_count == result.evaluations

    def test_unconstrained_converges_to_upper_bound(self, small_backend):
        # Tolerance so large every rate is feasible.
        result = auto_prune(small_backend.network(), 10.0, 0.0625, small_backend)
        assert result.rate >= 1.0 - 0.0625

    def test_within_threshold_of_dense_sweep(self, jetdnn_backend):
        net = jetdnn_backend.network()
        start = jetdnn_backend.evaluate(net).accuracy
        for threshold in (0.25, 0.0625, 0.015625):
            result = auto_prune(net, 0.02, threshold, jetdnn_backend)
            grid = np.arange(0.0, 1.0, threshold / 4)
            feasible = [
                r
                for r in grid
                if start - jetdnn_backend.evaluate(net.with_pruning(float(r))).accuracy
                <= 0.02
            ]
            assert abs(result.rate - max(feasible)) <= threshold + 1e-12

    def test_feasible_probes_respect_tolerance(self, jetdnn_backend):
        net = jetdnn_backend.network()
        tolerance = 0.02
        result = auto_prune(net, tolerance, 0.01, jetdnn_backend)
        start = result.trace[0].accuracy
        for probe in result.trace:
            assert probe.feasible == (start - probe.accuracy <= tolerance)

    def test_composes_with_prior_scaling(self, jetdnn_backend):
        # The loss budget anchors at the task's own start, so a pre-scaled
        # network still begins from a feasible bracket.
        net = jetdnn_backend.network().with_scale(0.25)
        result = auto_prune(net, 0.02, 0.02, jetdnn_backend)
        assert result.trace[0].feasible
        assert 0.0 <= result.rate < 1.0

    def test_parameter_validation(self, small_backend):
        net = small_backend.network()
        with pytest.raises(ValueError):
            auto_prune(net, -0.1, 0.5, small_backend)
        with pytest.raises(ValueError):
            auto_prune(net, 0.1, 0.0, small_backend)
        with pytest.raises(ValueError):
            auto_prune(net, 0.1, 1.0, small_backend)


class TestAutoScale:
    def test_schedule_walk(self):
        # Free down to 0.3; loss 0.4*(0.3-s) below it. 0.25 passes at 0.03,
        # 0.125 fails.
        bench = make_benchmark(sigma=0.4, s_min=0.3)
        backend = SyntheticBackend(bench)
        result = auto_scale(backend.network(), 0.03, 8, backend)
        assert [p.value for p in result.trace] == [1.0, 0.5, 0.25, 0.125]
        assert result.factor == 0.25
        assert result.evaluations == 4

    def test_zero_tolerance_with_lossy_first_step(self):
        bench = make_benchmark(sigma=0.4, s_min=1.0)
        backend = SyntheticBackend(bench)
        result = auto_scale(backend.network(), 0.0, 8, backend)
        assert result.factor == 1.0
        assert result.evaluations == 2

    def test_single_trial_budget(self, small_backend):
        result = auto_scale(small_backend.network(), 0.5, 1, small_backend)
        assert result.factor == 1.0
        assert result.evaluations == 1

    def test_returns_smallest_feasible_schedule_factor(self):
        bench = make_benchmark(sigma=0.5, s_min=0.4)
        backend = SyntheticBackend(bench)
        tolerance = 0.04
        result = auto_scale(backend.network(), tolerance, 10, backend)
        net = backend.network()
        start = backend.evaluate(net.with_scale(1.0)).accuracy
        schedule = [1.0 * 0.5**i for i in range(10)]
        feasible = [
            f
            for f in schedule
            if start - backend.evaluate(net.with_scale(f)).accuracy <= tolerance
        ]
        assert result.factor == min(feasible)

    def test_custom_step(self, small_backend):
        result = auto_scale(small_backend.network(), 10.0, 3, small_backend, step=0.8)
        assert [round(p.value, 6) for p in result.trace] == [1.0, 0.8, 0.64]

    def test_parameter_validation(self, small_backend):
        net = small_backend.network()
        with pytest.raises(ValueError):
            auto_scale(net, 0.1, 0, small_backend)
        with pytest.raises(ValueError):
            auto_scale(net, 0.1, 4, small_backend, step=1.0)


def lone_decrement_loss(backend, net, kernel, vl_index, kind, start_accuracy):
    probe = kernel.copy()
    fmt = probe.virtual_layers[vl_index].precisions[kind]
    probe.virtual_layers[vl_index].precisions[kind] = fmt.with_total(fmt.total_bits - 1)
    return start_accuracy - backend.evaluate(net, probe).accuracy


def assert_locally_minimal(backend, net, result, tolerance):
    """Oracle: no unblocked precision admits one more bit of reduction."""
    for i, vl in enumerate(result.kernel.virtual_layers):
        for kind in PRECISION_KINDS:
            fmt = vl.precisions[kind]
            if (vl.id, kind) in result.blocked:
                loss = lone_decrement_loss(backend, net, result.kernel, i, kind, result.start_accuracy)
                assert loss > tolerance
            else:
                assert fmt.total_bits == fmt.integer_bits + 1


class TestQhs:
    def make_start(self, backend, precision=Fixed(18, 8)):
        net = backend.network()
        return net, make_kernel(net, precision, backend.default_device().name, 5.0, 1)

    def test_descends_to_floors_when_budget_below_penalty_step(self):
        bench = make_benchmark(layers=[{"floors": (8, 6, 10), "penalty": 0.004}])
        backend = SyntheticBackend(bench)
        net, kernel = self.make_start(backend)
        result = qhs(net, kernel, 0.001, backend)
        vl = result.kernel.virtual_layers[0]
        assert {k: vl.precisions[k].total_bits for k in PRECISION_KINDS} == {
            "weights": 8,
            "biases": 6,
            "results": 10,
        }
        assert result.start_accuracy - result.accuracy <= 0.001
        assert_locally_minimal(backend, net, result, 0.001)

    def test_zero_tolerance_blocks_everything_at_start(self):
        # Floors at the starting width make the very first reduction lossy.
        bench = make_benchmark(layers=[{"floors": (18, 18, 18), "penalty": 0.004}])
        backend = SyntheticBackend(bench)
        net, kernel = self.make_start(backend)
        result = qhs(net, kernel, 0.0, backend)
        vl = result.kernel.virtual_layers[0]
        assert all(vl.precisions[k].total_bits == 18 for k in PRECISION_KINDS)
        assert result.blocked == {("d1", k) for k in PRECISION_KINDS}

    def test_symmetric_instances_converge_identically(self):
        # Budget below the per-bit penalty: both virtual layers must stop at
        # their (identical) floors. Larger budgets admit asymmetric optima
        # because a locally minimal map has to spend the remainder somewhere.
        spec = {"floors": (8, 6, 10), "penalty": 0.004}
        bench = make_benchmark(layers=[dict(spec), dict(spec)])
        backend = SyntheticBackend(bench)
        net, kernel = self.make_start(backend)
        result = qhs(net, kernel, 0.001, backend)
        first, second = result.kernel.virtual_layers
        bits = lambda vl: {k: vl.precisions[k].total_bits for k in PRECISION_KINDS}
        assert bits(first) == bits(second) == {"weights": 8, "biases": 6, "results": 10}

    def test_lossless_reduction_sets_integer_bits(self):
        bench = make_benchmark(layers=[{"w_max": 3.7, "b_max": 0.5, "floors": (18, 18, 18)}])
        backend = SyntheticBackend(bench)
        net, kernel = self.make_start(backend)
        result = qhs(net, kernel, 0.0, backend)
        vl = result.kernel.virtual_layers[0]
        assert vl.precisions["weights"].integer_bits == 3  # covers 3.7
        assert vl.precisions["biases"].integer_bits == 1  # covers 0.5
        assert vl.precisions["results"].integer_bits == 8  # default kept

    def test_never_increases_bits_never_below_format_floor(self, jetdnn_backend):
        net = jetdnn_backend.network()
        kernel = make_kernel(net, Fixed(18, 8), "u250-a", 5.0, 1)
        result = qhs(net, kernel, 0.05, jetdnn_backend)
        for vl in result.kernel.virtual_layers:
            for kind in PRECISION_KINDS:
                fmt = vl.precisions[kind]
                assert fmt.total_bits <= 18
                assert fmt.total_bits >= fmt.integer_bits + 1

    def test_final_map_obeys_budget_and_minimality(self, jetdnn_backend):
        net = jetdnn_backend.network()
        for tolerance in (0.0, 0.005, 0.01, 0.03):
            kernel = make_kernel(net, Fixed(18, 8), "u250-a", 5.0, 1)
            result = qhs(net, kernel, tolerance, jetdnn_backend)
            assert result.start_accuracy - result.accuracy <= tolerance + 1e-12
            assert_locally_minimal(jetdnn_backend, net, result, tolerance)

    def test_randomized_instances_vs_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(12):
            n_layers = int(rng.integers(1, 4))
            layers = []
            for _ in range(n_layers):
                floors = sorted(int(v) for v in rng.integers(4, 14, size=3))
                layers.append(
                    {
                        "floors": (floors[1], floors[0], floors[2]),
                        "penalty": float(rng.uniform(0.001, 0.01)),
                        "w_max": float(rng.uniform(0.3, 4.0)),
                        "b_max": float(rng.uniform(0.1, 2.0)),
                    }
                )
            backend = SyntheticBackend(make_benchmark(layers=layers))
            net = backend.network()
            kernel = make_kernel(net, Fixed(18, 8), "dev-a", 5.0, 1)
            tolerance = float(rng.uniform(0.0, 0.05))
            result = qhs(net, kernel, tolerance, backend)
            assert result.start_accuracy - result.accuracy <= tolerance + 1e-12
            assert_locally_minimal(backend, net, result, tolerance)

    def test_rejects_negative_tolerance(self, small_backend):
        net, kernel = self.make_start(small_backend)
        with pytest.raises(ValueError):
            qhs(net, kernel, -0.01, small_backend)


class TestFlowWrappers:
    def seeded_mm(self, backend, cfg):
        mm = MetaModel(ConfigStore(cfg))
        mm.space.put("network", backend.network(), None, "gen")
        return mm

    def test_pruning_writes_one_entry(self, jetdnn_backend):
        mm = self.seeded_mm(
            jetdnn_backend,
            {"Pruning::tolerate_acc_loss": 0.02, "Pruning::pruning_rate_thresh": 0.02},
        )
        before = len(mm.space.entries)
        run_pruning(mm, "prune", jetdnn_backend)
        assert len(mm.space.entries) == before + 1
        entry = mm.space.latest("network")
        assert entry.producer == "prune"
        assert entry.metrics is not None
        assert entry.payload.pruning_rate > 0.5

    def test_instance_scope_overrides_type_scope(self, jetdnn_backend):
        mm = self.seeded_mm(
            jetdnn_backend,
            {
                "Pruning::tolerate_acc_loss": 0.02,
                "Pruning::pruning_rate_thresh": 0.02,
                "p2@tolerate_acc_loss": 0.0,
            },
        )
        run_pruning(mm, "p1", jetdnn_backend)
        rate_default = mm.space.latest("network").payload.pruning_rate
        mm2 = self.seeded_mm(
            jetdnn_backend,
            {
                "Pruning::tolerate_acc_loss": 0.02,
                "Pruning::pruning_rate_thresh": 0.02,
                "p2@tolerate_acc_loss": 0.0,
            },
        )
        run_pruning(mm2, "p2", jetdnn_backend)
        rate_strict = mm2.space.latest("network").payload.pruning_rate
        assert rate_strict < rate_default

    def test_missing_required_parameter(self, jetdnn_backend):
        mm = self.seeded_mm(jetdnn_backend, {})
        with pytest.raises(ConfigError):
            run_pruning(mm, "prune", jetdnn_backend)

    def test_scaling_auto_and_fixed(self, jetdnn_backend):
        mm = self.seeded_mm(jetdnn_backend, {"Scaling::tolerate_acc_loss": 0.05})
        run_scaling(mm, "scale", jetdnn_backend)
        assert mm.space.latest("network").payload.scale_factor == 0.5

        mm2 = self.seeded_mm(
            jetdnn_backend,
            {
                "Scaling::tolerate_acc_loss": 0.05,
                "Scaling::scale_auto": False,
                "Scaling::default_scale_factor": 0.75,
            },
        )
        run_scaling(mm2, "scale", jetdnn_backend)
        assert mm2.space.latest("network").payload.scale_factor == 0.75

    def test_quantization_writes_kernel(self, jetdnn_backend):
        mm = self.seeded_mm(
            jetdnn_backend,
            {
                "Quantization::tolerate_acc_loss": 0.01,
                "HLS4ML::default_precision": "ap_fixed<18,8>",
                "HLS4ML::FPGA_part_number": "zynq-a",
            },
        )
        run_quantization(mm, "quant", jetdnn_backend)
        entry = mm.space.latest("kernel")
        assert entry is not None
        assert entry.payload.device == "zynq-a"
        assert entry.payload.source_network_version == 1
        assert entry.metrics is not None

    def test_max_trials_honored(self, jetdnn_backend):
        mm = self.seeded_mm(
            jetdnn_backend,
            {"Scaling::tolerate_acc_loss": 10.0, "Scaling::max_trials_num": 1},
        )
        run_scaling(mm, "scale", jetdnn_backend)
        assert mm.space.latest("network").payload.scale_factor == 1.0
