"""Outer search comparison: grid, stochastic grid, and Bayesian optimization.

All three explore the same tolerance-vector box on the quantization-only
strategy. The grid spends 343 evaluations; the other two spend 22. The
2-objective hypervolume (accuracy vs DSP) against a shared reference
point summarizes the quality of each front.
"""

import time

from flowforge import Benchmark, SyntheticBackend
from flowforge.dse import (
    DseConfig,
    FlowTemplate,
    GridSpec,
    Ordering,
    ThetaBounds,
    candidate_front,
    grid_search,
    run_dse,
    stochastic_grid_search,
)
from flowforge.pareto import ObjectivePoint, hypervolume_2d

backend = SyntheticBackend(Benchmark.builtin("jetdnn-synth"))
bounds = ThetaBounds((0.001, 0.05), (0.001, 0.05), (0.001, 0.05))
template = FlowTemplate(base_cfg={"Pruning::pruning_rate_thresh": 0.02})
ordering = Ordering.parse("Q")
weights = (0.5, 0.5, 0.0, 0.0)

histories = {}

cfg_grid = DseConfig(bounds=bounds, budget=343, initial_design=1, weights=weights, seed=0)
started = time.monotonic()
histories["grid (343)"] = grid_search(template, ordering, GridSpec((7, 7, 7)), cfg_grid, backend)
grid_seconds = time.monotonic() - started

started = time.monotonic()
histories["sgs (22)"] = stochastic_grid_search(
    template, ordering, GridSpec((7, 7, 7)), 22, 0, cfg_grid, backend
)
sgs_seconds = time.monotonic() - started

cfg_bo = DseConfig(
    bounds=bounds, budget=22, initial_design=8, weights=weights, stall_limit=22, seed=0
)
started = time.monotonic()
histories["bo (22)"] = run_dse(template, [ordering], cfg_bo, backend).histories["Q"]
bo_seconds = time.monotonic() - started

everything = [c for h in histories.values() for c in h]
reference = (
    min(c.metrics.accuracy for c in everything) - 1e-3,
    max(c.metrics.dsp_used for c in everything) + 1.0,
)


def front_hv(history):
    points = [
        ObjectivePoint((c.metrics.accuracy, float(c.metrics.dsp_used)), ("max", "min"))
        for c in history
    ]
    return hypervolume_2d(points, reference)


grid_hv = front_hv(histories["grid (343)"])
print(f"{'method':<12} {'evals':>5} {'hypervolume':>12} {'vs grid':>8}")
for label, history in histories.items():
    hv = front_hv(history)
    print(f"{label:<12} {len(history):>5} {hv:>12.5f} {hv / grid_hv:>7.1%}")

print(f"\nwall time: grid {grid_seconds:.2f}s, sgs {sgs_seconds:.2f}s, bo {bo_seconds:.2f}s")
print(f"evaluation ratio grid/bo: {343 / 22:.1f}x")

print("\nbayesian front (accuracy, dsp):")
for c in candidate_front(histories["bo (22)"], (("accuracy", "max"), ("dsp", "min"))):
    print(
        f"  alpha_q {c.theta.alpha_q:.4f} -> accuracy {c.metrics.accuracy:.4f}, "
        f"dsp {c.metrics.dsp_used}"
    )
