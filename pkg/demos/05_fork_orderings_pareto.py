"""Parallel strategy paths: FORK two variants and REDUCE by dominance.

FORK clones the blackboard down both paths, so each variant optimizes an
independent copy. Instance-scoped keys give each path its own budget:
one prunes aggressively and quantizes gently, the other the reverse. The
Pareto REDUCE then keeps whichever final designs are non-dominated,
producing an accuracy/resource front instead of a single answer.
"""

from flowforge import Benchmark, SyntheticBackend
from flowforge.flowgraph import FlowBuilder, TaskKind, run
from flowforge.ktasks import ReduceSpec

backend = SyntheticBackend(Benchmark.builtin("jetdnn-synth"))

builder = FlowBuilder()
gen = builder.task(TaskKind.MODEL_GEN, "gen")
fork = builder.task(TaskKind.FORK, "fork")
p_hard = builder.task(TaskKind.PRUNING, "prune_hard")
q_soft = builder.task(TaskKind.QUANTIZATION, "quant_soft")
h1 = builder.task(TaskKind.HLS_MOCK_A, "hls_1")
p_soft = builder.task(TaskKind.PRUNING, "prune_soft")
q_hard = builder.task(TaskKind.QUANTIZATION, "quant_hard")
h2 = builder.task(TaskKind.HLS_MOCK_A, "hls_2")
reduce_ = builder.task(
    TaskKind.REDUCE,
    "front",
    reduce=ReduceSpec("pareto", (("accuracy", "max"), ("dsp", "min"), ("lut", "min"))),
)
stop = builder.task(TaskKind.STOP, "stop")
builder.edge(gen, fork)
builder.edge(fork, p_hard, port=0)
builder.edge(fork, p_soft, port=1)
builder.chain(p_hard, q_soft, h1)
builder.chain(p_soft, q_hard, h2)
builder.edge(h1, reduce_)
builder.edge(h2, reduce_)
builder.edge(reduce_, stop)
builder.set_entry(gen)

cfg = {
    # Type-scoped defaults ...
    "Pruning::tolerate_acc_loss": 0.02,
    "Pruning::pruning_rate_thresh": 0.02,
    "Quantization::tolerate_acc_loss": 0.01,
    # ... overridden per instance: each path spends its budget differently.
    "prune_hard@tolerate_acc_loss": 0.035,
    "quant_soft@tolerate_acc_loss": 0.002,
    "prune_soft@tolerate_acc_loss": 0.005,
    "quant_hard@tolerate_acc_loss": 0.04,
    "HLS4ML::FPGA_part_number": "u250-a",
}
result = run(builder.build(), cfg, backend, workers=2)
assert result.ok, result.error
mm = result.stops[0].mm

print("per-path results before reduction:")
for task, label in (("hls_1", "prune hard, quantize soft"), ("hls_2", "prune soft, quantize hard")):
    record = next(r for r in mm.log.records if r.task == task and r.event == "finished")
    print(f"  {label}: {record.detail[:96]}")

print("\nsurvivors of the Pareto reduce:")
for entry in mm.space.entries:
    m = entry.metrics
    print(
        f"  from {entry.producer}: accuracy {m.accuracy:.4f}, "
        f"dsp {m.dsp_used}, lut {m.lut_used}"
    )
print(f"\ntoken accounting: {result.stats.to_json_dict()}")
