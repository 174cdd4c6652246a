"""A cyclic flow: model generation, pruning, mock synthesis, and a loop branch.

The graph mirrors the classic single-optimization strategy: a JOIN merges
the initial path with the branch's loop-back edge, and the BRANCH keeps
looping until its predicate releases the token to STOP.
"""

from flowforge import Benchmark, SyntheticBackend
from flowforge.flowgraph import FlowBuilder, TaskKind, run, validate
from flowforge.ktasks import PredicateSpec

backend = SyntheticBackend(Benchmark.builtin("jetdnn-synth"))

builder = FlowBuilder()
gen = builder.task(TaskKind.MODEL_GEN, "gen")
join = builder.task(TaskKind.JOIN, "join")
prune = builder.task(TaskKind.PRUNING, "prune")
hls = builder.task(TaskKind.HLS_MOCK_A, "hls")
loop = builder.task(
    TaskKind.BRANCH, "loop", predicate=PredicateSpec("loop_count_below", {"limit": 2})
)
stop = builder.task(TaskKind.STOP, "stop")
builder.chain(gen, join, prune, hls, loop)
builder.edge(loop, join, port=0)   # predicate true: go around again
builder.edge(loop, stop, port=1)   # predicate false: deliver the result
builder.set_entry(gen)
graph = builder.build()

print("validation diagnostics:", validate(graph) or "none")

cfg = {
    "Pruning::tolerate_acc_loss": 0.02,
    "Pruning::pruning_rate_thresh": 0.02,
    "HLS4ML::FPGA_part_number": "zynq-a",
}
result = run(graph, cfg, backend, workers=1)
assert result.ok, result.error

mm = result.stops[0].mm
print(f"\npruning executed {mm.log.count(task='prune', event='finished')} time(s)")
print("\nexecution trace:")
for record in mm.log.records:
    print(f"  {record.task:<6} {record.event:<9} {record.detail[:90]}")

final = mm.space.latest("network").payload
metrics = mm.space.latest("kernel").metrics
print(f"\nfinal pruning rate: {final.pruning_rate}")
print(f"accuracy {metrics.accuracy:.4f} (loss {metrics.accuracy_loss:.4f}), "
      f"dsp {metrics.dsp_used} ({metrics.dsp_util:.1%} of zynq-a)")
