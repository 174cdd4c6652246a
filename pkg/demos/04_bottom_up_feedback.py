"""Bottom-up feedback: hardware overmap relaxes software tolerances.

The flow targets a deliberately tiny vendor-B device. The first pass
overmaps its LUT budget, so the BRANCH predicate sends the token back
around while its action raises the pruning and quantization tolerances;
the loop exits as soon as the synthesized design fits.
"""

import re

from flowforge import Benchmark, SyntheticBackend
from flowforge.flowgraph import FlowBuilder, TaskKind, run
from flowforge.ktasks import ActionSpec, PredicateSpec

backend = SyntheticBackend(Benchmark.builtin("jetdnn-synth"))
device = backend.benchmark.device("nano-b")
print(f"target device: {device.name} ({device.lut_capacity} LUTs, vendor {device.vendor})")

builder = FlowBuilder()
gen = builder.task(TaskKind.MODEL_GEN, "gen")
join = builder.task(TaskKind.JOIN, "join")
prune = builder.task(TaskKind.PRUNING, "prune")
quant = builder.task(TaskKind.QUANTIZATION, "quant")
hls = builder.task(TaskKind.HLS_MOCK_B, "hls")
check = builder.task(
    TaskKind.BRANCH,
    "check",
    predicate=PredicateSpec("overmapped", {"u_max": 1.0}),
    action=ActionSpec("relax_tolerances", {"delta": 0.01, "cap": 0.2}),
)
stop = builder.task(TaskKind.STOP, "stop")
builder.chain(gen, join, prune, quant, hls, check)
builder.edge(check, join, port=0)
builder.edge(check, stop, port=1)
builder.set_entry(gen)

cfg = {
    "Pruning::tolerate_acc_loss": 0.005,
    "Pruning::pruning_rate_thresh": 0.02,
    "Quantization::tolerate_acc_loss": 0.001,
    "HLS4ML::FPGA_part_number": "nano-b",
}
result = run(builder.build(), cfg, backend, workers=1)
assert result.ok, result.error
mm = result.stops[0].mm

print("\niteration trace (LUT utilization after each synthesis):")
utils = [
    e.metrics.lut_util
    for e in mm.space.entries
    if e.stage == "kernel" and e.metrics is not None and e.producer == "hls"
]
tolerances = [
    m.group(1)
    for r in mm.log.records
    if r.task == "quant" and r.event == "finished"
    for m in [re.search(r"tolerance ([0-9.e+-]+)", r.detail)]
    if m
]
for i, (util, tol) in enumerate(zip(utils, tolerances), start=1):
    verdict = "overmapped -> relax" if util > 1.0 else "fits -> stop"
    print(f"  pass {i}: quant budget {tol:<8} lut util {util:7.3f}  {verdict}")

final = mm.space.latest("kernel").metrics
print(f"\nfinal design: accuracy {final.accuracy:.4f}, lut {final.lut_used} "
      f"({final.lut_util:.1%}), tolerances "
      f"p={mm.cfg.get('Pruning::tolerate_acc_loss')}, "
      f"q={mm.cfg.get('Quantization::tolerate_acc_loss')}")
